#include "rmt/plan.hpp"

#include <algorithm>
#include <cmath>

namespace rmt {

TransportPlan::TransportPlan(std::shared_ptr<const DiscreteMeasure> mu, std::shared_ptr<const DiscreteMeasure> nu,
                             std::vector<PlanEntry> entries)
    : mu_(std::move(mu)), nu_(std::move(nu)), entries_(std::move(entries)) {
  require_same_domain(mu_->domain(), nu_->domain());
  for (const PlanEntry& e : entries_) {
    if (e.source >= mu_->size() || e.target >= nu_->size()) {
      throw Error(ErrorCode::kInvalidArgument, "plan entry refers to a missing atom");
    }
    if (!(e.mass > 0.0) || !std::isfinite(e.mass)) {
      throw Error(ErrorCode::kInvalidArgument, "plan entry masses must be positive");
    }
  }
  std::sort(entries_.begin(), entries_.end(), [](const PlanEntry& a, const PlanEntry& b) {
    return a.source != b.source ? a.source < b.source : a.target < b.target;
  });
  // Merge repeated (source, target) pairs.
  std::vector<PlanEntry> merged;
  for (const PlanEntry& e : entries_) {
    if (!merged.empty() && merged.back().source == e.source && merged.back().target == e.target) {
      merged.back().mass += e.mass;
    } else {
      merged.push_back(e);
    }
  }
  entries_ = std::move(merged);
}

std::vector<double> TransportPlan::source_used() const {
  std::vector<double> used(mu_->size(), 0.0);
  for (const PlanEntry& e : entries_) used[e.source] += e.mass;
  return used;
}

std::vector<double> TransportPlan::target_received() const {
  std::vector<double> recv(nu_->size(), 0.0);
  for (const PlanEntry& e : entries_) recv[e.target] += e.mass;
  return recv;
}

double TransportPlan::total_mass() const {
  double s = 0.0;
  for (const PlanEntry& e : entries_) s += e.mass;
  return s;
}

double TransportPlan::distance(const PlanEntry& e) const {
  return domain().distance((*mu_)[e.source].location, (*nu_)[e.target].location);
}

Point TransportPlan::displacement(const PlanEntry& e) const {
  return domain().displacement((*mu_)[e.source].location, (*nu_)[e.target].location);
}

double TransportPlan::marginal_error() const {
  double worst = 0.0;
  const auto used = source_used();
  for (std::size_t i = 0; i < used.size(); ++i) worst = std::max(worst, used[i] - (*mu_)[i].mass);
  const auto recv = target_received();
  for (std::size_t j = 0; j < recv.size(); ++j) worst = std::max(worst, std::abs(recv[j] - (*nu_)[j].mass));
  return worst;
}

}  // namespace rmt
