#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "rmt/measure.hpp"

namespace rmt {

struct PlanEntry {
  std::size_t source = 0;
  std::size_t target = 0;
  double mass = 0.0;
  friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

/// Sparse semicoupling between two measures: first marginal <= mu, second = nu.
///
/// Entries are kept sorted by (source, target); the plan shares ownership of
/// both marginal measures so it can be evaluated on its own.
class TransportPlan {
 public:
  TransportPlan() = default;
  TransportPlan(std::shared_ptr<const DiscreteMeasure> mu, std::shared_ptr<const DiscreteMeasure> nu,
                std::vector<PlanEntry> entries);

  const PeriodicDomain& domain() const { return mu_->domain(); }
  const DiscreteMeasure& source_measure() const { return *mu_; }
  const DiscreteMeasure& target_measure() const { return *nu_; }
  const std::shared_ptr<const DiscreteMeasure>& source_ptr() const { return mu_; }
  const std::shared_ptr<const DiscreteMeasure>& target_ptr() const { return nu_; }
  const std::vector<PlanEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }

  /// Row sums, one per source atom.
  std::vector<double> source_used() const;
  /// Column sums, one per target atom.
  std::vector<double> target_received() const;
  double total_mass() const;

  double distance(const PlanEntry& e) const;
  Point displacement(const PlanEntry& e) const;

  /// Largest violation of the semicoupling marginal constraints.
  double marginal_error() const;

 private:
  std::shared_ptr<const DiscreteMeasure> mu_ = std::make_shared<DiscreteMeasure>();
  std::shared_ptr<const DiscreteMeasure> nu_ = std::make_shared<DiscreteMeasure>();
  std::vector<PlanEntry> entries_;
};

}  // namespace rmt
