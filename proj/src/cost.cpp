#include "rmt/cost.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace rmt {

ConcaveCost::ConcaveCost(std::vector<double> breakpoints, std::vector<double> values, double final_slope)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)), final_slope_(final_slope) {
  if (breakpoints_.empty() || breakpoints_.size() != values_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "cost needs matching, nonempty breakpoint and value lists");
  }
  if (breakpoints_[0] != 0.0 || values_[0] != 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "cost must start at theta(0) = 0");
  }
  if (!(final_slope_ > 0.0) || !std::isfinite(final_slope_)) {
    throw Error(ErrorCode::kInvalidArgument, "final slope must be positive");
  }
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    const double dx = breakpoints_[i] - breakpoints_[i - 1];
    const double dy = values_[i] - values_[i - 1];
    if (!(dx > 0.0) || !(dy > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "cost must be strictly increasing");
    }
    const double s = dy / dx;
    if (s > prev * (1.0 + 1e-12)) throw Error(ErrorCode::kInvalidArgument, "cost slopes must not increase");
    prev = s;
  }
  if (final_slope_ > prev * (1.0 + 1e-12)) {
    throw Error(ErrorCode::kInvalidArgument, "final slope exceeds the last segment slope");
  }
}

ConcaveCost ConcaveCost::linear(double slope) { return ConcaveCost({0.0}, {0.0}, slope); }

ConcaveCost ConcaveCost::power(double p, double r_max, int segments) {
  if (!(p > 0.0 && p <= 1.0) || !(r_max > 0.0) || segments < 1) {
    throw Error(ErrorCode::kInvalidArgument, "power cost needs 0 < p <= 1, r_max > 0, segments >= 1");
  }
  if (p == 1.0) return linear();
  std::vector<double> bp{0.0};
  std::vector<double> val{0.0};
  // Geometric grid from r_max * 2^-20 up to r_max.
  const double r_min = r_max * std::ldexp(1.0, -20);
  const double ratio = std::pow(r_max / r_min, 1.0 / segments);
  double r = r_min;
  for (int i = 0; i <= segments; ++i) {
    bp.push_back(r);
    val.push_back(std::pow(r, p));
    r = (i + 1 == segments) ? r_max : r * ratio;
  }
  return ConcaveCost(std::move(bp), std::move(val), p * std::pow(r_max, p - 1.0));
}

double ConcaveCost::operator()(double r) const {
  if (r <= 0.0) return 0.0;
  if (r >= breakpoints_.back()) return values_.back() + final_slope_ * (r - breakpoints_.back());
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), r);
  const auto k = static_cast<std::size_t>(it - breakpoints_.begin());
  const double x0 = breakpoints_[k - 1];
  const double x1 = breakpoints_[k];
  const double t = (r - x0) / (x1 - x0);
  return values_[k - 1] + t * (values_[k] - values_[k - 1]);
}

double ConcaveCost::slope_at(double r) const {
  if (r >= breakpoints_.back()) return final_slope_;
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), std::max(r, 0.0));
  const auto k = static_cast<std::size_t>(it - breakpoints_.begin());
  return (values_[k] - values_[k - 1]) / (breakpoints_[k] - breakpoints_[k - 1]);
}

std::vector<double> ConcaveCost::slopes() const {
  std::vector<double> s;
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    s.push_back((values_[i] - values_[i - 1]) / (breakpoints_[i] - breakpoints_[i - 1]));
  }
  s.push_back(final_slope_);
  return s;
}

double TailMassSequence::tail(std::size_t n) const {
  double s = remainder_mass;
  for (std::size_t i = a.size(); i-- > n;) s += a[i];
  return s;
}

TailMassSequence estimate_tail_masses(std::span<const TransportPlan> plans, const PeriodicDomain& domain,
                                      double bin_width) {
  if (plans.empty()) throw Error(ErrorCode::kInvalidArgument, "need at least one plan");
  if (!(bin_width > 0.0)) throw Error(ErrorCode::kInvalidArgument, "bin width must be positive");
  TailMassSequence seq;
  seq.bin_width = bin_width;
  const double weight = 1.0 / (static_cast<double>(plans.size()) * domain.volume());
  for (const TransportPlan& plan : plans) {
    for (const PlanEntry& e : plan.entries()) {
      const auto bin = static_cast<std::size_t>(std::floor(plan.distance(e) / bin_width));
      if (bin >= seq.a.size()) seq.a.resize(bin + 1, 0.0);
      seq.a[bin] += e.mass * weight;
    }
  }
  if (seq.a.empty()) seq.a.push_back(0.0);
  return seq;
}

DlvpCost build_dlvp_cost(const TailMassSequence& a) {
  const std::size_t n_max = a.truncation();
  double total = a.remainder_mass;
  for (double v : a.a) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "tail masses must be >= 0");
    total += v;
  }
  const double w = a.bin_width;
  DlvpCost out;
  if (!(total > 0.0)) {
    out.cost = ConcaveCost::linear(1.0);
    out.fallback = true;
    return out;
  }

  // tails[N] for N in [0, n_max]
  std::vector<double> tails(n_max + 1, a.remainder_mass);
  for (std::size_t i = n_max; i-- > 0;) tails[i] = tails[i + 1] + a.a[i];

  std::vector<double> bp{0.0};
  std::vector<double> val{0.0};
  long prev = 0;
  long gap = 1;
  std::size_t scan = 1;
  for (int k = 1;; ++k) {
    const double bound = std::ldexp(1.0, -k);
    // Smallest admissible N within the known range; tails are nonincreasing.
    while (scan <= n_max && tails[scan] > bound) ++scan;
    long first_ok = scan <= n_max ? static_cast<long>(scan) : -1;
    if (first_ok < 0) {
      if (!out.thresholds.empty()) break;
      // Not even the first level fits in the stored range; start past it.
      first_ok = static_cast<long>(n_max) + 1;
    }
    const long next = std::max(prev + gap, first_ok);
    gap = next - prev;
    prev = next;
    out.thresholds.push_back(next);
    bp.push_back(static_cast<double>(next) * w);
    val.push_back(static_cast<double>(k));
    if (next > static_cast<long>(n_max)) break;
  }
  const double last_slope = 1.0 / (static_cast<double>(gap) * w);
  out.cost = ConcaveCost(std::move(bp), std::move(val), last_slope);
  return out;
}

bool FinitenessCertificate::finite() const { return std::isfinite(partial_sum) && std::isfinite(tail_bound); }

FinitenessCertificate certify_finiteness(const TailMassSequence& a, const ConcaveCost& theta) {
  FinitenessCertificate cert;
  const double w = a.bin_width;
  for (std::size_t n = 0; n < a.a.size(); ++n) {
    cert.partial_sum += a.a[n] * theta(static_cast<double>(n + 1) * w);
  }
  // For n >= N, concavity gives theta((n+1)w) <= theta(Nw) + theta'(Nw) ((n+1)w - Nw).
  const double big_n = static_cast<double>(a.truncation());
  const double x0 = big_n * w;
  cert.tail_bound = theta(x0) * a.remainder_mass +
                    theta.slope_at(x0) * w * std::max(0.0, a.remainder_moment - big_n * a.remainder_mass);
  return cert;
}

double eval_cost(const ConcaveCost& theta, double r) {
  if (r < 0.0 || std::isnan(r)) throw Error(ErrorCode::kInvalidArgument, "cost argument must be >= 0");
  return theta(r);
}

double mean_cost(const TransportPlan& plan, const ConcaveCost& theta, const PeriodicDomain& domain) {
  double s = 0.0;
  for (const PlanEntry& e : plan.entries()) s += e.mass * theta(plan.distance(e));
  return s / domain.volume();
}

void write_cost(std::ostream& os, const ConcaveCost& theta) {
  for (std::size_t i = 0; i < theta.breakpoints().size(); ++i) {
    os << fmt::format("{:.17g} {:.17g}\n", theta.breakpoints()[i], theta.values()[i]);
  }
  os << fmt::format("final_slope {:.17g}\n", theta.final_slope());
}

ConcaveCost read_cost(std::istream& is) {
  std::vector<double> bp;
  std::vector<double> val;
  double slope = 0.0;
  bool have_slope = false;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (line.rfind("final_slope", 0) == 0) {
      std::string tag;
      if (!(ls >> tag >> slope)) throw Error(ErrorCode::kParse, "bad final_slope line");
      have_slope = true;
      continue;
    }
    double x = 0.0;
    double y = 0.0;
    if (!(ls >> x >> y)) throw Error(ErrorCode::kParse, "bad cost line: " + line);
    bp.push_back(x);
    val.push_back(y);
  }
  if (!have_slope) throw Error(ErrorCode::kParse, "cost file lacks final_slope");
  return ConcaveCost(std::move(bp), std::move(val), slope);
}

}  // namespace rmt
