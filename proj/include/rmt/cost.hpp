#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "rmt/plan.hpp"

namespace rmt {

/// Piecewise-linear, strictly increasing, concave cost on [0, inf) with
/// theta(0) = 0, extended linearly with `final_slope` past the last breakpoint.
class ConcaveCost {
 public:
  /// Validates the shape constraints; throws kInvalidArgument on violation.
  ConcaveCost(std::vector<double> breakpoints, std::vector<double> values, double final_slope);

  /// theta(r) = slope * r.
  static ConcaveCost linear(double slope = 1.0);
  /// Chord interpolant of r^p (0 < p <= 1) on a geometric grid reaching `r_max`.
  static ConcaveCost power(double p, double r_max, int segments = 48);

  double operator()(double r) const;
  /// Right derivative at r.
  double slope_at(double r) const;

  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double final_slope() const noexcept { return final_slope_; }
  /// Segment slopes followed by the final slope.
  std::vector<double> slopes() const;

  friend bool operator==(const ConcaveCost&, const ConcaveCost&) = default;

 private:
  std::vector<double> breakpoints_;
  std::vector<double> values_;
  double final_slope_ = 1.0;
};

/// a_n: mass per unit volume moved over distances in [n w, (n+1) w).
///
/// Entries past the stored range are summarized by their total mass and
/// by their first moment sum_{n >= N} (n + 1) a_n (both zero for
/// empirical sequences, whose support is bounded on the torus).
struct TailMassSequence {
  std::vector<double> a;
  double bin_width = 1.0;
  double remainder_mass = 0.0;
  double remainder_moment = 0.0;

  std::size_t truncation() const noexcept { return a.size(); }
  /// sum_{n >= N} a_n, including the remainder.
  double tail(std::size_t n) const;
};

TailMassSequence estimate_tail_masses(std::span<const TransportPlan> plans, const PeriodicDomain& domain,
                                      double bin_width);

struct DlvpCost {
  ConcaveCost cost = ConcaveCost::linear();
  /// Integer thresholds N_1 < N_2 < ... (in bins); theta(N_k w) = k.
  std::vector<long> thresholds;
  /// Set when the input carried no mass and theta(x) = x was returned.
  bool fallback = false;
};

/// Threshold construction of a de la Vallee Poussin cost: thresholds with
/// tail(N_k) <= 2^-k and nondecreasing gaps, theta(N_k) = k, linear in between.
DlvpCost build_dlvp_cost(const TailMassSequence& a);

struct FinitenessCertificate {
  double partial_sum = 0.0;  // sum_{n < N} a_n theta((n + 1) w)
  double tail_bound = 0.0;   // upper bound for the rest, from concavity
  double total_bound() const { return partial_sum + tail_bound; }
  bool finite() const;
};

FinitenessCertificate certify_finiteness(const TailMassSequence& a, const ConcaveCost& theta);

/// Piecewise-linear evaluation; rejects negative r.
double eval_cost(const ConcaveCost& theta, double r);

/// sum over plan entries of mass * theta(distance), per unit volume.
double mean_cost(const TransportPlan& plan, const ConcaveCost& theta, const PeriodicDomain& domain);

void write_cost(std::ostream& os, const ConcaveCost& theta);
ConcaveCost read_cost(std::istream& is);

}  // namespace rmt
