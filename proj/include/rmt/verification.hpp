#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rmt/allocation.hpp"
#include "rmt/generators.hpp"

namespace rmt {

struct CheckReport {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string details;
};

/// sum_i f_i xi_i delta_{T(x_i)}; `xi` must be the map's source.
DiscreteMeasure pushforward(const DiscreteMeasure& xi, const AllocationMap& T);

struct DistanceResult {
  double value = 0.0;
  /// Masses differed by more than 1e-9 and nu was rescaled to mu's total.
  bool rescaled = false;
};

/// Exact optimal transport cost between mu and nu with ground cost
/// theta(dist). Only the Jordan parts of mu - nu are moved, which is exact for
/// metric ground costs. Throws when the totals differ by more than 1%.
DistanceResult transport_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const ConcaveCost& theta);
DistanceResult transport_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

CheckReport check_balance(const DiscreteMeasure& xi, const DiscreteMeasure& eta, const AllocationMap& T,
                          double budget);

using Pipeline = std::function<AllocationMap(const DiscreteMeasure&, const DiscreteMeasure&)>;

/// Compares the (displacement, mass) multiset and the theta-cost of
/// pipeline(xi, eta) with those of pipeline(shift xi, shift eta) for random
/// shifts. Shifts are grid-aligned when both inputs are cell-aligned.
CheckReport check_shift_covariance(const Pipeline& pipeline, const DiscreteMeasure& xi, const DiscreteMeasure& eta,
                                   const ConcaveCost& theta, int num_shifts, std::uint64_t seed,
                                   double tolerance = 1e-9);

/// Statistic of a measure seen from `origin`.
using PalmStatistic = std::function<double(const DiscreteMeasure& eta, const Point& origin)>;

/// Mass of eta within distance r of the origin.
PalmStatistic window_mass(double radius);

struct PalmEstimate {
  double allocation = 0.0;
  double allocation_se = 0.0;
  double mass_biased = 0.0;
  double mass_biased_se = 0.0;
  int realizations = 0;
};

/// xi = Lebesgue with eta's mass, T = allocate(xi, eta). Compares the
/// statistic seen from T(cell of the origin), weighted by eta's mass, with the
/// mass-biased average over all atoms of eta.
CheckReport palm_shift_coupling_test(const GeneratorSpec& eta_spec, const PeriodicDomain& domain,
                                     int num_realizations, const PalmStatistic& statistic, std::uint64_t seed,
                                     const ConcaveCost& theta, PalmEstimate* estimate = nullptr,
                                     double se_band = 4.0);

struct SmallSetsDiagnostic {
  double exponent = 0.0;
  bool flagged = false;
  bool sufficient = false;
  CheckReport report;
};

/// Box-counting dimension of the support at the given box sides. Flags
/// exponents <= d - 1 + 0.2. Advisory only.
SmallSetsDiagnostic small_sets_diagnostic(const DiscreteMeasure& mu, const std::vector<double>& scales);

/// Pairwise swap test theta(d11) + theta(d22) <= theta(d12) + theta(d21) + tol
/// over plan entries; exhaustive up to `exhaustive_limit` entries, otherwise
/// `samples` random pairs.
CheckReport check_cyclical_monotonicity(const TransportPlan& plan, const ConcaveCost& theta, double tolerance = 1e-9,
                                        std::size_t exhaustive_limit = 1000, std::size_t samples = 10000,
                                        std::uint64_t seed = 0);

/// I nondecreasing and J nonincreasing over all realized G-values, and the
/// split residual within `max_atom_mass / L^d`.
CheckReport check_threshold(const DisplacementField& field, const ThresholdSplit& split, double max_atom_mass,
                            const DisplacementEncoder& G = {});

/// Stage masses add up to each xi atom (relative tolerance).
CheckReport check_partition(const DiscreteMeasure& xi, const std::vector<std::array<double, 3>>& stage_mass,
                            double tolerance = 1e-12);

/// Concavity (second differences on the bin grid), strict monotonicity,
/// theta(0) = 0, divergence, and the finiteness sum against a direct partial
/// sum plus the tail bound.
std::vector<CheckReport> certify_dlvp(const TailMassSequence& a, const ConcaveCost& theta);

/// Largest xi-mass sharing a single nonzero displacement.
double max_shared_displacement_mass(const AllocationMap& map);

void write_checks(std::ostream& os, const std::vector<CheckReport>& checks);
std::vector<CheckReport> read_checks(std::istream& is);

}  // namespace rmt
