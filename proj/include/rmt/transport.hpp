#pragma once

#include <cstddef>
#include <memory>
#include <variant>
#include <vector>

#include "rmt/allocation_map.hpp"
#include "rmt/cost.hpp"
#include "rmt/plan.hpp"

namespace rmt {

enum class TieBreak {
  /// First optimal basis found by the simplex.
  kNone,
  /// Among optimal plans, minimize a fixed pseudo-random weight of each
  /// displacement. Depends on relative geometry only.
  kDisplacement,
};

struct SolverOptions {
  double tolerance = 1e-9;
  TieBreak tie_break = TieBreak::kDisplacement;
  /// Maximum total atom count accepted by the brute-force oracle.
  std::size_t oracle_limit = 8;
  /// Above this many atoms on a side the solver prices a pruned arc set and
  /// audits reduced costs over all pairs.
  std::size_t dense_limit = 2000;
  std::size_t candidate_neighbors = 12;
};

/// Minimizes sum mass * theta(dist) over plans with first marginal <= mu and
/// second marginal = nu. Surplus source mass drains into a zero-cost sink.
TransportPlan solve_semicoupling(std::shared_ptr<const DiscreteMeasure> mu, std::shared_ptr<const DiscreteMeasure> nu,
                                 const ConcaveCost& theta, const SolverOptions& opts = {});
TransportPlan solve_semicoupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const ConcaveCost& theta,
                                 const SolverOptions& opts = {});

/// sum over entries of mass * theta(distance) (not normalized by volume).
double plan_cost(const TransportPlan& plan, const ConcaveCost& theta);

struct OracleResult {
  double optimal_cost = 0.0;
  /// Every distinct optimal vertex of the transportation polytope.
  std::vector<TransportPlan> optimal_plans;
  std::size_t bases_visited = 0;
};

/// Enumerates all spanning-tree bases of the sink-augmented transportation
/// problem. Exponential; refuses instances above `opts.oracle_limit` atoms.
OracleResult brute_force_oracle(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const ConcaveCost& theta,
                                const SolverOptions& opts = {});

/// Share of source mass sitting on partially used atoms.
double indicator_fraction(const TransportPlan& plan);

SplitReport split_report(const TransportPlan& plan);

/// A single-valued AllocationMap with f_i = used_i / mu_i, or the list of
/// split sources when some source feeds several targets.
std::variant<AllocationMap, SplitReport> extract_map(const TransportPlan& plan);

/// Weight used by the displacement tie-break, in [0, 1).
double displacement_weight(const PeriodicDomain& domain, const Point& displacement);

}  // namespace rmt
