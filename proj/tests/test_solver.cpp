#include <gtest/gtest.h>

#include <variant>

#include "oracle_values.hpp"
#include "rmt/generators.hpp"
#include "rmt/network_simplex.hpp"
#include "rmt/transport.hpp"
#include "rmt/verification.hpp"
#include "support.hpp"

using namespace rmt;
using rmt::testing::atom2;
using rmt::testing::line;

TEST(NetworkSimplex, SmallTransport) {
  // Two sources, two sinks; crossing is worse than matching straight.
  NetworkSimplex ns(4);
  const int a = ns.add_arc(0, 2, 1.0);
  const int b = ns.add_arc(0, 3, 4.0);
  const int c = ns.add_arc(1, 2, 3.0);
  const int d = ns.add_arc(1, 3, 1.0);
  ns.set_supply(0, 2.0);
  ns.set_supply(1, 1.0);
  ns.set_supply(2, -1.5);
  ns.set_supply(3, -1.5);
  ASSERT_EQ(ns.run(1e-12), NetworkSimplex::Status::kOptimal);
  EXPECT_DOUBLE_EQ(ns.flow(a), 1.5);
  EXPECT_DOUBLE_EQ(ns.flow(b), 0.5);
  EXPECT_DOUBLE_EQ(ns.flow(c), 0.0);
  EXPECT_DOUBLE_EQ(ns.flow(d), 1.0);
  EXPECT_DOUBLE_EQ(ns.total_cost(), 1.5 + 2.0 + 1.0);
  for (int arc = 0; arc < 4; ++arc) EXPECT_GE(ns.reduced_cost(arc), -1e-12L);
}

TEST(NetworkSimplex, Infeasible) {
  NetworkSimplex ns(2);
  ns.add_arc(1, 0, 1.0);
  ns.set_supply(0, 1.0);
  ns.set_supply(1, -1.0);
  EXPECT_EQ(ns.run(1e-12), NetworkSimplex::Status::kInfeasible);
}

TEST(Solver, SingleOption) {
  const DiscreteMeasure mu = line(10.0, 10, {{0.0, 2.0}});
  const DiscreteMeasure nu = line(10.0, 10, {{1.0, 1.0}});
  const ConcaveCost t = oracle::test_cost();
  const TransportPlan p = solve_semicoupling(mu, nu, t);
  ASSERT_EQ(p.entries().size(), 1u);
  EXPECT_EQ(p.entries()[0], (PlanEntry{0, 0, 1.0}));
  EXPECT_DOUBLE_EQ(plan_cost(p, t), t(1.0));
  EXPECT_DOUBLE_EQ(indicator_fraction(p), 1.0);
}

TEST(Solver, DiagonalWhenEqual) {
  const DiscreteMeasure mu = line(1.0, 8, {{0.1, 1.0}, {0.35, 0.5}, {0.8, 2.0}});
  const TransportPlan p = solve_semicoupling(mu, mu, ConcaveCost::power(0.5, 1.0));
  for (const PlanEntry& e : p.entries()) EXPECT_EQ(e.source, e.target);
  EXPECT_EQ(plan_cost(p, ConcaveCost::linear()), 0.0);
  EXPECT_EQ(indicator_fraction(p), 0.0);
}

TEST(Solver, TwoSourcesOneTargetMatchesOracle) {
  const DiscreteMeasure mu = line(10.0, 10, {{0.0, 1.0}, {3.0, 1.0}});
  const DiscreteMeasure nu = line(10.0, 10, {{1.0, 1.0}});
  const ConcaveCost t = oracle::test_cost();
  const TransportPlan p = solve_semicoupling(mu, nu, t);
  EXPECT_NEAR(plan_cost(p, t), oracle::kSemicoupling1d, 1e-12);
  ASSERT_EQ(p.entries().size(), 1u);
  EXPECT_EQ(p.entries()[0].source, 0u);
  const OracleResult o = brute_force_oracle(mu, nu, t);
  EXPECT_NEAR(o.optimal_cost, oracle::kSemicoupling1d, 1e-12);
  EXPECT_EQ(o.optimal_plans.size(), 1u);
}

TEST(Solver, PlanarInstanceMatchesLp) {
  const PeriodicDomain dom(2, 1.0, 20);
  const DiscreteMeasure mu(dom, {atom2(0.1, 0.2, 0.7), atom2(0.8, 0.9, 1.1), atom2(0.45, 0.5, 0.4),
                                 atom2(0.3, 0.75, 0.9)});
  const DiscreteMeasure nu(dom, {atom2(0.95, 0.1, 1.0), atom2(0.5, 0.55, 0.8), atom2(0.2, 0.6, 0.6)});
  const ConcaveCost t = oracle::test_cost();
  const TransportPlan p = solve_semicoupling(mu, nu, t);
  EXPECT_NEAR(plan_cost(p, t), oracle::kSemicoupling2d, 1e-9);
  EXPECT_LE(p.marginal_error(), 1e-12);
  EXPECT_NEAR(brute_force_oracle(mu, nu, t).optimal_cost, oracle::kSemicoupling2d, 1e-9);
}

TEST(Solver, SymmetricTieHasTwoVerticesAndDeterministicChoice) {
  const DiscreteMeasure mu = line(10.0, 10, {{-1.0, 1.0}, {1.0, 1.0}});
  const DiscreteMeasure nu = line(10.0, 10, {{0.0, 1.0}});
  const ConcaveCost t = ConcaveCost::power(0.5, 5.0);
  const OracleResult o = brute_force_oracle(mu, nu, t);
  EXPECT_EQ(o.optimal_plans.size(), 2u);
  EXPECT_DOUBLE_EQ(o.optimal_cost, t(1.0));
  const TransportPlan p1 = solve_semicoupling(mu, nu, t);
  const TransportPlan p2 = solve_semicoupling(mu, nu, t);
  EXPECT_EQ(p1.entries(), p2.entries());
  EXPECT_NEAR(plan_cost(p1, t), t(1.0), 1e-12);
}

TEST(Solver, Errors) {
  const DiscreteMeasure small = line(1.0, 4, {{0.1, 1.0}});
  const DiscreteMeasure big = line(1.0, 4, {{0.6, 2.0}});
  EXPECT_THROW(solve_semicoupling(small, big, ConcaveCost::linear()), Error);
  EXPECT_THROW(solve_semicoupling(small, line(2.0, 4, {{0.1, 1.0}}), ConcaveCost::linear()), Error);
  SolverOptions bad;
  bad.tolerance = 0.0;
  EXPECT_THROW(solve_semicoupling(big, small, ConcaveCost::linear(), bad), Error);
  try {
    solve_semicoupling(small, big, ConcaveCost::linear());
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasible);
  }
}

TEST(Oracle, RefusesLargeInstances) {
  std::vector<Atom> atoms;
  for (int i = 0; i < 5; ++i) {
    Atom a;
    a.location[0] = 0.1 * i;
    a.mass = 1.0;
    atoms.push_back(a);
  }
  const DiscreteMeasure mu(PeriodicDomain(1, 1.0, 10), atoms);
  try {
    brute_force_oracle(mu, mu, ConcaveCost::linear());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooLarge);
  }
}

TEST(Oracle, TrivialUnique) {
  const DiscreteMeasure mu = line(1.0, 4, {{0.0, 1.0}});
  const OracleResult o = brute_force_oracle(mu, mu, ConcaveCost::linear());
  EXPECT_EQ(o.optimal_cost, 0.0);
  EXPECT_EQ(o.optimal_plans.size(), 1u);
}

TEST(Solver, EmptyTarget) {
  const DiscreteMeasure mu = line(1.0, 4, {{0.1, 1.0}});
  const TransportPlan p = solve_semicoupling(mu, DiscreteMeasure(mu.domain()), ConcaveCost::linear());
  EXPECT_TRUE(p.empty());
  EXPECT_EQ(indicator_fraction(p), 0.0);
}

TEST(Solver, PrunedModeMatchesDense) {
  const PeriodicDomain dom(2, 1.0, 16);
  GeneratorSpec s;
  s.kind = GeneratorKind::kSmoothedDensity;
  s.point_intensity = 10.0;
  s.seed = 4;
  const DiscreteMeasure mu = generate(s, dom);
  s.kind = GeneratorKind::kSegmentSingular;
  s.seed = 5;
  const DiscreteMeasure nu = generate(s, dom);
  const ConcaveCost t = ConcaveCost::power(0.5, 1.0);
  SolverOptions pruned;
  pruned.dense_limit = 16;
  const TransportPlan a = solve_semicoupling(mu, nu, t);
  const TransportPlan b = solve_semicoupling(mu, nu, t, pruned);
  EXPECT_NEAR(plan_cost(a, t), plan_cost(b, t), 1e-9 * std::max(1.0, plan_cost(a, t)));
  EXPECT_LE(b.marginal_error(), 1e-9);
}

TEST(IndicatorFraction, Cases) {
  auto mu = std::make_shared<const DiscreteMeasure>(line(1.0, 4, {{0.1, 1.0}, {0.6, 3.0}}));
  auto nu = std::make_shared<const DiscreteMeasure>(line(1.0, 4, {{0.3, 1.0}, {0.8, 1.5}}));
  EXPECT_DOUBLE_EQ(indicator_fraction(TransportPlan(mu, nu, {{0, 0, 1.0}, {1, 1, 1.5}})), 0.75);
  auto nu_full = std::make_shared<const DiscreteMeasure>(line(1.0, 4, {{0.3, 1.0}, {0.8, 3.0}}));
  EXPECT_EQ(indicator_fraction(TransportPlan(mu, nu_full, {{0, 0, 1.0}, {1, 1, 3.0}})), 0.0);
}

TEST(ExtractMap, Cases) {
  auto mu = std::make_shared<const DiscreteMeasure>(line(1.0, 4, {{0.0, 2.0}}));
  auto nu = std::make_shared<const DiscreteMeasure>(line(1.0, 4, {{0.25, 1.0}}));
  const auto single = extract_map(TransportPlan(mu, nu, {{0, 0, 1.0}}));
  ASSERT_TRUE(std::holds_alternative<AllocationMap>(single));
  const AllocationMap& m = std::get<AllocationMap>(single);
  EXPECT_DOUBLE_EQ(m.assignments()[0].fraction, 0.5);
  EXPECT_DOUBLE_EQ(m.assignments()[0].target[0], 0.25);

  const auto diag = extract_map(TransportPlan(mu, mu, {{0, 0, 2.0}}));
  ASSERT_TRUE(std::holds_alternative<AllocationMap>(diag));
  EXPECT_EQ(std::get<AllocationMap>(diag), AllocationMap::identity(*mu));

  auto two = std::make_shared<const DiscreteMeasure>(line(1.0, 4, {{0.25, 1.0}, {0.5, 1.0}}));
  const auto split = extract_map(TransportPlan(mu, two, {{0, 0, 1.0}, {0, 1, 1.0}}));
  ASSERT_TRUE(std::holds_alternative<SplitReport>(split));
  EXPECT_EQ(std::get<SplitReport>(split).count(), 1u);
  EXPECT_DOUBLE_EQ(std::get<SplitReport>(split).split_mass, 1.0);
}

TEST(Plan, RejectsBadEntries) {
  auto mu = std::make_shared<const DiscreteMeasure>(line(1.0, 4, {{0.0, 1.0}}));
  EXPECT_THROW(TransportPlan(mu, mu, {{0, 3, 1.0}}), Error);
  EXPECT_THROW(TransportPlan(mu, mu, {{0, 0, -1.0}}), Error);
}

TEST(TieBreak, DisplacementWeightIsPeriodic) {
  const PeriodicDomain dom(1, 1.0, 8);
  Point a;
  a[0] = -0.5;
  Point b;
  b[0] = 0.5;
  EXPECT_EQ(displacement_weight(dom, a), displacement_weight(dom, b));
  b[0] = 0.25;
  EXPECT_NE(displacement_weight(dom, a), displacement_weight(dom, b));
  EXPECT_GE(displacement_weight(dom, b), 0.0);
  EXPECT_LT(displacement_weight(dom, b), 1.0);
}
