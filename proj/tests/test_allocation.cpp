#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracle_values.hpp"
#include "rmt/allocation.hpp"
#include "rmt/verification.hpp"
#include "support.hpp"

using namespace rmt;
using rmt::testing::line;
using rmt::testing::pt;

namespace {

DiscreteMeasure density_1d(int n, double side, double (*f)(double)) {
  const PeriodicDomain dom(1, side, n);
  std::vector<Atom> atoms;
  for (int i = 0; i < n; ++i) {
    Atom a;
    a.location = dom.cell_center(static_cast<std::size_t>(i));
    a.mass = f(a.location[0] / side) * dom.pitch();
    atoms.push_back(a);
  }
  return DiscreteMeasure(dom, atoms);
}

double plus_sin(double u) { return 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * u); }
double minus_sin(double u) { return 1.0 - 0.5 * std::sin(2.0 * std::numbers::pi * u); }
double left_half(double u) { return u < 0.5 ? 1.0 : 0.0; }
double right_half(double u) { return u < 0.5 ? 0.0 : 1.0; }

double balance_error(const DiscreteMeasure& xi, const DiscreteMeasure& eta, const AllocationMap& map) {
  return transport_distance(pushforward(xi, map), eta).value;
}

}  // namespace

TEST(Branch, Names) {
  for (Branch b : {Branch::kAuto, Branch::kMutuallySingular, Branch::kNoSmallSets, Branch::kGeneral}) {
    EXPECT_EQ(parse_branch(to_string(b)), b);
  }
  EXPECT_THROW(parse_branch("sideways"), Error);
}

TEST(Branch, Selection) {
  const DiscreteMeasure a = line(1.0, 4, {{0.125, 1.0}, {0.375, 1.0}});
  EXPECT_EQ(select_branch(a, line(1.0, 4, {{0.625, 2.0}})), Branch::kMutuallySingular);
  EXPECT_EQ(select_branch(a, line(1.0, 4, {{0.125, 2.0}})), Branch::kNoSmallSets);
  EXPECT_EQ(select_branch(a, line(1.0, 4, {{0.125, 1.0}, {0.875, 1.0}})), Branch::kGeneral);
}

TEST(MutuallySingular, SingleAtoms) {
  const AllocationMap m =
      allocate_mutually_singular(line(2.0, 4, {{0.0, 1.0}}), line(2.0, 4, {{1.0, 1.0}}), ConcaveCost::linear());
  ASSERT_EQ(m.assignments().size(), 1u);
  EXPECT_DOUBLE_EQ(m.assignments()[0].target[0], 1.0);
  EXPECT_DOUBLE_EQ(m.assignments()[0].fraction, 1.0);
  const AllocationMap any =
      allocate_mutually_singular(line(2.0, 4, {{0.3, 2.0}}), line(2.0, 4, {{1.7, 2.0}}), ConcaveCost::linear());
  EXPECT_DOUBLE_EQ(any.assignments()[0].target[0], 1.7);
}

TEST(MutuallySingular, HalvesMatchOracle) {
  const DiscreteMeasure xi = density_1d(8, 2.0, left_half);
  const DiscreteMeasure eta = density_1d(8, 2.0, right_half);
  const ConcaveCost t = oracle::test_cost();
  const AllocationMap m = allocate_mutually_singular(xi, eta, t);
  // allocation_cost is per unit volume, the LP value is a total.
  EXPECT_NEAR(allocation_cost(m, t) * 2.0, oracle::kHalvesTestCost, 1e-9);
  EXPECT_NEAR(allocation_cost(m, ConcaveCost::linear()) * 2.0, oracle::kHalvesLinear, 1e-9);
  EXPECT_EQ(balance_error(xi, eta, m), 0.0);
}

TEST(MutuallySingular, Errors) {
  const DiscreteMeasure xi = line(1.0, 4, {{0.1, 1.0}});
  try {
    allocate_mutually_singular(xi, line(1.0, 4, {{0.1, 1.0}}), ConcaveCost::linear());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotMutuallySingular);
  }
  try {
    allocate_mutually_singular(xi, line(1.0, 4, {{0.6, 1.5}}), ConcaveCost::linear());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIntensityMismatch);
  }
}

TEST(Invert, Cases) {
  const DiscreteMeasure xi = line(2.0, 4, {{0.0, 1.0}, {1.0, 1.0}});
  EXPECT_EQ(invert_allocation(AllocationMap::identity(xi), xi), AllocationMap::identity(xi));

  const DiscreteMeasure a = line(2.0, 4, {{0.0, 1.0}});
  const DiscreteMeasure b = line(2.0, 4, {{1.0, 1.0}});
  const AllocationMap inv = invert_allocation(AllocationMap(a, {{0, pt(1.0), 1.0}}), b);
  ASSERT_EQ(inv.assignments().size(), 1u);
  EXPECT_DOUBLE_EQ(inv.assignments()[0].target[0], 0.0);

  const AllocationMap swap(xi, {{0, pt(1.0), 1.0}, {1, pt(0.0), 1.0}});
  EXPECT_EQ(invert_allocation(swap, xi), swap);
}

TEST(Invert, RejectsMergesAndSplits) {
  const DiscreteMeasure xi = line(2.0, 4, {{0.0, 1.0}, {1.0, 1.0}});
  const DiscreteMeasure target = line(2.0, 4, {{0.5, 2.0}});
  try {
    invert_allocation(AllocationMap(xi, {{0, pt(0.5), 1.0}, {1, pt(0.5), 1.0}}), target);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotInvertible);
  }
  const DiscreteMeasure two = line(2.0, 4, {{0.5, 0.5}, {1.5, 0.5}});
  EXPECT_THROW(invert_allocation(AllocationMap(line(2.0, 4, {{0.0, 1.0}}), {{0, pt(0.5), 0.5}, {0, pt(1.5), 0.5}}),
                                 two),
               Error);
  EXPECT_THROW(invert_allocation(AllocationMap(xi, {{0, pt(0.5), 0.5}}), target), Error);
}

TEST(CombinedF, Cases) {
  const DiscreteMeasure xi = line(2.0, 4, {{0.0, 1.0}, {0.5, 1.0}});
  const DisplacementField same = combined_F(xi, xi, AllocationMap());
  EXPECT_EQ(same.moved_xi_mass(), 0.0);
  EXPECT_EQ(same(pt(0.5)), pt(0.5));

  // a -> b moved, common atom at 0.5 fixed.
  const DiscreteMeasure eta = line(2.0, 4, {{1.0, 1.0}, {0.5, 1.0}});
  const SignedDecomposition j = jordan_decompose(xi, eta);
  const AllocationMap t(j.positive_part, {{0, pt(1.0), 1.0}});
  const DisplacementField f = combined_F(xi, eta, t);
  EXPECT_DOUBLE_EQ(f(pt(0.0))[0], 1.0);
  EXPECT_DOUBLE_EQ(f(pt(1.0))[0], 0.0);
  EXPECT_EQ(f(pt(0.5)), pt(0.5));
  EXPECT_EQ(f(pt(1.5)), pt(1.5));
  EXPECT_DOUBLE_EQ(f.moved_xi_mass(), 1.0);
  EXPECT_DOUBLE_EQ(f.moved_eta_mass(), 1.0);
}

TEST(Encoder, ZeroInjectiveAndBounded) {
  const PeriodicDomain dom(2, 1.0, 16);
  EXPECT_EQ(interleave_encode(dom, Point{}), 0.0);
  std::vector<double> seen;
  for (int i = -8; i <= 7; ++i) {
    for (int k = -8; k <= 7; ++k) seen.push_back(interleave_encode(dom, pt(i / 16.0, k / 16.0)));
  }
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end());
  for (double v : seen) EXPECT_LE(std::abs(v), 1.0);
  EXPECT_THROW(interleave_encode(dom, pt(1.5, 0.0)), Error);
  // Half-period aliases encode equally.
  EXPECT_EQ(interleave_encode(dom, pt(-0.5, 0.25)), interleave_encode(dom, pt(0.5, 0.25)));
}

TEST(Profiles, LimitsAndJumps) {
  const DiscreteMeasure xi = line(2.0, 4, {{0.0, 1.0}});
  const DiscreteMeasure eta = line(2.0, 4, {{1.0, 1.0}});
  const AllocationMap t(xi, {{0, pt(1.0), 1.0}});
  const DisplacementField f = combined_F(xi, eta, t);
  const DisplacementEncoder G;
  const double g = G(f.domain(), pt(1.0));
  EXPECT_EQ(profile_I(f, G, -2.0), 0.0);
  EXPECT_DOUBLE_EQ(profile_I(f, G, 2.0), 0.5);
  EXPECT_DOUBLE_EQ(profile_I(f, G, g), 0.5);
  EXPECT_EQ(profile_I(f, G, std::nextafter(g, -2.0)), 0.0);
  EXPECT_EQ(profile_J(f, G, 2.0), 0.0);

  const DisplacementField none = combined_F(xi, xi, AllocationMap());
  EXPECT_EQ(profile_I(none, G, 0.3), 0.0);
  EXPECT_EQ(profile_J(none, G, -0.3), 0.0);
}

TEST(Threshold, TrivialWhenNothingMoves) {
  const DiscreteMeasure xi = line(1.0, 4, {{0.125, 1.0}});
  const ThresholdSplit s = find_threshold(combined_F(xi, xi, AllocationMap()), DisplacementEncoder());
  EXPECT_TRUE(s.trivial);
  EXPECT_EQ(s.residual_imbalance, 0.0);
}

TEST(Threshold, SingleMovedAtom) {
  const DiscreteMeasure xi = line(2.0, 4, {{0.0, 1.0}});
  const DiscreteMeasure eta = line(2.0, 4, {{1.0, 1.0}});
  const DisplacementField f = combined_F(xi, eta, AllocationMap(xi, {{0, pt(1.0), 1.0}}));
  const ThresholdSplit s = find_threshold(f, DisplacementEncoder());
  EXPECT_FALSE(s.trivial);
  EXPECT_LE(s.residual_imbalance, 1.0 / 2.0);
}

TEST(Threshold, SymmetricPairBalancesExactly) {
  // a -> b and c -> d with opposite displacements; equality at a realized value.
  const DiscreteMeasure xi = line(4.0, 8, {{0.25, 1.0}, {2.75, 1.0}});
  const DiscreteMeasure eta = line(4.0, 8, {{0.75, 1.0}, {2.25, 1.0}});
  const DisplacementField f =
      combined_F(xi, eta, AllocationMap(xi, {{0, pt(0.75), 1.0}, {1, pt(2.25), 1.0}}));
  const ThresholdSplit s = find_threshold(f, DisplacementEncoder());
  EXPECT_EQ(s.residual_imbalance, 0.0);
  const CheckReport r = check_threshold(f, s, 1.0);
  EXPECT_TRUE(r.passed) << r.details;
}

TEST(NoSmallSets, IdentityWhenEqual) {
  const DiscreteMeasure xi = density_1d(16, 1.0, plus_sin);
  const AllocationResult r = allocate_no_small_sets(xi, xi, ConcaveCost::linear());
  EXPECT_EQ(r.map, AllocationMap::identity(xi));
  EXPECT_TRUE(check_partition(xi, r.stage_mass).passed);
}

TEST(NoSmallSets, AgreesWithMutuallySingularOnDisjointInputs) {
  const DiscreteMeasure xi = density_1d(16, 2.0, left_half);
  const DiscreteMeasure eta = density_1d(16, 2.0, right_half);
  const ConcaveCost t = ConcaveCost::power(0.5, 1.0);
  const double a = allocation_cost(allocate_no_small_sets(xi, eta, t).map, t);
  const double b = allocation_cost(allocate_mutually_singular(xi, eta, t), t);
  EXPECT_NEAR(a, b, 1e-6 * xi.total_mass());
}

TEST(NoSmallSets, SinDensitiesBalance) {
  const DiscreteMeasure xi = density_1d(64, 1.0, plus_sin);
  const DiscreteMeasure eta = density_1d(64, 1.0, minus_sin);
  const ConcaveCost t = ConcaveCost::power(0.5, 0.5);
  const AllocationResult r = allocate_no_small_sets(xi, eta, t);
  const double budget = 2.0 * std::max(xi.max_mass(), eta.max_mass());
  EXPECT_LE(balance_error(xi, eta, r.map), budget);
  EXPECT_TRUE(check_partition(xi, r.stage_mass).passed);
  EXPECT_TRUE(check_threshold(r.field, r.threshold, std::max(xi.max_mass(), eta.max_mass())).passed);
}

TEST(NoSmallSets, CustomEncoderIsUsed) {
  const DiscreteMeasure xi = density_1d(32, 1.0, plus_sin);
  const DiscreteMeasure eta = density_1d(32, 1.0, minus_sin);
  int calls = 0;
  const DisplacementEncoder G([&calls](const PeriodicDomain& d, const Point& v) {
    ++calls;
    return interleave_encode(d, v);
  });
  allocate_no_small_sets(xi, eta, ConcaveCost::linear(), {}, G);
  EXPECT_GT(calls, 0);
}

TEST(General, CollapsesToNoSmallSets) {
  const DiscreteMeasure xi = density_1d(32, 1.0, plus_sin);
  const DiscreteMeasure eta = density_1d(32, 1.0, minus_sin);
  const ConcaveCost t = ConcaveCost::power(0.5, 0.5);
  const AllocationResult g = allocate_general(xi, eta, t);
  const AllocationResult n = allocate_no_small_sets(xi, eta, t);
  EXPECT_NEAR(allocation_cost(g.map, t), allocation_cost(n.map, t), 1e-12);
}

TEST(General, CollapsesToMutuallySingular) {
  const DiscreteMeasure xi = density_1d(16, 2.0, left_half);
  const DiscreteMeasure eta = density_1d(16, 2.0, right_half);
  const ConcaveCost t = ConcaveCost::power(0.5, 1.0);
  EXPECT_NEAR(allocation_cost(allocate_general(xi, eta, t).map, t),
              allocation_cost(allocate_mutually_singular(xi, eta, t), t), 1e-12);
}

TEST(General, UniformAgainstHalfAtoms) {
  const PeriodicDomain dom(1, 1.0, 32);
  const DiscreteMeasure xi = density_1d(32, 1.0, [](double) { return 1.0; });
  std::vector<Atom> atoms;
  for (const Atom& a : xi.atoms()) atoms.push_back({a.location, 0.5 * a.mass});
  for (double x : {0.1, 0.37, 0.61, 0.9}) atoms.push_back({pt(x), 0.125});
  const DiscreteMeasure eta(dom, atoms);
  const AllocationResult r = allocate_general(xi, eta, ConcaveCost::power(0.5, 0.5));
  EXPECT_EQ(r.branch, Branch::kGeneral);
  EXPECT_LE(balance_error(xi, eta, r.map), 2.0 * std::max(xi.max_mass(), eta.max_mass()));
  EXPECT_TRUE(check_partition(xi, r.stage_mass).passed);
}

TEST(Allocate, AutoPicksBranch) {
  const DiscreteMeasure xi = density_1d(16, 2.0, left_half);
  const DiscreteMeasure eta = density_1d(16, 2.0, right_half);
  EXPECT_EQ(allocate(xi, eta, ConcaveCost::linear(), Branch::kAuto).branch, Branch::kMutuallySingular);
}

TEST(AllocationCost, PerUnitVolume) {
  const DiscreteMeasure xi = line(2.0, 4, {{0.0, 1.0}});
  EXPECT_DOUBLE_EQ(allocation_cost(AllocationMap(xi, {{0, pt(0.5), 1.0}}), ConcaveCost::linear()), 0.25);
}

TEST(Report, RoundTrip) {
  PipelineReport r;
  r.branch = "general";
  r.cost = 0.123456789012345;
  r.balance_error = 1e-17;
  r.split_sources = 3;
  r.stage_mass = {0.25, 0.5, 1.0 / 3.0};
  std::stringstream ss;
  write_report(ss, r);
  const PipelineReport back = read_report(ss);
  EXPECT_EQ(back.branch, r.branch);
  EXPECT_EQ(back.cost, r.cost);
  EXPECT_EQ(back.balance_error, r.balance_error);
  EXPECT_EQ(back.split_sources, r.split_sources);
  EXPECT_EQ(back.stage_mass, r.stage_mass);
  std::stringstream bad("cost = banana\n");
  EXPECT_THROW(read_report(bad), Error);
}

TEST(AllocationIo, RoundTrip) {
  auto xi = std::make_shared<const DiscreteMeasure>(line(1.0, 4, {{0.125, 1.0}, {0.625, 1.0}}));
  const AllocationMap m(xi, {{0, pt(0.375), 0.5}, {0, pt(0.875), 0.5}, {1, pt(0.125), 1.0}});
  std::stringstream ss;
  write_allocation(ss, m);
  EXPECT_EQ(read_allocation(ss, xi), m);
  std::stringstream bad("7 0.5 1\n");
  EXPECT_THROW(read_allocation(bad, xi), Error);
}
