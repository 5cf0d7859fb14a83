#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rmt/measure.hpp"
#include "support.hpp"

using namespace rmt;
using rmt::testing::line;
using rmt::testing::pt;

TEST(Domain, DisplacementIsMinimalImage) {
  PeriodicDomain d(1, 1.0, 4);
  EXPECT_DOUBLE_EQ(d.displacement(pt(0.9), pt(0.1))[0], 0.2);
  EXPECT_DOUBLE_EQ(d.displacement(pt(0.1), pt(0.9))[0], -0.2);
  // Exactly half the side lands on -L/2.
  EXPECT_DOUBLE_EQ(d.displacement(pt(0.0), pt(0.5))[0], -0.5);
  EXPECT_NEAR(d.distance(pt(0.05), pt(0.95)), 0.1, 1e-15);
}

TEST(Domain, CellsAndWrap) {
  PeriodicDomain d(2, 2.0, 4);
  EXPECT_EQ(d.cell_count(), 16u);
  EXPECT_DOUBLE_EQ(d.volume(), 4.0);
  const Point c = d.cell_center(5);
  EXPECT_EQ(d.cell_of(c), 5u);
  EXPECT_TRUE(d.is_cell_center(c));
  EXPECT_FALSE(d.is_cell_center(pt(0.1, 0.1)));
  EXPECT_DOUBLE_EQ(d.wrap(pt(-0.5, 2.5))[0], 1.5);
  EXPECT_DOUBLE_EQ(d.wrap(pt(-0.5, 2.5))[1], 0.5);
}

TEST(Domain, RejectsBadParameters) {
  EXPECT_THROW(PeriodicDomain(0, 1.0, 4), Error);
  EXPECT_THROW(PeriodicDomain(4, 1.0, 4), Error);
  EXPECT_THROW(PeriodicDomain(1, -1.0, 4), Error);
  EXPECT_THROW(PeriodicDomain(1, 1.0, 0), Error);
}

TEST(Measure, Intensity) {
  EXPECT_DOUBLE_EQ(intensity(DiscreteMeasure(PeriodicDomain(1, 1.0, 4))), 0.0);
  Atom a;
  a.mass = 8.0;
  EXPECT_DOUBLE_EQ(intensity(DiscreteMeasure(PeriodicDomain(3, 2.0, 4), {a})), 1.0);
  EXPECT_DOUBLE_EQ(intensity(line(2.0, 4, {{0.1, 1.5}, {0.7, 2.5}})), 2.0);
}

TEST(Measure, MergesSortsAndDropsZeros) {
  const DiscreteMeasure mu = line(1.0, 4, {{0.5, 1.0}, {0.25, 2.0}, {0.5 + 1e-12, 0.5}, {0.75, 0.0}});
  ASSERT_EQ(mu.size(), 2u);
  EXPECT_DOUBLE_EQ(mu[0].location[0], 0.25);
  EXPECT_DOUBLE_EQ(mu[1].mass, 1.5);
  EXPECT_DOUBLE_EQ(mu.total_mass(), 3.5);
  EXPECT_DOUBLE_EQ(mu.mass_at(pt(0.5)), 1.5);
  EXPECT_DOUBLE_EQ(mu.mass_at(pt(0.75)), 0.0);
}

TEST(Measure, WrapsLocationsIntoDomain) {
  const DiscreteMeasure mu = line(1.0, 4, {{1.25, 1.0}, {-0.25, 1.0}});
  EXPECT_DOUBLE_EQ(mu[0].location[0], 0.25);
  EXPECT_DOUBLE_EQ(mu[1].location[0], 0.75);
}

TEST(Measure, RejectsNegativeOrNonFiniteMass) {
  EXPECT_THROW(line(1.0, 4, {{0.1, -1.0}}), Error);
  EXPECT_THROW(line(1.0, 4, {{0.1, std::nan("")}}), Error);
}

TEST(Measure, CellAligned) {
  EXPECT_TRUE(line(1.0, 4, {{0.125, 1.0}, {0.625, 1.0}}).cell_aligned());
  EXPECT_FALSE(line(1.0, 4, {{0.1, 1.0}}).cell_aligned());
}

TEST(Jordan, IdenticalMeasures) {
  const DiscreteMeasure xi = line(1.0, 4, {{0.1, 1.0}, {0.4, 2.0}});
  const SignedDecomposition j = jordan_decompose(xi, xi);
  EXPECT_TRUE(j.positive_part.empty());
  EXPECT_TRUE(j.negative_part.empty());
  EXPECT_EQ(max_atomwise_difference(j.common_part, xi), 0.0);
}

TEST(Jordan, SharedAtom) {
  const SignedDecomposition j = jordan_decompose(line(1.0, 4, {{0.0, 2.0}}), line(1.0, 4, {{0.0, 1.0}}));
  ASSERT_EQ(j.positive_part.size(), 1u);
  EXPECT_DOUBLE_EQ(j.positive_part[0].mass, 1.0);
  EXPECT_TRUE(j.negative_part.empty());
  EXPECT_DOUBLE_EQ(j.common_part[0].mass, 1.0);
}

TEST(Jordan, DisjointSupports) {
  const DiscreteMeasure xi = line(2.0, 4, {{0.0, 1.0}});
  const DiscreteMeasure eta = line(2.0, 4, {{1.0, 1.0}});
  const SignedDecomposition j = jordan_decompose(xi, eta);
  EXPECT_EQ(max_atomwise_difference(j.positive_part, xi), 0.0);
  EXPECT_EQ(max_atomwise_difference(j.negative_part, eta), 0.0);
  EXPECT_TRUE(j.common_part.empty());
}

TEST(Jordan, ReconstructionAndSingularity) {
  const DiscreteMeasure xi = line(1.0, 8, {{0.1, 1.0}, {0.2, 0.3}, {0.5, 2.0}, {0.9, 0.7}});
  const DiscreteMeasure eta = line(1.0, 8, {{0.1, 0.4}, {0.3, 1.0}, {0.5, 2.5}, {0.9, 0.7}});
  const SignedDecomposition j = jordan_decompose(xi, eta);
  EXPECT_TRUE(mutually_singular(j.positive_part, j.negative_part));
  EXPECT_LE(max_atomwise_difference(sum(j.common_part, j.positive_part), xi), 1e-12);
  EXPECT_LE(max_atomwise_difference(sum(j.common_part, j.negative_part), eta), 1e-12);
}

TEST(Jordan, DomainMismatch) {
  EXPECT_THROW(jordan_decompose(line(1.0, 4, {{0.1, 1.0}}), line(2.0, 4, {{0.1, 1.0}})), Error);
}

TEST(Lebesgue, Cases) {
  const DiscreteMeasure xi = line(2.0, 4, {{0.0, 1.0}});
  const DiscreteMeasure eta = line(2.0, 4, {{0.0, 0.5}, {1.0, 0.5}});
  const LebesgueDecomposition s = lebesgue_decompose(eta, xi);
  EXPECT_EQ(max_atomwise_difference(s.absolutely_continuous, line(2.0, 4, {{0.0, 0.5}})), 0.0);
  EXPECT_EQ(max_atomwise_difference(s.singular, line(2.0, 4, {{1.0, 0.5}})), 0.0);
  EXPECT_EQ(max_atomwise_difference(sum(s.absolutely_continuous, s.singular), eta), 0.0);

  const LebesgueDecomposition disjoint = lebesgue_decompose(line(2.0, 4, {{1.5, 1.0}}), xi);
  EXPECT_TRUE(disjoint.absolutely_continuous.empty());
  const LebesgueDecomposition inside = lebesgue_decompose(xi, sum(xi, eta));
  EXPECT_TRUE(inside.singular.empty());
}

TEST(Shift, IdentityGroupAndWrap) {
  const DiscreteMeasure mu = line(1.0, 4, {{0.75, 1.0}, {0.3, 2.0}});
  EXPECT_EQ(max_atomwise_difference(shift(mu, pt(0.0)), mu), 0.0);
  EXPECT_LE(max_atomwise_difference(shift(shift(mu, pt(0.37)), pt(-0.37)), mu), 0.0);
  const DiscreteMeasure one = shift(line(1.0, 4, {{0.75, 1.0}}), pt(0.5));
  EXPECT_DOUBLE_EQ(one[0].location[0], 0.25);
  EXPECT_EQ(intensity(shift(mu, pt(0.123))), intensity(mu));
}

TEST(Shift, GridShiftKeepsAlignment) {
  const DiscreteMeasure mu = line(1.0, 8, {{0.0625, 1.0}, {0.5625, 1.0}});
  const DiscreteMeasure s = shift(mu, pt(0.375));
  EXPECT_TRUE(s.cell_aligned());
  EXPECT_EQ(s[0].location[0], 0.4375);
}

TEST(MutuallySingular, Cases) {
  const DiscreteMeasure a = line(1.0, 4, {{0.1, 1.0}});
  EXPECT_TRUE(mutually_singular(a, line(1.0, 4, {{0.2, 1.0}})));
  EXPECT_FALSE(mutually_singular(a, line(1.0, 4, {{0.1, 3.0}, {0.2, 1.0}})));
  EXPECT_TRUE(mutually_singular(a, DiscreteMeasure(a.domain())));
}

TEST(MeasureIo, RoundTrip) {
  const DiscreteMeasure mu = line(1.0, 4, {{0.1, 1.0 / 3.0}, {0.7, 2.0}});
  std::stringstream ss;
  write_measure(ss, mu);
  const DiscreteMeasure back = read_measure(ss);
  EXPECT_EQ(back.domain(), mu.domain());
  EXPECT_EQ(max_atomwise_difference(back, mu), 0.0);
  EXPECT_EQ(back[0].location, mu[0].location);
}

TEST(MeasureIo, RejectsGarbage) {
  std::stringstream no_header("0.1 1.0\n");
  EXPECT_THROW(read_measure(no_header), Error);
  std::stringstream short_line("domain 2 1 4\n0.1 1.0\n");
  EXPECT_THROW(read_measure(short_line), Error);
}
