#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "rmt/allocation_map.hpp"
#include "rmt/cost.hpp"
#include "rmt/transport.hpp"

namespace rmt {

enum class Branch { kAuto, kMutuallySingular, kNoSmallSets, kGeneral };

Branch parse_branch(const std::string& name);
std::string to_string(Branch branch);

/// Chooses the branch from the inputs: mutually singular, then eta << xi,
/// otherwise general.
Branch select_branch(const DiscreteMeasure& xi, const DiscreteMeasure& eta);

/// Coupling of two mutually singular measures of equal mass, as an allocation
/// of xi. Split sources get one assignment per target.
AllocationMap allocate_mutually_singular(const DiscreteMeasure& xi, const DiscreteMeasure& eta,
                                         const ConcaveCost& theta, const SolverOptions& opts = {});

/// Inverse of a total map that never splits a source and never merges two
/// sources. The inverse lives on `target`, which must carry exactly the image.
AllocationMap invert_allocation(const AllocationMap& map, const DiscreteMeasure& target);

/// Piece of a location on which F is a single translation. Plan splits give a
/// location several sites, each holding its share of xi and eta there.
struct Site {
  Point location;
  /// F(x) - x; zero on fixed sites.
  Point displacement;
  double xi_mass = 0.0;
  double eta_mass = 0.0;
  bool moved() const noexcept { return !(displacement == Point{}); }
};

class DisplacementField {
 public:
  DisplacementField() = default;
  DisplacementField(PeriodicDomain domain, std::vector<Site> sites) : domain_(domain), sites_(std::move(sites)) {}

  const PeriodicDomain& domain() const noexcept { return domain_; }
  const std::vector<Site>& sites() const noexcept { return sites_; }
  /// F(x): image under the heaviest site at x, or x itself.
  Point operator()(const Point& x) const;
  double moved_xi_mass() const;
  double moved_eta_mass() const;

 private:
  PeriodicDomain domain_;
  std::vector<Site> sites_;
};

/// F built from the Jordan decomposition of xi - eta and an allocation T of
/// the positive part onto the negative part.
DisplacementField combined_F(const DiscreteMeasure& xi, const DiscreteMeasure& eta, const AllocationMap& T);

/// Interleaves zigzag fixed-point coordinates into one signed integer, scaled
/// into [-1, 1]. Injective on the fixed-point grid, zero at zero.
double interleave_encode(const PeriodicDomain& domain, const Point& v);

/// G: displacement vector -> real, bijective on realized values, G(0) = 0.
class DisplacementEncoder {
 public:
  using Rule = std::function<double(const PeriodicDomain&, const Point&)>;
  DisplacementEncoder() : rule_(interleave_encode) {}
  explicit DisplacementEncoder(Rule rule) : rule_(std::move(rule)) {}
  double operator()(const PeriodicDomain& domain, const Point& v) const { return rule_(domain, v); }

 private:
  Rule rule_;
};

/// (1/L^d) * xi-mass of moved sites with G(F(x)-x) <= t.
double profile_I(const DisplacementField& field, const DisplacementEncoder& G, double t);
/// (1/L^d) * eta-mass of moved sites with G(F(x)-x) > t.
double profile_J(const DisplacementField& field, const DisplacementEncoder& G, double t);

struct ThresholdSplit {
  double t0 = 0.0;
  /// Share of the level {G = t0} assigned to the {G <= t0} side.
  double level_fraction = 1.0;
  /// |I - J| at t0 after the level split, per unit volume.
  double residual_imbalance = 0.0;
  std::string boundary_rule = "uniform-level-fraction";
  std::size_t levels = 0;
  bool trivial = true;
};

ThresholdSplit find_threshold(const DisplacementField& field, const DisplacementEncoder& G);

struct AllocationResult {
  Branch branch = Branch::kAuto;
  AllocationMap map;
  ThresholdSplit threshold;
  /// F of the no-small-sets stage (empty for the mutually singular branch).
  DisplacementField field;
  /// xi-mass per atom in each stage: S1, S2, S3 for no-small-sets; the
  /// A part and its complement for general.
  std::vector<std::array<double, 3>> stage_mass;
  SplitReport splits;
};

AllocationResult allocate_no_small_sets(const DiscreteMeasure& xi, const DiscreteMeasure& eta,
                                        const ConcaveCost& theta, const SolverOptions& opts = {},
                                        const DisplacementEncoder& G = {});
AllocationResult allocate_general(const DiscreteMeasure& xi, const DiscreteMeasure& eta, const ConcaveCost& theta,
                                  const SolverOptions& opts = {}, const DisplacementEncoder& G = {});
AllocationResult allocate(const DiscreteMeasure& xi, const DiscreteMeasure& eta, const ConcaveCost& theta,
                          Branch branch, const SolverOptions& opts = {}, const DisplacementEncoder& G = {});

/// Sum of mass * theta(|displacement|) over assignments, per unit volume.
double allocation_cost(const AllocationMap& map, const ConcaveCost& theta);

SplitReport split_report(const AllocationMap& map);

struct PipelineReport {
  std::string branch;
  double cost = 0.0;
  double xi_intensity = 0.0;
  double eta_intensity = 0.0;
  double balance_error = 0.0;
  double balance_budget = 0.0;
  double residual_imbalance = 0.0;
  double split_mass = 0.0;
  std::size_t split_sources = 0;
  double t0 = 0.0;
  double level_fraction = 1.0;
  std::array<double, 3> stage_mass{0.0, 0.0, 0.0};
};

void write_report(std::ostream& os, const PipelineReport& report);
PipelineReport read_report(std::istream& is);

}  // namespace rmt
