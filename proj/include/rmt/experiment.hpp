#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rmt/verification.hpp"

namespace rmt {

enum class CostSource { kPower, kDlvpFromTails, kFile };

CostSource parse_cost_source(const std::string& name);
std::string to_string(CostSource source);

/// Flat `key = value` configuration with sections; see README for keys.
struct ExperimentConfig {
  int dim = 1;
  double side = 1.0;
  int resolution = 32;

  GeneratorSpec xi;
  GeneratorSpec eta;
  /// Draw (xi, eta) with coupled_pair instead of independently.
  bool coupled = false;
  double common_weight = 0.0;
  /// Independent draws: rescale xi to eta's total mass.
  bool match_intensity = true;

  Branch branch = Branch::kAuto;

  CostSource cost_source = CostSource::kPower;
  double power = 0.5;
  /// 0 picks half the torus diagonal.
  double r_max = 0.0;
  std::string cost_file;
  /// Tail bin width for dlvp_from_tails; 0 picks the grid pitch.
  double bin_width = 0.0;

  std::uint64_t seed = 1;
  int seeds = 1;
  std::string out_dir = "out";

  double solver_tolerance = 1e-9;
  double balance_slack = 1e-6;
  int covariance_shifts = 2;
  int histogram_bins = 32;

  PeriodicDomain domain() const { return PeriodicDomain(dim, side, resolution); }
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& os, const ExperimentConfig& cfg);

struct Inputs {
  DiscreteMeasure xi;
  DiscreteMeasure eta;
};

Inputs generate_inputs(const ExperimentConfig& cfg, std::uint64_t seed);

struct BuiltCost {
  ConcaveCost theta = ConcaveCost::linear();
  /// Present for dlvp_from_tails.
  std::vector<CheckReport> certificate;
  TailMassSequence tails;
};

/// dlvp_from_tails estimates tails from a pilot coupling of the inputs with
/// linear cost.
BuiltCost build_cost(const ExperimentConfig& cfg, const Inputs& in);

struct ExperimentResult {
  std::uint64_t seed = 0;
  PipelineReport report;
  std::vector<CheckReport> checks;
  bool passed() const;
};

/// One seed: generate, build the cost, allocate, check, write artifacts into
/// `out` (created if missing).
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& out);
/// All configured seeds; several seeds go to `out_dir/seed_<k>`.
std::vector<ExperimentResult> run_experiments(const ExperimentConfig& cfg);

/// Checks on a finished allocation, shared by `run` and `verify`.
std::vector<CheckReport> verify_allocation(const DiscreteMeasure& xi, const DiscreteMeasure& eta,
                                           const AllocationMap& map, double slack);

struct HistogramRow {
  double lower = 0.0;
  double mass = 0.0;
};

/// Mass per displacement-length bin over [0, half diagonal]; zero
/// displacements land in bin 0.
std::vector<HistogramRow> emit_histograms(const AllocationMap& T, int bins);
void write_histogram(std::ostream& os, const std::vector<HistogramRow>& rows);
std::vector<HistogramRow> read_histogram(std::istream& is);

/// Plan file: `mu <path>`, `nu <path>`, `cost <path>` header lines, then
/// `src_index dst_index mass`.
void write_plan(std::ostream& os, const TransportPlan& plan, const std::string& mu_file, const std::string& nu_file,
                const std::string& cost_file);
struct PlanFile {
  std::string mu_file;
  std::string nu_file;
  std::string cost_file;
  std::vector<PlanEntry> entries;
};
PlanFile read_plan(std::istream& is);
/// Reads the plan and the measures it references (relative to its directory).
TransportPlan load_plan(const std::filesystem::path& path);

DiscreteMeasure load_measure(const std::filesystem::path& path);
void save_measure(const std::filesystem::path& path, const DiscreteMeasure& mu);
ConcaveCost load_cost(const std::filesystem::path& path);
void save_cost(const std::filesystem::path& path, const ConcaveCost& theta);

}  // namespace rmt
