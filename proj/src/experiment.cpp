#include "rmt/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace rmt {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

CostSource parse_cost_source(const std::string& name) {
  if (name == "power") return CostSource::kPower;
  if (name == "dlvp_from_tails") return CostSource::kDlvpFromTails;
  if (name == "file") return CostSource::kFile;
  throw Error(ErrorCode::kInvalidArgument, "unknown cost source: " + name);
}

std::string to_string(CostSource source) {
  switch (source) {
    case CostSource::kPower:
      return "power";
    case CostSource::kDlvpFromTails:
      return "dlvp_from_tails";
    case CostSource::kFile:
      return "file";
  }
  return "unknown";
}

namespace {

const std::map<std::string, std::set<std::string>> kSectionKeys = {
    {"domain", {"dim", "side", "resolution"}},
    {"pairing", {"coupled", "common_weight", "match_intensity"}},
    {"pipeline", {"branch"}},
    {"cost", {"source", "power", "r_max", "file", "bin_width"}},
    {"run", {"seed", "seeds", "out"}},
    {"tolerance", {"solver", "balance_slack"}},
    {"checks", {"covariance_shifts", "histogram_bins"}},
};

const std::set<std::string> kSpecKeys = {"kind",           "intensity",      "point_intensity", "bandwidth",
                                         "segment_count",  "segment_length", "components",      "weight"};

template <typename T>
T get(const pt::ptree& tree, const std::string& section, const std::string& key, T fallback) {
  const auto sec = tree.get_child_optional(pt::ptree::path_type(section, '\0'));
  if (!sec) return fallback;
  const auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
  if (!v) return fallback;
  std::istringstream is(*v);
  T out{};
  if constexpr (std::is_same_v<T, bool>) {
    std::string word;
    is >> word;
    if (word == "true" || word == "1" || word == "yes") return true;
    if (word == "false" || word == "0" || word == "no") return false;
    throw Error(ErrorCode::kParse, fmt::format("[{}] {}: expected a boolean", section, key));
  } else if constexpr (std::is_same_v<T, std::string>) {
    return *v;
  } else {
    if (!(is >> out)) throw Error(ErrorCode::kParse, fmt::format("[{}] {}: bad value '{}'", section, key, *v));
    return out;
  }
}

GeneratorSpec read_spec(const pt::ptree& tree, const std::string& section, std::set<std::string>& used, int depth) {
  if (depth > 4) throw Error(ErrorCode::kParse, "mixture nesting too deep at [" + section + "]");
  if (!tree.get_child_optional(pt::ptree::path_type(section, '\0'))) {
    throw Error(ErrorCode::kParse, "missing section [" + section + "]");
  }
  used.insert(section);
  GeneratorSpec s;
  s.kind = parse_generator_kind(get<std::string>(tree, section, "kind", "lebesgue_grid"));
  s.intensity = get(tree, section, "intensity", s.intensity);
  s.point_intensity = get(tree, section, "point_intensity", s.point_intensity);
  s.bandwidth = get(tree, section, "bandwidth", s.bandwidth);
  s.segment_count = get(tree, section, "segment_count", s.segment_count);
  s.segment_length = get(tree, section, "segment_length", s.segment_length);
  if (s.kind == GeneratorKind::kMixture) {
    std::istringstream names(get<std::string>(tree, section, "components", ""));
    std::string name;
    while (names >> name) {
      MixtureComponent c;
      c.spec = read_spec(tree, name, used, depth + 1);
      c.weight = get(tree, name, "weight", 1.0);
      s.components.push_back(std::move(c));
    }
  }
  return s;
}

void write_spec(std::ostream& os, const std::string& section, const GeneratorSpec& s, double weight, bool with_weight) {
  os << fmt::format("[{}]\nkind = {}\n", section, to_string(s.kind));
  if (with_weight) os << fmt::format("weight = {:.17g}\n", weight);
  os << fmt::format("intensity = {:.17g}\npoint_intensity = {:.17g}\nbandwidth = {:.17g}\n", s.intensity,
                    s.point_intensity, s.bandwidth);
  os << fmt::format("segment_count = {}\nsegment_length = {:.17g}\n", s.segment_count, s.segment_length);
  if (s.kind == GeneratorKind::kMixture) {
    std::string names;
    for (std::size_t k = 0; k < s.components.size(); ++k) names += fmt::format("{}{}_{}", k ? " " : "", section, k);
    os << "components = " << names << "\n";
  }
  os << "\n";
  for (std::size_t k = 0; k < s.components.size(); ++k) {
    write_spec(os, fmt::format("{}_{}", section, k), s.components[k].spec, s.components[k].weight, true);
  }
}

// Rethrows with the stage name prefixed.
template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", name, e.what()));
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kInvalidArgument, "cannot read " + path.string());
  return is;
}

}  // namespace

ExperimentConfig parse_config(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  ExperimentConfig c;
  c.dim = get(tree, "domain", "dim", c.dim);
  c.side = get(tree, "domain", "side", c.side);
  c.resolution = get(tree, "domain", "resolution", c.resolution);
  std::set<std::string> spec_sections;
  c.xi = read_spec(tree, "xi", spec_sections, 0);
  c.eta = read_spec(tree, "eta", spec_sections, 0);
  c.coupled = get(tree, "pairing", "coupled", c.coupled);
  c.common_weight = get(tree, "pairing", "common_weight", c.common_weight);
  c.match_intensity = get(tree, "pairing", "match_intensity", c.match_intensity);
  c.branch = parse_branch(get<std::string>(tree, "pipeline", "branch", "auto"));
  c.cost_source = parse_cost_source(get<std::string>(tree, "cost", "source", "power"));
  c.power = get(tree, "cost", "power", c.power);
  c.r_max = get(tree, "cost", "r_max", c.r_max);
  c.cost_file = get<std::string>(tree, "cost", "file", c.cost_file);
  c.bin_width = get(tree, "cost", "bin_width", c.bin_width);
  c.seed = get(tree, "run", "seed", c.seed);
  c.seeds = get(tree, "run", "seeds", c.seeds);
  c.out_dir = get<std::string>(tree, "run", "out", c.out_dir);
  c.solver_tolerance = get(tree, "tolerance", "solver", c.solver_tolerance);
  c.balance_slack = get(tree, "tolerance", "balance_slack", c.balance_slack);
  c.covariance_shifts = get(tree, "checks", "covariance_shifts", c.covariance_shifts);
  c.histogram_bins = get(tree, "checks", "histogram_bins", c.histogram_bins);

  for (const auto& [section, body] : tree) {
    const bool is_spec = spec_sections.contains(section);
    const auto known = kSectionKeys.find(section);
    if (!is_spec && known == kSectionKeys.end()) throw Error(ErrorCode::kParse, "unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const bool ok = is_spec ? kSpecKeys.contains(key) : known->second.contains(key);
      if (!ok) throw Error(ErrorCode::kParse, fmt::format("unknown key '{}' in [{}]", key, section));
    }
  }
  if (c.seeds < 1) throw Error(ErrorCode::kParse, "seeds must be positive");
  if (c.histogram_bins < 1) throw Error(ErrorCode::kParse, "histogram_bins must be positive");
  if (c.covariance_shifts < 0) throw Error(ErrorCode::kParse, "covariance_shifts must be >= 0");
  if (!(c.power > 0.0 && c.power <= 1.0)) throw Error(ErrorCode::kParse, "power must lie in (0, 1]");
  (void)c.domain();
  validate(c.xi);
  validate(c.eta);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is = open_in(path);
  return parse_config(is);
}

void write_config(std::ostream& os, const ExperimentConfig& c) {
  os << fmt::format("[domain]\ndim = {}\nside = {:.17g}\nresolution = {}\n\n", c.dim, c.side, c.resolution);
  os << fmt::format("[pairing]\ncoupled = {}\ncommon_weight = {:.17g}\nmatch_intensity = {}\n\n",
                    c.coupled ? "true" : "false", c.common_weight, c.match_intensity ? "true" : "false");
  os << fmt::format("[pipeline]\nbranch = {}\n\n", to_string(c.branch));
  os << fmt::format("[cost]\nsource = {}\npower = {:.17g}\nr_max = {:.17g}\n", to_string(c.cost_source), c.power,
                    c.r_max);
  if (!c.cost_file.empty()) os << "file = " << c.cost_file << "\n";
  os << fmt::format("bin_width = {:.17g}\n\n", c.bin_width);
  os << fmt::format("[run]\nseed = {}\nseeds = {}\nout = {}\n\n", c.seed, c.seeds, c.out_dir);
  os << fmt::format("[tolerance]\nsolver = {:.17g}\nbalance_slack = {:.17g}\n\n", c.solver_tolerance,
                    c.balance_slack);
  os << fmt::format("[checks]\ncovariance_shifts = {}\nhistogram_bins = {}\n\n", c.covariance_shifts,
                    c.histogram_bins);
  write_spec(os, "xi", c.xi, 1.0, false);
  write_spec(os, "eta", c.eta, 1.0, false);
}

Inputs generate_inputs(const ExperimentConfig& cfg, std::uint64_t seed) {
  const PeriodicDomain dom = cfg.domain();
  if (cfg.coupled) {
    auto [xi, eta] = coupled_pair(cfg.xi, cfg.eta, cfg.common_weight, seed, dom);
    return {std::move(xi), std::move(eta)};
  }
  GeneratorSpec sx = cfg.xi;
  sx.seed = mix_seed(seed, 1);
  GeneratorSpec se = cfg.eta;
  se.seed = mix_seed(seed, 2);
  Inputs in{generate(sx, dom), generate(se, dom)};
  if (cfg.match_intensity && in.xi.total_mass() > 0.0 && in.eta.total_mass() > 0.0) {
    in.xi = scaled(in.xi, in.eta.total_mass() / in.xi.total_mass());
  }
  return in;
}

BuiltCost build_cost(const ExperimentConfig& cfg, const Inputs& in) {
  const PeriodicDomain dom = cfg.domain();
  BuiltCost out;
  switch (cfg.cost_source) {
    case CostSource::kPower: {
      const double r_max = cfg.r_max > 0.0 ? cfg.r_max : 0.5 * dom.side() * std::sqrt(dom.dim());
      out.theta = cfg.power == 1.0 ? ConcaveCost::linear() : ConcaveCost::power(cfg.power, r_max);
      return out;
    }
    case CostSource::kFile:
      out.theta = load_cost(cfg.cost_file);
      return out;
    case CostSource::kDlvpFromTails: {
      SolverOptions opts;
      opts.tolerance = cfg.solver_tolerance;
      const TransportPlan pilot = solve_semicoupling(in.xi, in.eta, ConcaveCost::linear(), opts);
      const double w = cfg.bin_width > 0.0 ? cfg.bin_width : dom.pitch();
      out.tails = estimate_tail_masses(std::span<const TransportPlan>(&pilot, 1), dom, w);
      const DlvpCost built = build_dlvp_cost(out.tails);
      out.theta = built.cost;
      out.certificate = certify_dlvp(out.tails, out.theta);
      return out;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unhandled cost source");
}

bool ExperimentResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.passed; });
}

std::vector<CheckReport> verify_allocation(const DiscreteMeasure& xi, const DiscreteMeasure& eta,
                                           const AllocationMap& map, double slack) {
  std::vector<CheckReport> checks;
  const double budget = 2.0 * std::max(xi.max_mass(), eta.max_mass()) + slack;
  checks.push_back(check_balance(xi, eta, map, budget));
  CheckReport used;
  used.name = "used_fraction";
  double worst = 0.0;
  for (double f : map.used_fractions()) worst = std::max(worst, f - 1.0);
  used.value = worst;
  used.tolerance = 1e-9;
  used.passed = worst <= used.tolerance;
  used.details = "largest excess of used fraction over 1";
  checks.push_back(used);
  return checks;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out) {
  fs::create_directories(out);
  ExperimentResult res;
  res.seed = seed;
  const PeriodicDomain dom = cfg.domain();
  const Inputs in = stage("generate", [&] { return generate_inputs(cfg, seed); });
  const BuiltCost cost = stage("cost", [&] { return build_cost(cfg, in); });
  SolverOptions opts;
  opts.tolerance = cfg.solver_tolerance;
  const Branch branch = cfg.branch == Branch::kAuto ? select_branch(in.xi, in.eta) : cfg.branch;
  const AllocationResult alloc = stage("allocate", [&] { return allocate(in.xi, in.eta, cost.theta, branch, opts); });

  res.checks = stage("verify", [&] { return verify_allocation(in.xi, in.eta, alloc.map, cfg.balance_slack); });
  res.checks.push_back(check_partition(in.xi, alloc.stage_mass));
  if (!alloc.threshold.trivial && branch == Branch::kNoSmallSets) {
    res.checks.push_back(check_threshold(alloc.field, alloc.threshold, std::max(in.xi.max_mass(), in.eta.max_mass())));
  }
  if (cfg.covariance_shifts > 0) {
    const Pipeline pipeline = [&](const DiscreteMeasure& a, const DiscreteMeasure& b) {
      return allocate(a, b, cost.theta, branch, opts).map;
    };
    res.checks.push_back(stage("covariance", [&] {
      return check_shift_covariance(pipeline, in.xi, in.eta, cost.theta, cfg.covariance_shifts, seed);
    }));
  }
  for (const CheckReport& c : cost.certificate) res.checks.push_back(c);
  if (dom.dim() >= 2) {
    std::vector<double> scales;
    for (int k = 4; k <= dom.resolution(); k *= 2) scales.push_back(dom.side() / k);
    SmallSetsDiagnostic diag = small_sets_diagnostic(in.xi, scales);
    diag.report.name = "small_sets_advisory";
    diag.report.details += diag.flagged ? " (advisory: xi flagged)" : "";
    diag.report.passed = true;
    res.checks.push_back(diag.report);
  }

  PipelineReport& r = res.report;
  r.branch = to_string(branch);
  r.cost = allocation_cost(alloc.map, cost.theta);
  r.xi_intensity = intensity(in.xi);
  r.eta_intensity = intensity(in.eta);
  r.balance_error = res.checks.front().value;
  r.balance_budget = res.checks.front().tolerance;
  r.residual_imbalance = alloc.threshold.residual_imbalance;
  r.split_mass = alloc.splits.split_mass;
  r.split_sources = alloc.splits.count();
  r.t0 = alloc.threshold.t0;
  r.level_fraction = alloc.threshold.level_fraction;
  for (const auto& s : alloc.stage_mass) {
    for (std::size_t k = 0; k < 3; ++k) r.stage_mass[k] += s[k];
  }

  {
    auto os = open_out(out / "config.ini");
    write_config(os, cfg);
  }
  save_measure(out / "xi.txt", in.xi);
  save_measure(out / "eta.txt", in.eta);
  save_cost(out / "cost.txt", cost.theta);
  {
    auto os = open_out(out / "allocation.txt");
    write_allocation(os, alloc.map);
  }
  {
    auto os = open_out(out / "histogram.txt");
    write_histogram(os, emit_histograms(alloc.map, cfg.histogram_bins));
  }
  {
    auto os = open_out(out / "report.txt");
    write_report(os, r);
  }
  {
    auto os = open_out(out / "checks.txt");
    write_checks(os, res.checks);
  }
  return res;
}

std::vector<ExperimentResult> run_experiments(const ExperimentConfig& cfg) {
  std::vector<ExperimentResult> out;
  for (int k = 0; k < cfg.seeds; ++k) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(k);
    const fs::path dir = cfg.seeds == 1 ? fs::path(cfg.out_dir) : fs::path(cfg.out_dir) / fmt::format("seed_{}", seed);
    out.push_back(run_experiment(cfg, seed, dir));
  }
  return out;
}

std::vector<HistogramRow> emit_histograms(const AllocationMap& T, int bins) {
  if (bins < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one bin");
  const PeriodicDomain& dom = T.domain();
  const double top = 0.5 * dom.side() * std::sqrt(dom.dim());
  const double width = top / bins;
  std::vector<HistogramRow> rows(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) rows[static_cast<std::size_t>(k)].lower = k * width;
  for (const Assignment& a : T.assignments()) {
    const double r = dom.norm(T.displacement(a));
    const auto k = std::min<long>(bins - 1, static_cast<long>(std::floor(r / width)));
    rows[static_cast<std::size_t>(k)].mass += T.mass(a);
  }
  return rows;
}

void write_histogram(std::ostream& os, const std::vector<HistogramRow>& rows) {
  os << "# lower_edge mass\n";
  for (const HistogramRow& r : rows) os << fmt::format("{:.17g} {:.17g}\n", r.lower, r.mass);
}

std::vector<HistogramRow> read_histogram(std::istream& is) {
  std::vector<HistogramRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    HistogramRow r;
    if (!(ls >> r.lower >> r.mass)) throw Error(ErrorCode::kParse, "bad histogram line: " + line);
    rows.push_back(r);
  }
  return rows;
}

void write_plan(std::ostream& os, const TransportPlan& plan, const std::string& mu_file, const std::string& nu_file,
                const std::string& cost_file) {
  os << "mu " << mu_file << "\nnu " << nu_file << "\ncost " << cost_file << "\n";
  for (const PlanEntry& e : plan.entries()) os << fmt::format("{} {} {:.17g}\n", e.source, e.target, e.mass);
}

PlanFile read_plan(std::istream& is) {
  PlanFile p;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "mu" || head == "nu" || head == "cost") {
      std::string path;
      std::getline(ls >> std::ws, path);
      (head == "mu" ? p.mu_file : head == "nu" ? p.nu_file : p.cost_file) = path;
      continue;
    }
    std::istringstream es(line);
    PlanEntry e;
    if (!(es >> e.source >> e.target >> e.mass)) throw Error(ErrorCode::kParse, "bad plan line: " + line);
    p.entries.push_back(e);
  }
  if (p.mu_file.empty() || p.nu_file.empty()) throw Error(ErrorCode::kParse, "plan file lacks measure references");
  return p;
}

TransportPlan load_plan(const fs::path& path) {
  std::ifstream is = open_in(path);
  const PlanFile p = read_plan(is);
  const fs::path base = path.parent_path();
  auto mu = std::make_shared<const DiscreteMeasure>(load_measure(base / p.mu_file));
  auto nu = std::make_shared<const DiscreteMeasure>(load_measure(base / p.nu_file));
  return TransportPlan(mu, nu, p.entries);
}

DiscreteMeasure load_measure(const fs::path& path) {
  std::ifstream is = open_in(path);
  return read_measure(is);
}

void save_measure(const fs::path& path, const DiscreteMeasure& mu) {
  auto os = open_out(path);
  write_measure(os, mu);
}

ConcaveCost load_cost(const fs::path& path) {
  std::ifstream is = open_in(path);
  return read_cost(is);
}

void save_cost(const fs::path& path, const ConcaveCost& theta) {
  auto os = open_out(path);
  write_cost(os, theta);
}

}  // namespace rmt
