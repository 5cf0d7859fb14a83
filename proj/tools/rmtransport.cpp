// Command-line front end: generate inputs, build costs, solve, allocate,
// verify and report. Exit status 0 means every check passed, 1 means some
// check failed, 2 means the command could not run.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "rmt/experiment.hpp"

namespace fs = std::filesystem;
using namespace rmt;

namespace {

struct Common {
  std::string config;
  std::int64_t seed = -1;
  std::string out;
  int resolution = 0;
  std::string branch;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config file");
  app->add_option("--seed", c.seed, "seed (overrides the config)");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--resolution", c.resolution, "cells per axis (overrides the config)");
  app->add_option("--branch", c.branch, "auto | mutually_singular | no_small_sets | general");
}

ExperimentConfig config_from(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) cfg = load_config(c.config);
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  if (c.resolution > 0) cfg.resolution = c.resolution;
  if (!c.branch.empty()) cfg.branch = parse_branch(c.branch);
  if (!c.out.empty()) cfg.out_dir = c.out;
  return cfg;
}

void require_config(const Common& c) {
  if (c.config.empty()) throw Error(ErrorCode::kInvalidArgument, "--config is required");
}

void print_checks(const std::vector<CheckReport>& checks) {
  for (const CheckReport& c : checks) {
    fmt::print("  {:<24} {}  value {:.6g}  tol {:.6g}  {}\n", c.name, c.passed ? "PASS" : "FAIL", c.value,
               c.tolerance, c.details);
  }
}

bool all_passed(const std::vector<CheckReport>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.passed; });
}

std::string relative_to(const fs::path& file, const fs::path& dir) {
  return fs::relative(fs::absolute(file), fs::absolute(dir)).generic_string();
}

void write_checks_file(const fs::path& path, const std::vector<CheckReport>& checks) {
  std::ofstream os(path);
  write_checks(os, checks);
}

int cmd_generate(const Common& c) {
  require_config(c);
  const ExperimentConfig cfg = config_from(c);
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  const Inputs in = generate_inputs(cfg, cfg.seed);
  save_measure(out / "xi.txt", in.xi);
  save_measure(out / "eta.txt", in.eta);
  std::ofstream os(out / "config.ini");
  write_config(os, cfg);
  fmt::print("xi: {} atoms, mass {:.17g}\neta: {} atoms, mass {:.17g}\n", in.xi.size(), in.xi.total_mass(),
             in.eta.size(), in.eta.total_mass());
  return 0;
}

int cmd_cost(const Common& c) {
  require_config(c);
  const ExperimentConfig cfg = config_from(c);
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  const Inputs in = generate_inputs(cfg, cfg.seed);
  const BuiltCost cost = build_cost(cfg, in);
  save_cost(out / "cost.txt", cost.theta);
  fmt::print("cost: {} breakpoints, final slope {:.6g}\n", cost.theta.breakpoints().size(), cost.theta.final_slope());
  print_checks(cost.certificate);
  if (!cost.certificate.empty()) write_checks_file(out / "certificate.txt", cost.certificate);
  return all_passed(cost.certificate) ? 0 : 1;
}

int cmd_solve(const Common& c, const std::string& mu_file, const std::string& nu_file, const std::string& cost_file) {
  const fs::path out = c.out.empty() ? fs::path(".") : fs::path(c.out);
  fs::create_directories(out);
  auto mu = std::make_shared<const DiscreteMeasure>(load_measure(mu_file));
  auto nu = std::make_shared<const DiscreteMeasure>(load_measure(nu_file));
  const ConcaveCost theta = load_cost(cost_file);
  const TransportPlan plan = solve_semicoupling(mu, nu, theta);
  {
    std::ofstream os(out / "plan.txt");
    write_plan(os, plan, relative_to(mu_file, out), relative_to(nu_file, out), relative_to(cost_file, out));
  }
  std::vector<CheckReport> checks{check_cyclical_monotonicity(plan, theta)};
  CheckReport marg;
  marg.name = "marginals";
  marg.value = plan.marginal_error();
  marg.tolerance = 1e-9 * std::max(1.0, nu->total_mass());
  marg.passed = marg.value <= marg.tolerance;
  marg.details = "largest marginal violation";
  checks.push_back(marg);
  fmt::print("entries {}  cost {:.17g}  indicator_fraction {:.6g}\n", plan.entries().size(), plan_cost(plan, theta),
             indicator_fraction(plan));
  print_checks(checks);
  write_checks_file(out / "checks.txt", checks);
  return all_passed(checks) ? 0 : 1;
}

int cmd_allocate(const Common& c, const std::string& xi_file, const std::string& eta_file,
                 const std::string& cost_file) {
  DiscreteMeasure xi, eta;
  ConcaveCost theta = ConcaveCost::linear();
  Branch branch = c.branch.empty() ? Branch::kAuto : parse_branch(c.branch);
  fs::path out = c.out.empty() ? fs::path(".") : fs::path(c.out);
  if (!c.config.empty()) {
    const ExperimentConfig cfg = config_from(c);
    Inputs in = generate_inputs(cfg, cfg.seed);
    theta = cost_file.empty() ? build_cost(cfg, in).theta : load_cost(cost_file);
    xi = std::move(in.xi);
    eta = std::move(in.eta);
    branch = cfg.branch;
    out = cfg.out_dir;
  } else {
    if (xi_file.empty() || eta_file.empty() || cost_file.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "allocate needs --config or --xi, --eta and --cost");
    }
    xi = load_measure(xi_file);
    eta = load_measure(eta_file);
    theta = load_cost(cost_file);
  }
  fs::create_directories(out);
  if (branch == Branch::kAuto) branch = select_branch(xi, eta);
  const AllocationResult r = allocate(xi, eta, theta, branch);
  {
    std::ofstream os(out / "allocation.txt");
    write_allocation(os, r.map);
  }
  if (!c.config.empty()) {
    save_measure(out / "xi.txt", xi);
    save_measure(out / "eta.txt", eta);
    save_cost(out / "cost.txt", theta);
  }
  const std::vector<CheckReport> checks{check_partition(xi, r.stage_mass)};
  fmt::print("branch {}  assignments {}  cost {:.17g}  split sources {}  t0 {:.17g}\n", to_string(r.branch),
             r.map.assignments().size(), allocation_cost(r.map, theta), r.splits.count(), r.threshold.t0);
  print_checks(checks);
  return all_passed(checks) ? 0 : 1;
}

int cmd_verify(const Common& c, const std::string& xi_file, const std::string& eta_file,
               const std::string& alloc_file, double slack) {
  if (xi_file.empty() || eta_file.empty() || alloc_file.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "verify needs --xi, --eta and --allocation");
  }
  auto xi = std::make_shared<const DiscreteMeasure>(load_measure(xi_file));
  const DiscreteMeasure eta = load_measure(eta_file);
  std::ifstream is(alloc_file);
  if (!is) throw Error(ErrorCode::kInvalidArgument, "cannot read " + alloc_file);
  const AllocationMap map = read_allocation(is, xi);
  const std::vector<CheckReport> checks = verify_allocation(*xi, eta, map, slack);
  print_checks(checks);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_checks_file(fs::path(c.out) / "checks.txt", checks);
  }
  return all_passed(checks) ? 0 : 1;
}

int cmd_run(const Common& c) {
  require_config(c);
  const ExperimentConfig cfg = config_from(c);
  bool ok = true;
  for (const ExperimentResult& r : run_experiments(cfg)) {
    fmt::print("seed {}  branch {}  cost {:.6g}  balance {:.3g} / {:.3g}  {}\n", r.seed, r.report.branch,
               r.report.cost, r.report.balance_error, r.report.balance_budget, r.passed() ? "PASS" : "FAIL");
    if (!r.passed()) print_checks(r.checks);
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}

int report_dir(const fs::path& dir) {
  std::ifstream rs(dir / "report.txt");
  std::ifstream cs(dir / "checks.txt");
  if (!rs || !cs) throw Error(ErrorCode::kInvalidArgument, "no report.txt/checks.txt in " + dir.string());
  const PipelineReport r = read_report(rs);
  const std::vector<CheckReport> checks = read_checks(cs);
  fmt::print("{}\n  branch {}  cost {:.6g}  intensities {:.6g} / {:.6g}\n", dir.string(), r.branch, r.cost,
             r.xi_intensity, r.eta_intensity);
  fmt::print("  balance {:.3g} (budget {:.3g})  residual {:.3g}  split mass {:.3g} ({} sources)  t0 {:.6g}\n",
             r.balance_error, r.balance_budget, r.residual_imbalance, r.split_mass, r.split_sources, r.t0);
  print_checks(checks);
  return all_passed(checks) ? 0 : 1;
}

int cmd_report(const Common& c) {
  const fs::path dir = c.out.empty() ? fs::path(config_from(c).out_dir) : fs::path(c.out);
  if (fs::exists(dir / "report.txt")) return report_dir(dir);
  std::vector<fs::path> runs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "report.txt")) runs.push_back(e.path());
  }
  if (runs.empty()) throw Error(ErrorCode::kInvalidArgument, "no reports under " + dir.string());
  std::sort(runs.begin(), runs.end());
  int status = 0;
  for (const fs::path& p : runs) status = std::max(status, report_dir(p));
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balancing allocations between random measures on a periodic domain"};
  app.require_subcommand(1);
  Common common;
  std::string mu_file, nu_file, cost_file, xi_file, eta_file, alloc_file;
  double slack = 1e-6;

  auto* gen = app.add_subcommand("generate", "draw xi and eta from a config");
  add_common(gen, common);
  auto* cost = app.add_subcommand("cost", "build the concave cost (and its certificate)");
  add_common(cost, common);
  auto* solve = app.add_subcommand("solve", "optimal semicoupling of two measure files");
  add_common(solve, common);
  solve->add_option("--mu", mu_file, "source measure")->required();
  solve->add_option("--nu", nu_file, "target measure")->required();
  solve->add_option("--cost", cost_file, "cost file")->required();
  auto* alloc = app.add_subcommand("allocate", "balancing allocation of xi onto eta");
  add_common(alloc, common);
  alloc->add_option("--xi", xi_file, "source measure");
  alloc->add_option("--eta", eta_file, "target measure");
  alloc->add_option("--cost", cost_file, "cost file");
  auto* verify = app.add_subcommand("verify", "check an allocation against its inputs");
  add_common(verify, common);
  verify->add_option("--xi", xi_file, "source measure");
  verify->add_option("--eta", eta_file, "target measure");
  verify->add_option("--allocation", alloc_file, "allocation file");
  verify->add_option("--slack", slack, "additive balance slack");
  auto* run = app.add_subcommand("run", "end-to-end experiment over the configured seeds");
  add_common(run, common);
  auto* report = app.add_subcommand("report", "summarize the reports under an output directory");
  add_common(report, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(common);
    if (cost->parsed()) return cmd_cost(common);
    if (solve->parsed()) return cmd_solve(common, mu_file, nu_file, cost_file);
    if (alloc->parsed()) return cmd_allocate(common, xi_file, eta_file, cost_file);
    if (verify->parsed()) return cmd_verify(common, xi_file, eta_file, alloc_file, slack);
    if (run->parsed()) return cmd_run(common);
    if (report->parsed()) return cmd_report(common);
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 2;
}
