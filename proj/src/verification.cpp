#include "rmt/verification.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

namespace rmt {

DiscreteMeasure pushforward(const DiscreteMeasure& xi, const AllocationMap& T) {
  if (xi.size() != T.source().size()) throw Error(ErrorCode::kInvalidArgument, "map source differs from xi");
  for (std::size_t i = 0; i < xi.size(); ++i) {
    if (xi.key(i) != T.source().key(i)) throw Error(ErrorCode::kInvalidArgument, "map source differs from xi");
  }
  std::vector<Atom> atoms;
  atoms.reserve(T.assignments().size());
  for (const Assignment& a : T.assignments()) atoms.push_back({a.target, a.fraction * xi[a.source].mass});
  return DiscreteMeasure(xi.domain(), std::move(atoms));
}

DistanceResult transport_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const ConcaveCost& theta) {
  require_same_domain(mu.domain(), nu.domain());
  DistanceResult r;
  const double a = mu.total_mass();
  const double b = nu.total_mass();
  if (std::abs(a - b) > 0.01 * std::max(a, b)) {
    throw Error(ErrorCode::kIntensityMismatch, fmt::format("masses differ by more than 1%: {} vs {}", a, b));
  }
  DiscreteMeasure target = nu;
  if (std::abs(a - b) > 1e-9 * std::max(1.0, std::max(a, b))) {
    target = scaled(nu, a / b);
    r.rescaled = true;
  }
  const SignedDecomposition jd = jordan_decompose(mu, target);
  if (jd.negative_part.empty() || jd.positive_part.empty()) return r;
  SolverOptions opts;
  opts.tie_break = TieBreak::kNone;
  opts.tolerance = 1e-6;
  const TransportPlan plan = solve_semicoupling(jd.positive_part, jd.negative_part, theta, opts);
  r.value = plan_cost(plan, theta);
  return r;
}

DistanceResult transport_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  return transport_distance(mu, nu, ConcaveCost::linear());
}

CheckReport check_balance(const DiscreteMeasure& xi, const DiscreteMeasure& eta, const AllocationMap& T,
                          double budget) {
  CheckReport r;
  r.name = "balance";
  r.tolerance = budget;
  const DistanceResult d = transport_distance(pushforward(xi, T), eta);
  r.value = d.value;
  r.passed = d.value <= budget && !d.rescaled;
  r.details = fmt::format("transport distance of pushforward to eta{}", d.rescaled ? " (rescaled)" : "");
  return r;
}

namespace {

using Signature = std::vector<std::tuple<std::array<std::int64_t, kMaxDim>, double>>;

Signature signature(const AllocationMap& map) {
  const PeriodicDomain& dom = map.domain();
  const double q = 1e-6 * dom.pitch();
  Signature s;
  for (const Assignment& a : map.assignments()) {
    const Point v = map.displacement(a);
    std::array<std::int64_t, kMaxDim> k{0, 0, 0};
    const auto period = static_cast<std::int64_t>(dom.resolution()) * 1000000;
    for (int i = 0; i < dom.dim(); ++i) {
      const std::int64_t c = std::llround(v[i] / q);
      k[static_cast<std::size_t>(i)] = ((c % period) + period + period / 2) % period - period / 2;
    }
    s.emplace_back(k, map.mass(a));
  }
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

CheckReport check_shift_covariance(const Pipeline& pipeline, const DiscreteMeasure& xi, const DiscreteMeasure& eta,
                                   const ConcaveCost& theta, int num_shifts, std::uint64_t seed, double tolerance) {
  CheckReport r;
  r.name = "shift_covariance";
  r.tolerance = tolerance;
  const PeriodicDomain& dom = xi.domain();
  const bool grid = xi.cell_aligned() && eta.cell_aligned();
  const AllocationMap base = pipeline(xi, eta);
  const Signature ref = signature(base);
  const double ref_cost = allocation_cost(base, theta);
  CounterRng rng(seed, 0x5ef7);
  double worst = 0.0;
  int failures = 0;
  for (int s = 0; s < num_shifts; ++s) {
    Point by;
    for (int i = 0; i < dom.dim(); ++i) {
      by[i] = grid ? static_cast<double>(rng.next() % static_cast<std::uint64_t>(dom.resolution())) * dom.pitch()
                   : rng.uniform() * dom.side();
    }
    const AllocationMap moved = pipeline(shift(xi, by), shift(eta, by));
    const Signature sig = signature(moved);
    double err = std::abs(allocation_cost(moved, theta) - ref_cost);
    if (sig.size() != ref.size()) {
      err = std::numeric_limits<double>::infinity();
    } else {
      for (std::size_t k = 0; k < sig.size(); ++k) {
        if (std::get<0>(sig[k]) != std::get<0>(ref[k])) {
          err = std::numeric_limits<double>::infinity();
          break;
        }
        err = std::max(err, std::abs(std::get<1>(sig[k]) - std::get<1>(ref[k])));
      }
    }
    if (!(err <= tolerance)) ++failures;
    worst = std::max(worst, std::isfinite(err) ? err : 1.0);
  }
  r.value = worst;
  r.passed = failures == 0;
  r.details = fmt::format("{} of {} {} shifts differ", failures, num_shifts, grid ? "grid" : "continuous");
  return r;
}

PalmStatistic window_mass(double radius) {
  return [radius](const DiscreteMeasure& eta, const Point& origin) {
    double s = 0.0;
    for (const Atom& a : eta.atoms()) {
      if (eta.domain().distance(a.location, origin) <= radius) s += a.mass;
    }
    return s;
  };
}

namespace {

// Ratio estimator sum(a) / sum(b) and its linearized standard error.
std::pair<double, double> ratio_estimate(const std::vector<double>& a, const std::vector<double>& b) {
  double sa = 0.0;
  double sb = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) {
    sa += a[r];
    sb += b[r];
  }
  const double ratio = sa / sb;
  const double n = static_cast<double>(a.size());
  double ss = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) ss += (a[r] - ratio * b[r]) * (a[r] - ratio * b[r]);
  const double se = std::sqrt(ss / (n * (n - 1.0))) / (sb / n);
  return {ratio, se};
}

}  // namespace

CheckReport palm_shift_coupling_test(const GeneratorSpec& eta_spec, const PeriodicDomain& domain,
                                     int num_realizations, const PalmStatistic& statistic, std::uint64_t seed,
                                     const ConcaveCost& theta, PalmEstimate* estimate, double se_band) {
  if (num_realizations < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two realizations");
  CheckReport r;
  r.name = "palm_shift_coupling";
  std::vector<double> alloc_num, biased_num, weights;
  const Point origin{};
  const std::size_t origin_cell = domain.cell_of(origin);
  for (int k = 0; k < num_realizations; ++k) {
    GeneratorSpec spec = eta_spec;
    spec.seed = mix_seed(seed, static_cast<std::uint64_t>(k));
    const DiscreteMeasure eta = generate(spec, domain);
    const double total = eta.total_mass();
    if (total <= 0.0) {
      alloc_num.push_back(0.0);
      biased_num.push_back(0.0);
      weights.push_back(0.0);
      continue;
    }
    GeneratorSpec leb;
    leb.kind = GeneratorKind::kLebesgueGrid;
    leb.intensity = total / domain.volume();
    const DiscreteMeasure xi = generate(leb, domain);
    const AllocationMap T = allocate(xi, eta, theta, Branch::kAuto).map;
    const auto i0 = xi.find(domain.cell_center(origin_cell));
    double seen = 0.0;
    double share = 0.0;
    for (const Assignment& a : T.assignments()) {
      if (i0 && a.source == *i0) {
        seen += a.fraction * statistic(eta, a.target);
        share += a.fraction;
      }
    }
    if (share > 0.0) seen /= share;
    double biased = 0.0;
    for (const Atom& a : eta.atoms()) biased += a.mass * statistic(eta, a.location);
    alloc_num.push_back(total * seen);
    biased_num.push_back(biased);
    weights.push_back(total);
  }
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (wsum <= 0.0) throw Error(ErrorCode::kInvalidArgument, "all realizations were empty");
  PalmEstimate est;
  std::tie(est.allocation, est.allocation_se) = ratio_estimate(alloc_num, weights);
  std::tie(est.mass_biased, est.mass_biased_se) = ratio_estimate(biased_num, weights);
  est.realizations = num_realizations;
  if (estimate != nullptr) *estimate = est;
  const double se = std::hypot(est.allocation_se, est.mass_biased_se);
  const double diff = std::abs(est.allocation - est.mass_biased);
  r.value = diff;
  r.tolerance = se_band * se;
  r.passed = diff <= r.tolerance || diff <= 1e-12 * std::max(1.0, std::abs(est.mass_biased));
  r.details = fmt::format("allocation {:.6g} (se {:.3g}), mass-biased {:.6g} (se {:.3g}), {} realizations",
                          est.allocation, est.allocation_se, est.mass_biased, est.mass_biased_se, num_realizations);
  return r;
}

SmallSetsDiagnostic small_sets_diagnostic(const DiscreteMeasure& mu, const std::vector<double>& scales) {
  SmallSetsDiagnostic out;
  out.report.name = "small_sets";
  const PeriodicDomain& dom = mu.domain();
  const int d = dom.dim();
  out.report.tolerance = d - 1 + 0.2;
  if (mu.size() < 2 || scales.size() < 2) {
    out.report.passed = true;
    out.report.details = "insufficient data";
    return out;
  }
  std::vector<double> xs, ys;
  for (double s : scales) {
    if (!(s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "box sides must be positive");
    const auto k = std::max<std::int64_t>(1, std::llround(dom.side() / s));
    std::set<std::array<std::int64_t, kMaxDim>> boxes;
    for (const Atom& a : mu.atoms()) {
      std::array<std::int64_t, kMaxDim> b{0, 0, 0};
      for (int i = 0; i < d; ++i) {
        auto c = static_cast<std::int64_t>(std::floor(a.location[i] / dom.side() * static_cast<double>(k)));
        b[static_cast<std::size_t>(i)] = std::clamp<std::int64_t>(c, 0, k - 1);
      }
      boxes.insert(b);
    }
    xs.push_back(std::log(dom.side() / static_cast<double>(k)));
    ys.push_back(std::log(static_cast<double>(boxes.size())));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t q = 0; q < xs.size(); ++q) {
    mx += xs[q] / n;
    my += ys[q] / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t q = 0; q < xs.size(); ++q) {
    sxy += (xs[q] - mx) * (ys[q] - my);
    sxx += (xs[q] - mx) * (xs[q] - mx);
  }
  if (sxx <= 0.0) {
    out.report.passed = true;
    out.report.details = "insufficient data";
    return out;
  }
  out.sufficient = true;
  out.exponent = -sxy / sxx;
  out.flagged = out.exponent <= d - 1 + 0.2;
  out.report.value = out.exponent;
  out.report.passed = !out.flagged;
  out.report.details = fmt::format("box-counting exponent {:.4f}{}", out.exponent,
                                   out.flagged ? ", support looks lower-dimensional" : "");
  return out;
}

CheckReport check_cyclical_monotonicity(const TransportPlan& plan, const ConcaveCost& theta, double tolerance,
                                        std::size_t exhaustive_limit, std::size_t samples, std::uint64_t seed) {
  CheckReport r;
  r.name = "cyclical_monotonicity";
  r.tolerance = tolerance;
  const auto& es = plan.entries();
  const PeriodicDomain& dom = plan.domain();
  const DiscreteMeasure& mu = plan.source_measure();
  const DiscreteMeasure& nu = plan.target_measure();
  auto c = [&](std::size_t i, std::size_t j) { return theta(dom.distance(mu[i].location, nu[j].location)); };
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t checked = 0;
  auto test = [&](const PlanEntry& a, const PlanEntry& b) {
    const double v = c(a.source, a.target) + c(b.source, b.target) - c(a.source, b.target) - c(b.source, a.target);
    worst = std::max(worst, v);
    ++checked;
  };
  if (es.size() <= exhaustive_limit) {
    for (std::size_t p = 0; p < es.size(); ++p) {
      for (std::size_t q = p + 1; q < es.size(); ++q) test(es[p], es[q]);
    }
  } else {
    CounterRng rng(seed, 0xc1c1);
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t p = rng.next() % es.size();
      const std::size_t q = rng.next() % es.size();
      if (p != q) test(es[p], es[q]);
    }
  }
  r.value = checked == 0 ? 0.0 : worst;
  r.passed = r.value <= tolerance;
  r.details = fmt::format("{} pairs {}", checked, es.size() <= exhaustive_limit ? "exhaustive" : "sampled");
  return r;
}

CheckReport check_threshold(const DisplacementField& field, const ThresholdSplit& split, double max_atom_mass,
                            const DisplacementEncoder& G) {
  CheckReport r;
  r.name = "threshold";
  const double vol = field.domain().volume();
  r.tolerance = max_atom_mass / vol;
  std::vector<std::tuple<double, double, double>> lv;
  for (const Site& s : field.sites()) {
    if (s.moved()) lv.emplace_back(G(field.domain(), s.displacement), s.xi_mass, s.eta_mass);
  }
  std::sort(lv.begin(), lv.end());
  double eta_total = 0.0;
  for (const auto& l : lv) eta_total += std::get<2>(l);
  double i_prev = 0.0;
  double j_prev = eta_total / vol;
  double i_cum = 0.0;
  double eta_cum = 0.0;
  std::size_t violations = 0;
  const double slack = 1e-12 * std::max(1.0, eta_total / vol);
  for (std::size_t k = 0; k < lv.size();) {
    std::size_t e = k;
    while (e < lv.size() && std::get<0>(lv[e]) == std::get<0>(lv[k])) {
      i_cum += std::get<1>(lv[e]);
      eta_cum += std::get<2>(lv[e]);
      ++e;
    }
    const double i_t = i_cum / vol;
    const double j_t = std::max(0.0, eta_total - eta_cum) / vol;
    if (i_t < i_prev - slack || j_t > j_prev + slack) ++violations;
    i_prev = i_t;
    j_prev = j_t;
    k = e;
  }
  r.value = split.residual_imbalance;
  r.passed = violations == 0 && split.residual_imbalance <= r.tolerance;
  r.details = fmt::format("{} levels, {} monotonicity violations, t0 {:.17g}, level fraction {:.6g}", split.levels,
                          violations, split.t0, split.level_fraction);
  return r;
}

CheckReport check_partition(const DiscreteMeasure& xi, const std::vector<std::array<double, 3>>& stage_mass,
                            double tolerance) {
  CheckReport r;
  r.name = "partition";
  r.tolerance = tolerance;
  if (stage_mass.size() != xi.size()) {
    r.value = 1.0;
    r.details = "stage table size differs from xi";
    return r;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const auto& s = stage_mass[i];
    if (s[0] < 0.0 || s[1] < 0.0 || s[2] < 0.0) worst = std::max(worst, 1.0);
    worst = std::max(worst, std::abs(s[0] + s[1] + s[2] - xi[i].mass) / xi[i].mass);
  }
  r.value = worst;
  r.passed = worst <= tolerance;
  r.details = fmt::format("{} atoms", xi.size());
  return r;
}

std::vector<CheckReport> certify_dlvp(const TailMassSequence& a, const ConcaveCost& theta) {
  const double w = a.bin_width;
  const double last_bp = theta.breakpoints().back();
  const auto top = static_cast<std::size_t>(
      std::min(4194304.0, 2.0 * std::max(static_cast<double>(a.truncation()), last_bp / w) + 2.0));
  double worst_curv = -std::numeric_limits<double>::infinity();
  double min_step = std::numeric_limits<double>::infinity();
  double prev2 = theta(0.0);
  double prev = theta(w);
  min_step = std::min(min_step, prev - prev2);
  for (std::size_t n = 2; n <= top; ++n) {
    const double cur = theta(static_cast<double>(n) * w);
    worst_curv = std::max(worst_curv, cur - 2.0 * prev + prev2);
    min_step = std::min(min_step, cur - prev);
    prev2 = prev;
    prev = cur;
  }
  for (double s : theta.slopes()) min_step = std::min(min_step, s * w);
  std::vector<CheckReport> out;
  out.push_back({"dlvp_concavity", worst_curv <= 1e-12, worst_curv, 1e-12,
                 fmt::format("second differences over {} bins", top)});
  out.push_back({"dlvp_monotonicity", min_step > 0.0, min_step, 0.0, "smallest increment per bin"});
  out.push_back({"dlvp_zero", theta(0.0) == 0.0, theta(0.0), 0.0, "theta(0)"});
  out.push_back({"dlvp_divergence", theta.final_slope() > 0.0, theta.final_slope(), 0.0,
                 fmt::format("linear growth past {:.6g}, theta there {:.6g}", last_bp, theta(last_bp))});

  // Direct partial sum, accumulated from the small end with compensation.
  double direct = 0.0;
  double comp = 0.0;
  for (std::size_t n = a.a.size(); n-- > 0;) {
    const double term = a.a[n] * theta(static_cast<double>(n + 1) * w) - comp;
    const double t = direct + term;
    comp = (t - direct) - term;
    direct = t;
  }
  const FinitenessCertificate cert = certify_finiteness(a, theta);
  const double gap = std::abs(cert.total_bound() - direct);
  const double tol = 1e-9 + cert.tail_bound;
  out.push_back({"dlvp_finiteness", cert.finite() && std::abs(cert.partial_sum - direct) <= 1e-9 && gap <= tol, gap,
                 tol,
                 fmt::format("partial sum {:.17g}, direct {:.17g}, tail bound {:.6g}", cert.partial_sum, direct,
                             cert.tail_bound)});
  return out;
}

double max_shared_displacement_mass(const AllocationMap& map) {
  const PeriodicDomain& dom = map.domain();
  std::map<LocationKey, double> by;
  for (const Assignment& a : map.assignments()) {
    const Point v = map.displacement(a);
    if (v == Point{}) continue;
    by[dom.key(dom.wrap(v))] += map.mass(a);
  }
  double best = 0.0;
  for (const auto& [k, m] : by) best = std::max(best, m);
  return best;
}

void write_checks(std::ostream& os, const std::vector<CheckReport>& checks) {
  for (const CheckReport& c : checks) {
    std::string details = c.details;
    std::replace(details.begin(), details.end(), '\n', ' ');
    os << fmt::format("[{}]\npassed = {}\nvalue = {:.17g}\ntolerance = {:.17g}\ndetails = {}\n\n", c.name,
                      c.passed ? "true" : "false", c.value, c.tolerance, details);
  }
}

std::vector<CheckReport> read_checks(std::istream& is) {
  std::vector<CheckReport> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      out.emplace_back();
      out.back().name = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    if (out.empty() || eq == std::string::npos) throw Error(ErrorCode::kParse, "bad check line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 3);
    CheckReport& c = out.back();
    try {
      if (key == "passed") {
        c.passed = val == "true";
      } else if (key == "value") {
        c.value = std::stod(val);
      } else if (key == "tolerance") {
        c.tolerance = std::stod(val);
      } else if (key == "details") {
        c.details = val;
      } else {
        throw Error(ErrorCode::kParse, "unknown check key: " + key);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kParse, "bad check value: " + line);
    }
  }
  return out;
}

}  // namespace rmt
