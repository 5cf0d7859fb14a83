#include "rmt/allocation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace rmt {

Branch parse_branch(const std::string& name) {
  if (name == "auto") return Branch::kAuto;
  if (name == "mutually_singular") return Branch::kMutuallySingular;
  if (name == "no_small_sets") return Branch::kNoSmallSets;
  if (name == "general") return Branch::kGeneral;
  throw Error(ErrorCode::kInvalidArgument, "unknown branch: " + name);
}

std::string to_string(Branch branch) {
  switch (branch) {
    case Branch::kAuto:
      return "auto";
    case Branch::kMutuallySingular:
      return "mutually_singular";
    case Branch::kNoSmallSets:
      return "no_small_sets";
    case Branch::kGeneral:
      return "general";
  }
  return "unknown";
}

Branch select_branch(const DiscreteMeasure& xi, const DiscreteMeasure& eta) {
  if (!xi.empty() && !eta.empty() && mutually_singular(xi, eta)) return Branch::kMutuallySingular;
  if (lebesgue_decompose(eta, xi).singular.empty()) return Branch::kNoSmallSets;
  return Branch::kGeneral;
}

namespace {

void require_equal_intensity(const DiscreteMeasure& xi, const DiscreteMeasure& eta, const SolverOptions& opts) {
  require_same_domain(xi.domain(), eta.domain());
  const double a = intensity(xi);
  const double b = intensity(eta);
  if (std::abs(a - b) > opts.tolerance * std::max(1.0, std::max(a, b))) {
    throw Error(ErrorCode::kIntensityMismatch, fmt::format("intensities differ: {:.17g} vs {:.17g}", a, b));
  }
}

// Optimal coupling of two (nearly) equal-mass measures; the location sets may
// overlap, in which case shared mass simply stays put.
TransportPlan couple(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const ConcaveCost& theta,
                     const SolverOptions& opts) {
  auto mu_ptr = std::make_shared<const DiscreteMeasure>(mu);
  auto nu_ptr = std::make_shared<const DiscreteMeasure>(nu);
  const double tol = opts.tolerance * std::max(1.0, std::max(mu.total_mass(), nu.total_mass()));
  if (nu.total_mass() <= tol || mu.total_mass() <= tol) return TransportPlan(mu_ptr, nu_ptr, {});
  return solve_semicoupling(mu_ptr, nu_ptr, theta, opts);
}

// Adds the assignments of `plan` (over an aggregated source measure whose
// locations are xi atoms) to `out`, with fractions relative to xi.
void collect(const TransportPlan& plan, const DiscreteMeasure& xi, std::vector<Assignment>& out) {
  const DiscreteMeasure& src = plan.source_measure();
  const DiscreteMeasure& tgt = plan.target_measure();
  for (const PlanEntry& e : plan.entries()) {
    const auto i = xi.find(src.key(e.source));
    if (!i) throw Error(ErrorCode::kInvalidArgument, "stage source is not an atom of xi");
    out.push_back({*i, tgt[e.target].location, e.mass / xi[*i].mass});
  }
}

using MassList = std::vector<Atom>;

DiscreteMeasure aggregate(const PeriodicDomain& dom, MassList atoms) {
  std::erase_if(atoms, [](const Atom& a) { return !(a.mass > 0.0); });
  return DiscreteMeasure(dom, std::move(atoms));
}

struct Level {
  double g;
  double xi;
  double eta;
};

}  // namespace

AllocationMap allocate_mutually_singular(const DiscreteMeasure& xi, const DiscreteMeasure& eta,
                                         const ConcaveCost& theta, const SolverOptions& opts) {
  require_equal_intensity(xi, eta, opts);
  if (!mutually_singular(xi, eta)) throw Error(ErrorCode::kNotMutuallySingular, "inputs share atom locations");
  auto xi_ptr = std::make_shared<const DiscreteMeasure>(xi);
  const TransportPlan plan = couple(xi, eta, theta, opts);
  std::vector<Assignment> as;
  collect(plan, xi, as);
  return AllocationMap(xi_ptr, std::move(as));
}

AllocationMap invert_allocation(const AllocationMap& map, const DiscreteMeasure& target) {
  const DiscreteMeasure& src = map.source();
  require_same_domain(src.domain(), target.domain());
  std::vector<std::string> problems;
  const auto used = map.used_fractions();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (std::abs(used[i] - 1.0) > 1e-9) problems.push_back(fmt::format("source {} partially used", i));
  }
  if (!map.single_valued()) problems.push_back("split sources");
  std::vector<std::size_t> owner(target.size(), src.size());
  std::vector<Assignment> inverse;
  for (const Assignment& a : map.assignments()) {
    const auto j = target.find(a.target);
    if (!j) {
      problems.push_back(fmt::format("target of source {} is not a target atom", a.source));
      continue;
    }
    if (owner[*j] != src.size() && owner[*j] != a.source) {
      problems.push_back(fmt::format("target {} shared by sources {} and {}", *j, owner[*j], a.source));
      continue;
    }
    owner[*j] = a.source;
    const double rel = std::abs(map.mass(a) - target[*j].mass) / std::max(1.0, target[*j].mass);
    if (rel > 1e-9) problems.push_back(fmt::format("mass mismatch at target {}", *j));
    inverse.push_back({*j, src[a.source].location, 1.0});
  }
  for (std::size_t j = 0; j < target.size(); ++j) {
    if (owner[j] == src.size()) problems.push_back(fmt::format("target {} not reached", j));
  }
  if (!problems.empty()) {
    std::string msg = "allocation is not invertible:";
    for (std::size_t k = 0; k < std::min<std::size_t>(problems.size(), 8); ++k) msg += " [" + problems[k] + "]";
    throw Error(ErrorCode::kNotInvertible, msg);
  }
  return AllocationMap(target, std::move(inverse));
}

Point DisplacementField::operator()(const Point& x) const {
  const LocationKey k = domain_.key(domain_.wrap(x));
  const Site* best = nullptr;
  for (const Site& s : sites_) {
    if (domain_.key(s.location) != k) continue;
    if (best == nullptr || s.xi_mass + s.eta_mass > best->xi_mass + best->eta_mass) best = &s;
  }
  if (best == nullptr) return domain_.wrap(x);
  return domain_.translate(best->location, best->displacement);
}

double DisplacementField::moved_xi_mass() const {
  double s = 0.0;
  for (const Site& site : sites_) {
    if (site.moved()) s += site.xi_mass;
  }
  return s;
}

double DisplacementField::moved_eta_mass() const {
  double s = 0.0;
  for (const Site& site : sites_) {
    if (site.moved()) s += site.eta_mass;
  }
  return s;
}

DisplacementField combined_F(const DiscreteMeasure& xi, const DiscreteMeasure& eta, const AllocationMap& T) {
  require_same_domain(xi.domain(), eta.domain());
  const PeriodicDomain& dom = xi.domain();
  const DiscreteMeasure& pos = T.source();
  std::vector<Site> sites;
  const auto used = T.used_fractions();
  std::map<LocationKey, double> received;
  for (const Assignment& a : T.assignments()) received[dom.key(a.target)] += T.mass(a);

  std::set<LocationKey> covered;
  for (const Assignment& a : T.assignments()) {
    const Point x = pos[a.source].location;
    const double share = a.fraction / used[a.source];
    sites.push_back({x, dom.displacement(x, a.target), share * xi.mass_at(x), share * eta.mass_at(x)});
    const double share_y = T.mass(a) / received[dom.key(a.target)];
    sites.push_back({a.target, dom.displacement(a.target, x), share_y * xi.mass_at(a.target),
                     share_y * eta.mass_at(a.target)});
    covered.insert(dom.key(x));
    covered.insert(dom.key(a.target));
  }
  auto add_fixed = [&](const DiscreteMeasure& m) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (covered.contains(m.key(i))) continue;
      covered.insert(m.key(i));
      sites.push_back({m[i].location, Point{}, xi.mass_at(m[i].location), eta.mass_at(m[i].location)});
    }
  };
  add_fixed(xi);
  add_fixed(eta);
  return DisplacementField(dom, std::move(sites));
}

double interleave_encode(const PeriodicDomain& domain, const Point& v) {
  const int d = domain.dim();
  const int bits = d == 1 ? 50 : d == 2 ? 24 : 15;
  const double L = domain.side();
  const double scale = std::ldexp(1.0, bits - 2);
  std::array<std::uint64_t, kMaxDim> z{0, 0, 0};
  for (int i = 0; i < d; ++i) {
    if (!(std::abs(v[i]) <= L)) throw Error(ErrorCode::kInvalidArgument, "displacement exceeds the fixed-point range");
    auto q = static_cast<std::int64_t>(std::llround(v[i] / L * scale));
    // Fold onto [-L/2, L/2) so both images of a half-period step agree.
    const std::int64_t period = std::int64_t{1} << (bits - 2);
    q = ((q % period) + period + period / 2) % period - period / 2;
    z[static_cast<std::size_t>(i)] =
        q >= 0 ? static_cast<std::uint64_t>(q) << 1 : (static_cast<std::uint64_t>(-q) << 1) - 1;
  }
  std::uint64_t u = 0;
  for (int b = bits - 1; b >= 0; --b) {
    for (int i = 0; i < d; ++i) u = (u << 1) | ((z[static_cast<std::size_t>(i)] >> b) & 1U);
  }
  const auto s = static_cast<std::int64_t>(u >> 1) ^ -static_cast<std::int64_t>(u & 1U);
  return std::ldexp(static_cast<double>(s), -(bits * d - 1));
}

double profile_I(const DisplacementField& field, const DisplacementEncoder& G, double t) {
  double s = 0.0;
  for (const Site& site : field.sites()) {
    if (site.moved() && G(field.domain(), site.displacement) <= t) s += site.xi_mass;
  }
  return s / field.domain().volume();
}

double profile_J(const DisplacementField& field, const DisplacementEncoder& G, double t) {
  double s = 0.0;
  for (const Site& site : field.sites()) {
    if (site.moved() && G(field.domain(), site.displacement) > t) s += site.eta_mass;
  }
  return s / field.domain().volume();
}

namespace {

std::vector<Level> levels_of(const DisplacementField& field, const DisplacementEncoder& G) {
  std::vector<Level> raw;
  for (const Site& s : field.sites()) {
    if (s.moved()) raw.push_back({G(field.domain(), s.displacement), s.xi_mass, s.eta_mass});
  }
  std::sort(raw.begin(), raw.end(), [](const Level& a, const Level& b) { return a.g < b.g; });
  std::vector<Level> out;
  for (const Level& l : raw) {
    if (!out.empty() && out.back().g == l.g) {
      out.back().xi += l.xi;
      out.back().eta += l.eta;
    } else {
      out.push_back(l);
    }
  }
  return out;
}

}  // namespace

ThresholdSplit find_threshold(const DisplacementField& field, const DisplacementEncoder& G) {
  ThresholdSplit split;
  const std::vector<Level> levels = levels_of(field, G);
  split.levels = levels.size();
  if (levels.empty()) return split;
  split.trivial = false;
  double eta_total = 0.0;
  for (const Level& l : levels) eta_total += l.eta;
  double i_below = 0.0;
  double eta_upto = 0.0;
  std::size_t k = 0;
  for (; k < levels.size(); ++k) {
    const double i_at = i_below + levels[k].xi;
    const double j_at = k + 1 == levels.size() ? 0.0 : eta_total - (eta_upto + levels[k].eta);
    if (i_at >= j_at) break;
    i_below = i_at;
    eta_upto += levels[k].eta;
  }
  k = std::min(k, levels.size() - 1);
  const Level& lv = levels[k];
  const double j_above = k + 1 == levels.size() ? 0.0 : std::max(0.0, eta_total - (eta_upto + lv.eta));
  const double width = lv.xi + lv.eta;
  double alpha = width > 0.0 ? (j_above + lv.eta - i_below) / width : 1.0;
  alpha = std::clamp(alpha, 0.0, 1.0);
  split.t0 = lv.g;
  split.level_fraction = alpha;
  split.residual_imbalance =
      std::abs(i_below + alpha * lv.xi - (j_above + (1.0 - alpha) * lv.eta)) / field.domain().volume();
  return split;
}

AllocationResult allocate_no_small_sets(const DiscreteMeasure& xi, const DiscreteMeasure& eta,
                                        const ConcaveCost& theta, const SolverOptions& opts,
                                        const DisplacementEncoder& G) {
  require_equal_intensity(xi, eta, opts);
  const PeriodicDomain& dom = xi.domain();
  AllocationResult result;
  result.branch = Branch::kNoSmallSets;
  result.stage_mass.assign(xi.size(), {0.0, 0.0, 0.0});

  const SignedDecomposition jd = jordan_decompose(xi, eta);
  AllocationMap T(jd.positive_part, {});
  if (!jd.positive_part.empty() && !jd.negative_part.empty()) {
    const TransportPlan plan = couple(jd.positive_part, jd.negative_part, theta, opts);
    std::vector<Assignment> as;
    for (const PlanEntry& e : plan.entries()) {
      as.push_back({e.source, jd.negative_part[e.target].location, e.mass / jd.positive_part[e.source].mass});
    }
    T = AllocationMap(jd.positive_part, std::move(as));
  }
  result.field = combined_F(xi, eta, T);
  const DisplacementField& field = result.field;
  result.threshold = find_threshold(field, G);
  const double t0 = result.threshold.t0;
  const double alpha = result.threshold.level_fraction;

  MassList s1_src, s1_tgt, s2_src, s2_tgt;
  std::vector<Assignment> as;
  for (const Site& s : field.sites()) {
    const auto i = s.xi_mass > 0.0 ? xi.find(s.location) : std::nullopt;
    if (!s.moved()) {
      if (i) {
        as.push_back({*i, s.location, s.xi_mass / xi[*i].mass});
        result.stage_mass[*i][2] += s.xi_mass;
      }
      continue;
    }
    const double g = G(dom, s.displacement);
    const double low = g < t0 ? 1.0 : g == t0 ? alpha : 0.0;
    s1_src.push_back({s.location, low * s.xi_mass});
    s1_tgt.push_back({s.location, (1.0 - low) * s.eta_mass});
    s2_src.push_back({s.location, (1.0 - low) * s.xi_mass});
    s2_tgt.push_back({s.location, low * s.eta_mass});
    if (i) {
      result.stage_mass[*i][0] += low * s.xi_mass;
      result.stage_mass[*i][1] += (1.0 - low) * s.xi_mass;
    }
  }
  collect(couple(aggregate(dom, s1_src), aggregate(dom, s1_tgt), theta, opts), xi, as);
  collect(couple(aggregate(dom, s2_src), aggregate(dom, s2_tgt), theta, opts), xi, as);
  result.map = AllocationMap(std::make_shared<const DiscreteMeasure>(xi), std::move(as));
  result.splits = split_report(result.map);
  return result;
}

AllocationResult allocate_general(const DiscreteMeasure& xi, const DiscreteMeasure& eta, const ConcaveCost& theta,
                                  const SolverOptions& opts, const DisplacementEncoder& G) {
  require_equal_intensity(xi, eta, opts);
  const PeriodicDomain& dom = xi.domain();
  const LebesgueDecomposition lb = lebesgue_decompose(eta, xi);
  if (lb.singular.empty()) {
    AllocationResult r = allocate_no_small_sets(xi, eta, theta, opts, G);
    r.branch = Branch::kGeneral;
    return r;
  }
  AllocationResult result;
  result.branch = Branch::kGeneral;
  result.stage_mass.assign(xi.size(), {0.0, 0.0, 0.0});

  // f * xi is the first marginal of the semicoupling onto the singular part;
  // each plan entry is a site of xi carrying its share of xi_i.
  const TransportPlan semi = solve_semicoupling(xi, lb.singular, theta, opts);
  const auto used = semi.source_used();
  struct GSite {
    std::size_t i;
    double g;
    double mass;
  };
  std::vector<GSite> sites;
  for (const PlanEntry& e : semi.entries()) {
    const double g = G(dom, semi.displacement(e));
    sites.push_back({e.source, g, xi[e.source].mass * e.mass / used[e.source]});
  }
  std::vector<Level> levels;
  {
    std::vector<GSite> sorted = sites;
    std::sort(sorted.begin(), sorted.end(), [](const GSite& a, const GSite& b) { return a.g < b.g; });
    for (const GSite& s : sorted) {
      if (!levels.empty() && levels.back().g == s.g) {
        levels.back().xi += s.mass;
      } else {
        levels.push_back({s.g, s.mass, 0.0});
      }
    }
  }
  const double target = lb.singular.total_mass();
  double below = 0.0;
  std::size_t k = 0;
  while (k + 1 < levels.size() && below + levels[k].xi < target) below += levels[k++].xi;
  ThresholdSplit& th = result.threshold;
  th.trivial = false;
  th.levels = levels.size();
  th.t0 = levels[k].g;
  th.level_fraction = std::clamp((target - below) / levels[k].xi, 0.0, 1.0);
  th.residual_imbalance = std::abs(below + th.level_fraction * levels[k].xi - target) / dom.volume();

  std::vector<double> in_a(xi.size(), 0.0);
  for (const GSite& s : sites) {
    const double low = s.g < th.t0 ? 1.0 : s.g == th.t0 ? th.level_fraction : 0.0;
    in_a[s.i] += low * s.mass;
  }
  MassList a_part, rest;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    in_a[i] = std::min(in_a[i], xi[i].mass);
    double r = xi[i].mass - in_a[i];
    if (r <= 1e-15 * xi[i].mass) {
      in_a[i] = xi[i].mass;
      r = 0.0;
    }
    a_part.push_back({xi[i].location, in_a[i]});
    rest.push_back({xi[i].location, r});
    result.stage_mass[i][0] = in_a[i];
    result.stage_mass[i][1] = r;
  }
  std::vector<Assignment> as;
  collect(couple(aggregate(dom, a_part), lb.singular, theta, opts), xi, as);

  const DiscreteMeasure rest_measure = aggregate(dom, rest);
  if (!rest_measure.empty() || !lb.absolutely_continuous.empty()) {
    const AllocationResult inner = allocate_no_small_sets(rest_measure, lb.absolutely_continuous, theta, opts, G);
    result.field = inner.field;
    const DiscreteMeasure& src = inner.map.source();
    for (const Assignment& a : inner.map.assignments()) {
      const auto i = xi.find(src.key(a.source));
      if (!i) throw Error(ErrorCode::kInvalidArgument, "stage source is not an atom of xi");
      as.push_back({*i, a.target, a.fraction * src[a.source].mass / xi[*i].mass});
    }
  }
  result.map = AllocationMap(std::make_shared<const DiscreteMeasure>(xi), std::move(as));
  result.splits = split_report(result.map);
  return result;
}

AllocationResult allocate(const DiscreteMeasure& xi, const DiscreteMeasure& eta, const ConcaveCost& theta,
                          Branch branch, const SolverOptions& opts, const DisplacementEncoder& G) {
  if (branch == Branch::kAuto) branch = select_branch(xi, eta);
  switch (branch) {
    case Branch::kMutuallySingular: {
      AllocationResult r;
      r.branch = branch;
      r.map = allocate_mutually_singular(xi, eta, theta, opts);
      r.stage_mass.assign(xi.size(), {0.0, 0.0, 0.0});
      for (std::size_t i = 0; i < xi.size(); ++i) r.stage_mass[i][0] = xi[i].mass;
      r.splits = split_report(r.map);
      return r;
    }
    case Branch::kNoSmallSets:
      return allocate_no_small_sets(xi, eta, theta, opts, G);
    case Branch::kGeneral:
    case Branch::kAuto:
      return allocate_general(xi, eta, theta, opts, G);
  }
  throw Error(ErrorCode::kInvalidArgument, "unhandled branch");
}

double allocation_cost(const AllocationMap& map, const ConcaveCost& theta) {
  double s = 0.0;
  for (const Assignment& a : map.assignments()) s += map.mass(a) * theta(map.domain().norm(map.displacement(a)));
  return s / map.domain().volume();
}

SplitReport split_report(const AllocationMap& map) {
  SplitReport r;
  const auto& as = map.assignments();
  for (std::size_t k = 0; k < as.size();) {
    std::size_t e = k;
    double used = 0.0;
    double largest = 0.0;
    while (e < as.size() && as[e].source == as[k].source) {
      used += map.mass(as[e]);
      largest = std::max(largest, map.mass(as[e]));
      ++e;
    }
    if (e - k > 1) {
      r.sources.push_back(as[k].source);
      r.split_mass += used - largest;
      r.split_source_mass += used;
    }
    k = e;
  }
  return r;
}

void write_report(std::ostream& os, const PipelineReport& r) {
  os << fmt::format("branch = {}\n", r.branch);
  os << fmt::format("cost = {:.17g}\n", r.cost);
  os << fmt::format("xi_intensity = {:.17g}\n", r.xi_intensity);
  os << fmt::format("eta_intensity = {:.17g}\n", r.eta_intensity);
  os << fmt::format("balance_error = {:.17g}\n", r.balance_error);
  os << fmt::format("balance_budget = {:.17g}\n", r.balance_budget);
  os << fmt::format("residual_imbalance = {:.17g}\n", r.residual_imbalance);
  os << fmt::format("split_mass = {:.17g}\n", r.split_mass);
  os << fmt::format("split_sources = {}\n", r.split_sources);
  os << fmt::format("t0 = {:.17g}\n", r.t0);
  os << fmt::format("level_fraction = {:.17g}\n", r.level_fraction);
  os << fmt::format("stage_mass = {:.17g} {:.17g} {:.17g}\n", r.stage_mass[0], r.stage_mass[1], r.stage_mass[2]);
}

PipelineReport read_report(std::istream& is) {
  PipelineReport r;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw Error(ErrorCode::kParse, "bad report line: " + line);
    const std::string key = line.substr(0, eq);
    std::istringstream v(line.substr(eq + 3));
    bool ok = true;
    if (key == "branch") {
      ok = static_cast<bool>(v >> r.branch);
    } else if (key == "cost") {
      ok = static_cast<bool>(v >> r.cost);
    } else if (key == "xi_intensity") {
      ok = static_cast<bool>(v >> r.xi_intensity);
    } else if (key == "eta_intensity") {
      ok = static_cast<bool>(v >> r.eta_intensity);
    } else if (key == "balance_error") {
      ok = static_cast<bool>(v >> r.balance_error);
    } else if (key == "balance_budget") {
      ok = static_cast<bool>(v >> r.balance_budget);
    } else if (key == "residual_imbalance") {
      ok = static_cast<bool>(v >> r.residual_imbalance);
    } else if (key == "split_mass") {
      ok = static_cast<bool>(v >> r.split_mass);
    } else if (key == "split_sources") {
      ok = static_cast<bool>(v >> r.split_sources);
    } else if (key == "t0") {
      ok = static_cast<bool>(v >> r.t0);
    } else if (key == "level_fraction") {
      ok = static_cast<bool>(v >> r.level_fraction);
    } else if (key == "stage_mass") {
      ok = static_cast<bool>(v >> r.stage_mass[0] >> r.stage_mass[1] >> r.stage_mass[2]);
    } else {
      throw Error(ErrorCode::kParse, "unknown report key: " + key);
    }
    if (!ok) throw Error(ErrorCode::kParse, "bad report value: " + line);
  }
  return r;
}

}  // namespace rmt
