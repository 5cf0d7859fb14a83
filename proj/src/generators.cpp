#include "rmt/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rmt {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Streams used inside one realization.
constexpr std::uint64_t kCountStream = 1;
constexpr std::uint64_t kPointStream = 2;
constexpr std::uint64_t kSegmentStream = 3;

Point uniform_point(CounterRng& rng, const PeriodicDomain& dom) {
  Point p;
  for (int i = 0; i < dom.dim(); ++i) p[i] = rng.uniform() * dom.side();
  return dom.wrap(p);
}

Point random_direction(CounterRng& rng, int dim) {
  Point v;
  if (dim == 1) {
    v[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    return v;
  }
  double norm = 0.0;
  do {
    norm = 0.0;
    for (int i = 0; i < dim; ++i) {
      v[i] = rng.normal();
      norm += v[i] * v[i];
    }
  } while (norm < 1e-24);
  norm = std::sqrt(norm);
  for (int i = 0; i < dim; ++i) v[i] /= norm;
  return v;
}

std::vector<Point> poisson_points(const GeneratorSpec& spec, double point_intensity, const PeriodicDomain& dom) {
  CounterRng count_rng(spec.seed, kCountStream);
  CounterRng point_rng(spec.seed, kPointStream);
  const auto n = count_rng.poisson(point_intensity * dom.volume());
  std::vector<Point> pts;
  pts.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) pts.push_back(uniform_point(point_rng, dom));
  return pts;
}

DiscreteMeasure normalized(const PeriodicDomain& dom, std::vector<double> cell_mass, double total) {
  double s = 0.0;
  for (double m : cell_mass) s += m;
  std::vector<Atom> atoms;
  if (s <= 0.0) return DiscreteMeasure(dom);
  const double f = total / s;
  for (std::size_t c = 0; c < cell_mass.size(); ++c) {
    if (cell_mass[c] > 0.0) atoms.push_back({dom.cell_center(c), cell_mass[c] * f});
  }
  return DiscreteMeasure(dom, std::move(atoms));
}

DiscreteMeasure smoothed_density(const GeneratorSpec& spec, const PeriodicDomain& dom) {
  const double sigma = spec.bandwidth > 0.0 ? spec.bandwidth : dom.side() / 16.0;
  const double lambda_pts = spec.point_intensity > 0.0 ? spec.point_intensity : spec.intensity;
  const auto pts = poisson_points(spec, lambda_pts, dom);
  const int n = dom.resolution();
  const double h = dom.pitch();
  const int reach = static_cast<int>(std::ceil(6.0 * sigma / h));
  const bool full = 2 * reach + 1 >= n;
  const int lo = full ? 0 : -reach;
  const int hi = full ? n - 1 : reach;
  const int span = hi - lo + 1;
  std::vector<double> cell_mass(dom.cell_count(), 0.0);
  std::vector<std::pair<std::size_t, double>> weights;
  for (const Point& p : pts) {
    weights.clear();
    const std::size_t home = dom.cell_of(p);
    std::array<int, kMaxDim> base{0, 0, 0};
    std::size_t rest = home;
    for (int i = 0; i < dom.dim(); ++i) {
      base[static_cast<std::size_t>(i)] = static_cast<int>(rest % static_cast<std::size_t>(n));
      rest /= static_cast<std::size_t>(n);
    }
    std::size_t combos = 1;
    for (int i = 0; i < dom.dim(); ++i) combos *= static_cast<std::size_t>(span);
    double wsum = 0.0;
    for (std::size_t c = 0; c < combos; ++c) {
      std::size_t r = c;
      std::size_t cell = 0;
      std::size_t stride = 1;
      for (int i = 0; i < dom.dim(); ++i) {
        const int off = lo + static_cast<int>(r % static_cast<std::size_t>(span));
        r /= static_cast<std::size_t>(span);
        int idx = full ? off : base[static_cast<std::size_t>(i)] + off;
        idx = ((idx % n) + n) % n;
        cell += static_cast<std::size_t>(idx) * stride;
        stride *= static_cast<std::size_t>(n);
      }
      const double dist = dom.distance(p, dom.cell_center(cell));
      if (dist > 6.0 * sigma) continue;
      const double w = std::exp(-0.5 * (dist / sigma) * (dist / sigma));
      weights.emplace_back(cell, w);
      wsum += w;
    }
    if (wsum <= 0.0) {
      cell_mass[home] += 1.0;
      continue;
    }
    for (const auto& [cell, w] : weights) cell_mass[cell] += w / wsum;
  }
  return normalized(dom, std::move(cell_mass), spec.intensity * dom.volume());
}

DiscreteMeasure segment_singular(const GeneratorSpec& spec, const PeriodicDomain& dom) {
  const double length = spec.segment_length > 0.0 ? spec.segment_length : 0.5 * dom.side();
  CounterRng rng(spec.seed, kSegmentStream);
  std::vector<double> cell_mass(dom.cell_count(), 0.0);
  const double step = dom.pitch() / 8.0;
  const auto samples = static_cast<long>(std::ceil(length / step));
  for (int s = 0; s < spec.segment_count; ++s) {
    const Point start = uniform_point(rng, dom);
    const Point dir = random_direction(rng, dom.dim());
    const double ds = length / static_cast<double>(samples);
    for (long q = 0; q < samples; ++q) {
      const double t = (static_cast<double>(q) + 0.5) * ds;
      cell_mass[dom.cell_of(dom.translate(start, dom.scale(dir, t)))] += ds;
    }
  }
  return normalized(dom, std::move(cell_mass), spec.intensity * dom.volume());
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix_seed(seed, stream)) {}

std::uint64_t CounterRng::next() { return splitmix64(key_ ^ splitmix64(counter_++)); }

double CounterRng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double CounterRng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw Error(ErrorCode::kInvalidArgument, "bad Poisson mean");
  std::uint64_t total = 0;
  // Poisson variables are additive; keep each inversion chunk numerically safe.
  while (mean > 400.0) {
    total += poisson(400.0);
    mean -= 400.0;
  }
  const double u = uniform();
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t x = 0;
  while (u > cdf && x < 100000) {
    ++x;
    p *= mean / static_cast<double>(x);
    cdf += p;
    if (p == 0.0 && cdf < u) break;
  }
  return total + x;
}

GeneratorKind parse_generator_kind(const std::string& name) {
  if (name == "poisson") return GeneratorKind::kPoisson;
  if (name == "smoothed_density") return GeneratorKind::kSmoothedDensity;
  if (name == "segment_singular") return GeneratorKind::kSegmentSingular;
  if (name == "lebesgue_grid") return GeneratorKind::kLebesgueGrid;
  if (name == "mixture") return GeneratorKind::kMixture;
  throw Error(ErrorCode::kInvalidArgument, "unknown generator kind: " + name);
}

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::kPoisson:
      return "poisson";
    case GeneratorKind::kSmoothedDensity:
      return "smoothed_density";
    case GeneratorKind::kSegmentSingular:
      return "segment_singular";
    case GeneratorKind::kLebesgueGrid:
      return "lebesgue_grid";
    case GeneratorKind::kMixture:
      return "mixture";
  }
  return "unknown";
}

void validate(const GeneratorSpec& spec) {
  if (!(spec.intensity > 0.0) || !std::isfinite(spec.intensity)) {
    throw Error(ErrorCode::kInvalidArgument, "intensity must be positive");
  }
  if (spec.point_intensity < 0.0 || spec.bandwidth < 0.0 || spec.segment_length < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "generator parameters must be nonnegative");
  }
  if (spec.kind == GeneratorKind::kSegmentSingular && spec.segment_count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "segment count must be positive");
  }
  if (spec.kind == GeneratorKind::kMixture) {
    if (spec.components.empty()) throw Error(ErrorCode::kInvalidArgument, "mixture needs components");
    for (const MixtureComponent& c : spec.components) {
      if (!(c.weight > 0.0)) throw Error(ErrorCode::kInvalidArgument, "mixture weights must be positive");
      validate(c.spec);
    }
  }
}

DiscreteMeasure generate(const GeneratorSpec& spec, const PeriodicDomain& domain) {
  validate(spec);
  switch (spec.kind) {
    case GeneratorKind::kPoisson: {
      std::vector<Atom> atoms;
      for (const Point& p : poisson_points(spec, spec.intensity, domain)) atoms.push_back({p, 1.0});
      return DiscreteMeasure(domain, std::move(atoms));
    }
    case GeneratorKind::kSmoothedDensity:
      return smoothed_density(spec, domain);
    case GeneratorKind::kSegmentSingular:
      return segment_singular(spec, domain);
    case GeneratorKind::kLebesgueGrid: {
      std::vector<Atom> atoms;
      const double m = spec.intensity * std::pow(domain.pitch(), domain.dim());
      for (std::size_t c = 0; c < domain.cell_count(); ++c) atoms.push_back({domain.cell_center(c), m});
      return DiscreteMeasure(domain, std::move(atoms));
    }
    case GeneratorKind::kMixture: {
      DiscreteMeasure out(domain);
      for (std::size_t i = 0; i < spec.components.size(); ++i) {
        GeneratorSpec part = spec.components[i].spec;
        part.seed = mix_seed(spec.seed, 100 + i);
        out = sum(out, scaled(generate(part, domain), spec.components[i].weight));
      }
      return out;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unhandled generator kind");
}

namespace {

bool even_cell(const PeriodicDomain& dom, const Point& p) {
  std::size_t cell = dom.cell_of(p);
  std::size_t parity = 0;
  for (int i = 0; i < dom.dim(); ++i) {
    parity += cell % static_cast<std::size_t>(dom.resolution());
    cell /= static_cast<std::size_t>(dom.resolution());
  }
  return parity % 2 == 0;
}

DiscreteMeasure keep_parity(const DiscreteMeasure& mu, bool even) {
  std::vector<Atom> atoms;
  for (const Atom& a : mu.atoms()) {
    if (even_cell(mu.domain(), a.location) == even) atoms.push_back(a);
  }
  return DiscreteMeasure(mu.domain(), std::move(atoms));
}

DiscreteMeasure with_total(const DiscreteMeasure& mu, double total) {
  if (total == 0.0) return DiscreteMeasure(mu.domain());
  if (mu.total_mass() <= 0.0) throw Error(ErrorCode::kInvalidArgument, "coupled pair component came out empty");
  return scaled(mu, total / mu.total_mass());
}

}  // namespace

std::pair<DiscreteMeasure, DiscreteMeasure> coupled_pair(const GeneratorSpec& spec_xi, const GeneratorSpec& spec_eta,
                                                         double common_weight, std::uint64_t seed,
                                                         const PeriodicDomain& domain) {
  if (!(common_weight >= 0.0 && common_weight <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "common weight must lie in [0, 1]");
  }
  const double total = spec_xi.intensity * domain.volume();
  GeneratorSpec sc = spec_xi;
  sc.seed = mix_seed(seed, 0);
  GeneratorSpec sx = spec_xi;
  sx.seed = mix_seed(seed, 1);
  GeneratorSpec se = spec_eta;
  se.seed = mix_seed(seed, 2);

  DiscreteMeasure common(domain);
  if (common_weight > 0.0) common = with_total(generate(sc, domain), common_weight * total);
  if (common_weight == 1.0) return {common, common};

  DiscreteMeasure xi_part = generate(sx, domain);
  DiscreteMeasure eta_part = generate(se, domain);
  if (xi_part.cell_aligned() && eta_part.cell_aligned()) {
    xi_part = keep_parity(xi_part, true);
    eta_part = keep_parity(eta_part, false);
  }
  const double rest = (1.0 - common_weight) * total;
  xi_part = with_total(xi_part, rest);
  eta_part = with_total(eta_part, rest);
  return {sum(common, xi_part), sum(common, eta_part)};
}

}  // namespace rmt
