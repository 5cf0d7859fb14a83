#include "rmt/measure.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace rmt {

DiscreteMeasure::DiscreteMeasure(PeriodicDomain domain, std::vector<Atom> atoms) : domain_(domain) {
  std::map<LocationKey, Atom> merged;
  for (Atom a : atoms) {
    if (!std::isfinite(a.mass) || a.mass < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "atom masses must be finite and nonnegative");
    }
    for (int i = 0; i < domain_.dim(); ++i) {
      if (!std::isfinite(a.location[i])) {
        throw Error(ErrorCode::kInvalidArgument, "atom location is not finite");
      }
    }
    if (a.mass == 0.0) continue;
    a.location = domain_.wrap(a.location);
    auto [it, inserted] = merged.try_emplace(domain_.key(a.location), a);
    if (!inserted) it->second.mass += a.mass;
  }
  atoms_.reserve(merged.size());
  keys_.reserve(merged.size());
  for (const auto& [k, a] : merged) {
    keys_.push_back(k);
    atoms_.push_back(a);
    total_ += a.mass;
    if (cell_aligned_ && !domain_.is_cell_center(a.location)) cell_aligned_ = false;
  }
}

double DiscreteMeasure::max_mass() const noexcept {
  double m = 0.0;
  for (const Atom& a : atoms_) m = std::max(m, a.mass);
  return m;
}

std::optional<std::size_t> DiscreteMeasure::find(const LocationKey& key) const {
  auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - keys_.begin());
}

double DiscreteMeasure::mass_at(const Point& p) const {
  auto i = find(p);
  return i ? atoms_[*i].mass : 0.0;
}

std::vector<double> DiscreteMeasure::masses() const {
  std::vector<double> m;
  m.reserve(atoms_.size());
  for (const Atom& a : atoms_) m.push_back(a.mass);
  return m;
}

std::vector<Point> DiscreteMeasure::locations() const {
  std::vector<Point> p;
  p.reserve(atoms_.size());
  for (const Atom& a : atoms_) p.push_back(a.location);
  return p;
}

double intensity(const DiscreteMeasure& mu) { return mu.total_mass() / mu.domain().volume(); }

double mass_tolerance(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  return 1e-12 * std::max({1.0, a.total_mass(), b.total_mass()});
}

namespace {

// Walks the union of both supports in key order, calling f(location, a_mass, b_mass).
template <typename F>
void merge_walk(const DiscreteMeasure& a, const DiscreteMeasure& b, F&& f) {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a.key(i) < b.key(j))) {
      f(a[i].location, a[i].mass, 0.0);
      ++i;
    } else if (i == a.size() || b.key(j) < a.key(i)) {
      f(b[j].location, 0.0, b[j].mass);
      ++j;
    } else {
      f(a[i].location, a[i].mass, b[j].mass);
      ++i;
      ++j;
    }
  }
}

}  // namespace

SignedDecomposition jordan_decompose(const DiscreteMeasure& xi, const DiscreteMeasure& eta) {
  require_same_domain(xi.domain(), eta.domain());
  const double tol = mass_tolerance(xi, eta);
  std::vector<Atom> pos;
  std::vector<Atom> neg;
  std::vector<Atom> common;
  merge_walk(xi, eta, [&](const Point& x, double a, double b) {
    const double diff = a - b;
    if (std::abs(diff) <= tol && a > 0.0 && b > 0.0) {
      common.push_back({x, std::min(a, b)});
      return;
    }
    if (diff > 0.0) pos.push_back({x, diff});
    if (diff < 0.0) neg.push_back({x, -diff});
    const double c = std::min(a, b);
    if (c > 0.0) common.push_back({x, c});
  });
  return {DiscreteMeasure(xi.domain(), std::move(pos)), DiscreteMeasure(xi.domain(), std::move(neg)),
          DiscreteMeasure(xi.domain(), std::move(common))};
}

LebesgueDecomposition lebesgue_decompose(const DiscreteMeasure& eta, const DiscreteMeasure& xi) {
  require_same_domain(xi.domain(), eta.domain());
  std::vector<Atom> ac;
  std::vector<Atom> sing;
  for (std::size_t j = 0; j < eta.size(); ++j) {
    if (xi.find(eta.key(j))) {
      ac.push_back(eta[j]);
    } else {
      sing.push_back(eta[j]);
    }
  }
  return {DiscreteMeasure(eta.domain(), std::move(ac)), DiscreteMeasure(eta.domain(), std::move(sing))};
}

DiscreteMeasure shift(const DiscreteMeasure& mu, const Point& by) {
  const PeriodicDomain& dom = mu.domain();
  std::vector<Atom> out;
  out.reserve(mu.size());
  for (const Atom& a : mu.atoms()) {
    Point p = dom.translate(a.location, by);
    if (mu.cell_aligned() && dom.is_cell_center(p)) p = dom.snap(p);
    out.push_back({p, a.mass});
  }
  return DiscreteMeasure(dom, std::move(out));
}

bool mutually_singular(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_domain(mu.domain(), nu.domain());
  bool disjoint = true;
  merge_walk(mu, nu, [&](const Point&, double a, double b) {
    if (a > 0.0 && b > 0.0) disjoint = false;
  });
  return disjoint;
}

DiscreteMeasure scaled(const DiscreteMeasure& mu, double factor) {
  std::vector<Atom> out(mu.atoms().begin(), mu.atoms().end());
  for (Atom& a : out) a.mass *= factor;
  return DiscreteMeasure(mu.domain(), std::move(out));
}

DiscreteMeasure sum(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  require_same_domain(a.domain(), b.domain());
  std::vector<Atom> out;
  out.reserve(a.size() + b.size());
  merge_walk(a, b, [&](const Point& x, double ma, double mb) { out.push_back({x, ma + mb}); });
  return DiscreteMeasure(a.domain(), std::move(out));
}

double max_atomwise_difference(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  require_same_domain(a.domain(), b.domain());
  double worst = 0.0;
  merge_walk(a, b, [&](const Point&, double ma, double mb) { worst = std::max(worst, std::abs(ma - mb)); });
  return worst;
}

void write_measure(std::ostream& os, const DiscreteMeasure& mu) {
  const PeriodicDomain& dom = mu.domain();
  os << fmt::format("domain {} {:.17g} {}\n", dom.dim(), dom.side(), dom.resolution());
  for (const Atom& a : mu.atoms()) {
    std::string line;
    for (int i = 0; i < dom.dim(); ++i) line += fmt::format("{:.17g} ", a.location[i]);
    line += fmt::format("{:.17g}\n", a.mass);
    os << line;
  }
}

DiscreteMeasure read_measure(std::istream& is) {
  std::string line;
  PeriodicDomain dom;
  bool have_header = false;
  std::vector<Atom> atoms;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!have_header) {
      std::string tag;
      int d = 0;
      double side = 0.0;
      int n = 0;
      if (!(ls >> tag >> d >> side >> n) || tag != "domain") {
        throw Error(ErrorCode::kParse, "measure file must start with 'domain d L n'");
      }
      dom = PeriodicDomain(d, side, n);
      have_header = true;
      continue;
    }
    Atom a;
    for (int i = 0; i < dom.dim(); ++i) {
      if (!(ls >> a.location[i])) throw Error(ErrorCode::kParse, "bad atom line: " + line);
    }
    if (!(ls >> a.mass)) throw Error(ErrorCode::kParse, "bad atom line: " + line);
    atoms.push_back(a);
  }
  if (!have_header) throw Error(ErrorCode::kParse, "missing domain header");
  return DiscreteMeasure(dom, std::move(atoms));
}

}  // namespace rmt
