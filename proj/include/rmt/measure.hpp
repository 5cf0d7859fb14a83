#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "rmt/domain.hpp"

namespace rmt {

struct Atom {
  Point location;
  double mass = 0.0;
};

/// Finite weighted point set on a periodic domain.
///
/// Atoms are kept sorted lexicographically by location. Locations closer than
/// 1e-9 pitch are merged at construction, zero masses are dropped, and
/// negative or non-finite masses are rejected. Immutable once built.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  explicit DiscreteMeasure(PeriodicDomain domain) : domain_(domain) {}
  DiscreteMeasure(PeriodicDomain domain, std::vector<Atom> atoms);

  const PeriodicDomain& domain() const noexcept { return domain_; }
  std::span<const Atom> atoms() const noexcept { return atoms_; }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }
  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }

  double total_mass() const noexcept { return total_; }
  double max_mass() const noexcept;
  /// True when every atom sits at a grid cell center.
  bool cell_aligned() const noexcept { return cell_aligned_; }

  const LocationKey& key(std::size_t i) const { return keys_[i]; }
  /// Index of the atom at `key`, if any.
  std::optional<std::size_t> find(const LocationKey& key) const;
  std::optional<std::size_t> find(const Point& p) const { return find(domain_.key(domain_.wrap(p))); }
  /// Mass at a location (0 if no atom there).
  double mass_at(const Point& p) const;

  std::vector<double> masses() const;
  std::vector<Point> locations() const;

 private:
  PeriodicDomain domain_;
  std::vector<Atom> atoms_;
  std::vector<LocationKey> keys_;
  double total_ = 0.0;
  bool cell_aligned_ = true;
};

/// The three parts of the atomwise Jordan decomposition of xi - eta.
struct SignedDecomposition {
  DiscreteMeasure positive_part;  // (xi - eta)_+
  DiscreteMeasure negative_part;  // (eta - xi)_+
  DiscreteMeasure common_part;    // xi ^ eta
};

/// Mass per unit volume.
double intensity(const DiscreteMeasure& mu);

/// Absolute tolerance 1e-12 scaled by the larger total mass.
double mass_tolerance(const DiscreteMeasure& a, const DiscreteMeasure& b);

SignedDecomposition jordan_decompose(const DiscreteMeasure& xi, const DiscreteMeasure& eta);

struct LebesgueDecomposition {
  DiscreteMeasure absolutely_continuous;
  DiscreteMeasure singular;
};

/// Splits eta into the part sitting on xi's atoms and the rest.
LebesgueDecomposition lebesgue_decompose(const DiscreteMeasure& eta, const DiscreteMeasure& xi);

/// Translation by `by` modulo L. Cell-aligned measures stay cell-aligned under
/// grid-aligned shifts (coordinates are snapped back onto exact centers).
DiscreteMeasure shift(const DiscreteMeasure& mu, const Point& by);

/// Atom-level mutual singularity: disjoint location sets.
bool mutually_singular(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

DiscreteMeasure scaled(const DiscreteMeasure& mu, double factor);
DiscreteMeasure sum(const DiscreteMeasure& a, const DiscreteMeasure& b);

/// Largest atomwise difference |a(x) - b(x)| over the union of supports.
double max_atomwise_difference(const DiscreteMeasure& a, const DiscreteMeasure& b);

void write_measure(std::ostream& os, const DiscreteMeasure& mu);
DiscreteMeasure read_measure(std::istream& is);

}  // namespace rmt
