#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <vector>

#include "rmt/measure.hpp"

namespace rmt {

/// Source atom `source` sends the fraction `fraction` of its mass to `target`.
struct Assignment {
  std::size_t source = 0;
  Point target;
  double fraction = 0.0;
};

/// Allocation of a discrete source measure: the map T together with the used
/// fraction f.
///
/// A source atom whose cell is split between several targets carries one
/// assignment per target; `single_valued()` tells whether T is a genuine map
/// on atoms. Assignments are sorted by source index, then target location.
class AllocationMap {
 public:
  AllocationMap() = default;
  AllocationMap(std::shared_ptr<const DiscreteMeasure> source, std::vector<Assignment> assignments);
  AllocationMap(const DiscreteMeasure& source, std::vector<Assignment> assignments)
      : AllocationMap(std::make_shared<const DiscreteMeasure>(source), std::move(assignments)) {}

  static AllocationMap identity(const DiscreteMeasure& source);

  const DiscreteMeasure& source() const { return *source_; }
  const std::shared_ptr<const DiscreteMeasure>& source_ptr() const { return source_; }
  const std::vector<Assignment>& assignments() const noexcept { return assignments_; }
  const PeriodicDomain& domain() const { return source_->domain(); }

  /// Each source atom appears at most once.
  bool single_valued() const;
  /// Used fraction per source atom (0 for unassigned atoms).
  std::vector<double> used_fractions() const;
  double used_mass() const;
  /// Mass carried by one assignment.
  double mass(const Assignment& a) const { return a.fraction * (*source_)[a.source].mass; }
  Point displacement(const Assignment& a) const;

  friend bool operator==(const AllocationMap& a, const AllocationMap& b);

 private:
  std::shared_ptr<const DiscreteMeasure> source_ = std::make_shared<DiscreteMeasure>();
  std::vector<Assignment> assignments_;
};

/// Sources that a plan sends to more than one target.
struct SplitReport {
  std::vector<std::size_t> sources;
  /// Mass of split sources not sent to their largest-share target.
  double split_mass = 0.0;
  /// Total used mass of split sources.
  double split_source_mass = 0.0;
  std::size_t count() const noexcept { return sources.size(); }
};

/// Lines `src_index tx_1 ... tx_d f`.
void write_allocation(std::ostream& os, const AllocationMap& map);
AllocationMap read_allocation(std::istream& is, std::shared_ptr<const DiscreteMeasure> source);

}  // namespace rmt
