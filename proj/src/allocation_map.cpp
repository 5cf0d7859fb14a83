#include "rmt/allocation_map.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace rmt {

AllocationMap::AllocationMap(std::shared_ptr<const DiscreteMeasure> source, std::vector<Assignment> assignments)
    : source_(std::move(source)) {
  const PeriodicDomain& dom = source_->domain();
  for (Assignment& a : assignments) {
    if (a.source >= source_->size()) throw Error(ErrorCode::kInvalidArgument, "assignment source out of range");
    if (!(a.fraction >= 0.0) || !std::isfinite(a.fraction)) {
      throw Error(ErrorCode::kInvalidArgument, "assignment fraction must be finite and >= 0");
    }
    a.target = dom.wrap(a.target);
    if (source_->cell_aligned() && dom.is_cell_center(a.target)) a.target = dom.snap(a.target);
  }
  std::erase_if(assignments, [](const Assignment& a) { return a.fraction == 0.0; });
  std::sort(assignments.begin(), assignments.end(), [&dom](const Assignment& x, const Assignment& y) {
    if (x.source != y.source) return x.source < y.source;
    return dom.key(x.target) < dom.key(y.target);
  });
  for (const Assignment& a : assignments) {
    if (!assignments_.empty() && assignments_.back().source == a.source &&
        dom.key(assignments_.back().target) == dom.key(a.target)) {
      assignments_.back().fraction += a.fraction;
    } else {
      assignments_.push_back(a);
    }
  }
  const auto used = used_fractions();
  for (double f : used) {
    if (f > 1.0 + 1e-9) throw Error(ErrorCode::kInvalidArgument, "source atom used beyond its mass");
  }
}

AllocationMap AllocationMap::identity(const DiscreteMeasure& source) {
  std::vector<Assignment> as;
  as.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) as.push_back({i, source[i].location, 1.0});
  return AllocationMap(source, std::move(as));
}

bool AllocationMap::single_valued() const {
  for (std::size_t k = 1; k < assignments_.size(); ++k) {
    if (assignments_[k].source == assignments_[k - 1].source) return false;
  }
  return true;
}

std::vector<double> AllocationMap::used_fractions() const {
  std::vector<double> f(source_->size(), 0.0);
  for (const Assignment& a : assignments_) f[a.source] += a.fraction;
  return f;
}

double AllocationMap::used_mass() const {
  double s = 0.0;
  for (const Assignment& a : assignments_) s += mass(a);
  return s;
}

Point AllocationMap::displacement(const Assignment& a) const {
  return domain().displacement((*source_)[a.source].location, a.target);
}

bool operator==(const AllocationMap& a, const AllocationMap& b) {
  if (!(a.domain() == b.domain()) || a.source().size() != b.source().size()) return false;
  for (std::size_t i = 0; i < a.source().size(); ++i) {
    if (!(a.source()[i].location == b.source()[i].location) || a.source()[i].mass != b.source()[i].mass) {
      return false;
    }
  }
  if (a.assignments_.size() != b.assignments_.size()) return false;
  for (std::size_t k = 0; k < a.assignments_.size(); ++k) {
    const Assignment& x = a.assignments_[k];
    const Assignment& y = b.assignments_[k];
    if (x.source != y.source || !(x.target == y.target) || x.fraction != y.fraction) return false;
  }
  return true;
}

void write_allocation(std::ostream& os, const AllocationMap& map) {
  const int d = map.domain().dim();
  for (const Assignment& a : map.assignments()) {
    std::string line = fmt::format("{}", a.source);
    for (int i = 0; i < d; ++i) line += fmt::format(" {:.17g}", a.target[i]);
    line += fmt::format(" {:.17g}\n", a.fraction);
    os << line;
  }
}

AllocationMap read_allocation(std::istream& is, std::shared_ptr<const DiscreteMeasure> source) {
  const int d = source->domain().dim();
  std::vector<Assignment> as;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Assignment a;
    if (!(ls >> a.source)) throw Error(ErrorCode::kParse, "bad allocation line: " + line);
    for (int i = 0; i < d; ++i) {
      if (!(ls >> a.target[i])) throw Error(ErrorCode::kParse, "bad allocation line: " + line);
    }
    if (!(ls >> a.fraction)) throw Error(ErrorCode::kParse, "bad allocation line: " + line);
    as.push_back(a);
  }
  return AllocationMap(std::move(source), std::move(as));
}

}  // namespace rmt
