#include "rmt/domain.hpp"

#include <cmath>

namespace rmt {

PeriodicDomain::PeriodicDomain(int dim, double side, int resolution)
    : dim_(dim), side_(side), resolution_(resolution) {
  if (dim < 1 || dim > kMaxDim) {
    throw Error(ErrorCode::kInvalidArgument, "dimension must be in [1, 3]");
  }
  if (!(side > 0.0) || !std::isfinite(side)) {
    throw Error(ErrorCode::kInvalidArgument, "side length must be positive and finite");
  }
  if (resolution < 1) {
    throw Error(ErrorCode::kInvalidArgument, "resolution must be positive");
  }
}

double PeriodicDomain::volume() const noexcept { return std::pow(side_, dim_); }

std::size_t PeriodicDomain::cell_count() const noexcept {
  std::size_t c = 1;
  for (int i = 0; i < dim_; ++i) c *= static_cast<std::size_t>(resolution_);
  return c;
}

Point PeriodicDomain::wrap(Point p) const noexcept {
  for (int i = 0; i < dim_; ++i) {
    double v = p[i] - side_ * std::floor(p[i] / side_);
    if (v >= side_ || v < 0.0) v = 0.0;
    p[i] = v;
  }
  return p;
}

Point PeriodicDomain::displacement(const Point& from, const Point& to) const noexcept {
  Point d;
  for (int i = 0; i < dim_; ++i) {
    double v = to[i] - from[i];
    v -= side_ * std::floor(v / side_ + 0.5);
    if (v >= 0.5 * side_) v -= side_;
    if (v < -0.5 * side_) v += side_;
    d[i] = v;
  }
  return d;
}

double PeriodicDomain::norm(const Point& v) const noexcept {
  double s = 0.0;
  for (int i = 0; i < dim_; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

double PeriodicDomain::distance(const Point& a, const Point& b) const noexcept {
  return norm(displacement(a, b));
}

Point PeriodicDomain::cell_center(std::size_t cell) const noexcept {
  Point p;
  const double h = pitch();
  const auto n = static_cast<std::size_t>(resolution_);
  for (int i = 0; i < dim_; ++i) {
    p[i] = (static_cast<double>(cell % n) + 0.5) * h;
    cell /= n;
  }
  return p;
}

std::size_t PeriodicDomain::cell_of(const Point& p) const noexcept {
  const Point q = wrap(p);
  const double h = pitch();
  std::size_t cell = 0;
  std::size_t stride = 1;
  for (int i = 0; i < dim_; ++i) {
    auto c = static_cast<long long>(std::floor(q[i] / h));
    if (c < 0) c = 0;
    if (c >= resolution_) c = resolution_ - 1;
    cell += static_cast<std::size_t>(c) * stride;
    stride *= static_cast<std::size_t>(resolution_);
  }
  return cell;
}

bool PeriodicDomain::is_cell_center(const Point& p) const noexcept {
  return key(p) == key(snap(p));
}

LocationKey PeriodicDomain::key(const Point& p) const noexcept {
  const double q = 1e-9 * pitch();
  LocationKey k{0, 0, 0};
  for (int i = 0; i < dim_; ++i) {
    auto v = static_cast<std::int64_t>(std::llround(p[i] / q));
    const auto period = static_cast<std::int64_t>(std::llround(side_ / q));
    if (v >= period) v -= period;
    k[static_cast<std::size_t>(i)] = v;
  }
  return k;
}

bool PeriodicDomain::contains(const Point& p) const noexcept {
  for (int i = 0; i < dim_; ++i) {
    if (!(p[i] >= 0.0 && p[i] < side_)) return false;
  }
  for (int i = dim_; i < kMaxDim; ++i) {
    if (p[i] != 0.0) return false;
  }
  return true;
}

Point PeriodicDomain::add(const Point& a, const Point& b) const noexcept {
  Point r;
  for (int i = 0; i < dim_; ++i) r[i] = a[i] + b[i];
  return r;
}

Point PeriodicDomain::scale(const Point& a, double s) const noexcept {
  Point r;
  for (int i = 0; i < dim_; ++i) r[i] = a[i] * s;
  return r;
}

void require_same_domain(const PeriodicDomain& a, const PeriodicDomain& b) {
  if (!(a == b)) throw Error(ErrorCode::kDomainMismatch, "measures live on different domains");
}

}  // namespace rmt
