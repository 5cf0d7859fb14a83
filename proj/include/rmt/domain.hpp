#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rmt {

/// Largest supported ambient dimension.
inline constexpr int kMaxDim = 3;

enum class ErrorCode {
  kInvalidArgument,
  kDomainMismatch,
  kInfeasible,
  kIntensityMismatch,
  kNotMutuallySingular,
  kNotInvertible,
  kTooLarge,
  kParse,
};

/// Single exception type for the library; `code()` tells callers what went wrong.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A point (or displacement) in R^d, d <= kMaxDim. Unused coordinates stay 0.
struct Point {
  std::array<double, kMaxDim> x{0.0, 0.0, 0.0};

  double& operator[](int i) { return x[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return x[static_cast<std::size_t>(i)]; }
  friend bool operator==(const Point&, const Point&) = default;
};

/// Quantized location used for exact identification of atoms across measures.
using LocationKey = std::array<std::int64_t, kMaxDim>;

/// Flat torus [0, L)^d with an n^d grid of cells of pitch L/n. The translation
/// group acts by coordinatewise addition modulo L.
class PeriodicDomain {
 public:
  PeriodicDomain() = default;
  PeriodicDomain(int dim, double side, int resolution);

  int dim() const noexcept { return dim_; }
  double side() const noexcept { return side_; }
  int resolution() const noexcept { return resolution_; }
  double pitch() const noexcept { return side_ / resolution_; }
  double volume() const noexcept;
  std::size_t cell_count() const noexcept;

  /// Reduces every coordinate into [0, L).
  Point wrap(Point p) const noexcept;
  Point translate(const Point& p, const Point& by) const noexcept { return wrap(add(p, by)); }

  /// Minimal-image displacement `to - from`, each coordinate in [-L/2, L/2).
  Point displacement(const Point& from, const Point& to) const noexcept;
  double distance(const Point& a, const Point& b) const noexcept;
  double norm(const Point& v) const noexcept;

  Point cell_center(std::size_t cell) const noexcept;
  std::size_t cell_of(const Point& p) const noexcept;
  /// Moves `p` to the center of its cell.
  Point snap(const Point& p) const noexcept { return cell_center(cell_of(p)); }
  bool is_cell_center(const Point& p) const noexcept;

  /// Key with resolution 1e-9 pitch; equal keys mean "same location".
  LocationKey key(const Point& p) const noexcept;
  bool contains(const Point& p) const noexcept;

  friend bool operator==(const PeriodicDomain&, const PeriodicDomain&) = default;

  Point add(const Point& a, const Point& b) const noexcept;
  Point scale(const Point& a, double s) const noexcept;

 private:
  int dim_ = 1;
  double side_ = 1.0;
  int resolution_ = 1;
};

void require_same_domain(const PeriodicDomain& a, const PeriodicDomain& b);

}  // namespace rmt
