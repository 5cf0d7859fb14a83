#pragma once

#include <initializer_list>
#include <utility>
#include <vector>

#include "rmt/measure.hpp"

namespace rmt::testing {

/// Measure on a 1-d torus from (x, mass) pairs.
inline DiscreteMeasure line(double side, int resolution, std::initializer_list<std::pair<double, double>> atoms) {
  std::vector<Atom> v;
  for (const auto& [x, m] : atoms) {
    Atom a;
    a.location[0] = x;
    a.mass = m;
    v.push_back(a);
  }
  return DiscreteMeasure(PeriodicDomain(1, side, resolution), std::move(v));
}

inline Atom atom2(double x, double y, double m) {
  Atom a;
  a.location[0] = x;
  a.location[1] = y;
  a.mass = m;
  return a;
}

inline Point pt(double x, double y = 0.0, double z = 0.0) {
  Point p;
  p[0] = x;
  p[1] = y;
  p[2] = z;
  return p;
}

}  // namespace rmt::testing
