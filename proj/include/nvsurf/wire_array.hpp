// wire_array.hpp - quasistatic magnetic field of the metasurface wire array
// driven by a uniform current, used to assess microwave field homogeneity
// over a pixel.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nvsurf/constants.hpp"
#include "nvsurf/errors.hpp"

namespace nvsurf {

struct Vec2 {
  double x = 0, y = 0;
  double norm() const { return std::hypot(x, y); }
};

// Superposition of infinite-straight-wire fields B = mu0 I / (2 pi r) for
// n_wires wires along z at y = 0, spaced by p and centered on x = 0,
// carrying current I in +z. Throws if a query point sits on a wire axis.
inline Vec2 wire_array_bfield(double current, double p, int n_wires,
                              const Vec2& point) {
  if (!(p > 0)) throw ValidationError("wire_array_bfield: period must be > 0");
  if (n_wires < 1)
    throw ValidationError("wire_array_bfield: need at least one wire");
  Vec2 b;
  const double prefactor = kMu0 * current / (2.0 * std::numbers::pi);
  for (int k = 0; k < n_wires; ++k) {
    const double xw = (k - 0.5 * (n_wires - 1)) * p;
    const double rx = point.x - xw;
    const double ry = point.y;
    const double r2 = rx * rx + ry * ry;
    if (r2 < 1e-24 * p * p)
      throw SingularityError(
          "wire_array_bfield: query point lies on the axis of wire at x = " +
          std::to_string(xw));
    b.x += prefactor * (-ry) / r2;
    b.y += prefactor * rx / r2;
  }
  return b;
}

inline std::vector<Vec2> wire_array_bfield(double current, double p,
                                           int n_wires,
                                           const std::vector<Vec2>& points) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const auto& q : points)
    out.push_back(wire_array_bfield(current, p, n_wires, q));
  return out;
}

}  // namespace nvsurf
