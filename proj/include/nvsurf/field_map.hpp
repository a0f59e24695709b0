// field_map.hpp - gridded |E/E0|^2 enhancement maps over one grating period
// by depth, plus the spatial averaging and figure-of-merit operations.
//
// Maps normally come from an external electromagnetic solver as CSV files
// (schema below); the synthetic generator exists for tests and demos and is
// watermarked in the metadata.
//
// CSV schema: header "x_m,y_m,enh", then one row per grid node in row-major
// order (y outer, x inner), uniform spacing, x spanning exactly one period
// [-p/2, p/2]. A JSON sidecar at <path>.meta.json carries
// {"wavelength_m":..., "period_m":..., "synthetic":...}.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvsurf/errors.hpp"
#include "nvsurf/params.hpp"

namespace nvsurf {

struct FieldMap {
  double period = 0;      // m
  double wavelength = 0;  // m
  bool synthetic = false;
  int nx = 0, ny = 0;     // grid nodes across x and y
  double y_max = 0;       // m; y spans [0, y_max]
  std::vector<double> values;  // row-major: values[iy*nx + ix] >= 0

  double at(int ix, int iy) const { return values[std::size_t(iy) * nx + ix]; }
  double& at(int ix, int iy) { return values[std::size_t(iy) * nx + ix]; }

  double x(int ix) const {
    return -period / 2.0 + period * double(ix) / double(nx - 1);
  }
  double y(int iy) const { return y_max * double(iy) / double(ny - 1); }
  double dx() const { return period / double(nx - 1); }
  double dy() const { return y_max / double(ny - 1); }

  void validate() const {
    if (!(period > 0)) throw ValidationError("field map: period must be > 0");
    if (!(wavelength > 0))
      throw ValidationError("field map: wavelength must be > 0");
    if (nx < 2 || ny < 2)
      throw ValidationError("field map: grid must be at least 2x2");
    if (!(y_max > 0)) throw ValidationError("field map: y_max must be > 0");
    if (values.size() != std::size_t(nx) * ny)
      throw ValidationError("field map: sample count does not match grid");
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix)
        if (!(at(ix, iy) >= 0) || !std::isfinite(at(ix, iy)))
          throw ValidationError("field map: negative or non-finite sample at "
                                "cell (" + std::to_string(ix) + ", " +
                                std::to_string(iy) + ")");
  }

  bool same_grid(const FieldMap& other) const {
    return nx == other.nx && ny == other.ny &&
           std::abs(period - other.period) <= 1e-12 * period &&
           std::abs(y_max - other.y_max) <= 1e-12 * y_max;
  }
};

// |E/E0|^2(x,y) = rwa_amp * exp(-y/rwa_decay)
//               + spp_amp * exp(-y/spp_decay) * cos^2(pi x / p).
// The first term models the vertically extended diffracted-wave component,
// the second the surface-bound plasmonic component concentrated over the
// wires. Infinite decay lengths are allowed and mean "no decay".
inline FieldMap synthetic_field_map(double period, double y_max,
                                    double spp_amplitude, double spp_decay,
                                    double rwa_amplitude, double rwa_decay,
                                    int nx, int ny, double wavelength) {
  if (!(spp_decay > 0) || !(rwa_decay > 0))
    throw ValidationError("synthetic_field_map: decay lengths must be > 0");
  if (!(spp_amplitude >= 0) || !(rwa_amplitude >= 0))
    throw ValidationError("synthetic_field_map: amplitudes must be >= 0");
  FieldMap map;
  map.period = period;
  map.wavelength = wavelength;
  map.synthetic = true;
  map.nx = nx;
  map.ny = ny;
  map.y_max = y_max;
  map.values.resize(std::size_t(nx) * ny);
  for (int iy = 0; iy < ny; ++iy) {
    const double y = map.y(iy);
    const double rwa = rwa_amplitude * std::exp(-y / rwa_decay);
    const double spp = spp_amplitude * std::exp(-y / spp_decay);
    for (int ix = 0; ix < nx; ++ix) {
      const double c = std::cos(std::numbers::pi * map.x(ix) / period);
      map.values[std::size_t(iy) * nx + ix] = rwa + spp * c * c;
    }
  }
  map.validate();
  return map;
}

inline void save_field_map(const FieldMap& map, const std::string& path) {
  map.validate();
  std::ofstream os(path);
  if (!os) throw ValidationError("save_field_map: cannot open " + path);
  os << "x_m,y_m,enh\n";
  char buf[96];
  for (int iy = 0; iy < map.ny; ++iy)
    for (int ix = 0; ix < map.nx; ++ix) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", map.x(ix),
                    map.y(iy), map.at(ix, iy));
      os << buf;
    }
  nlohmann::json meta = {{"schema_version", 1},
                         {"wavelength_m", map.wavelength},
                         {"period_m", map.period},
                         {"synthetic", map.synthetic}};
  std::ofstream ms(path + ".meta.json");
  if (!ms) throw ValidationError("save_field_map: cannot open sidecar for " + path);
  ms << meta.dump(2) << "\n";
}

inline FieldMap load_field_map(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("load_field_map: cannot open " + path);
  std::ifstream ms(path + ".meta.json");
  if (!ms)
    throw SchemaError("load_field_map: missing metadata sidecar " + path +
                      ".meta.json");
  nlohmann::json meta;
  try {
    ms >> meta;
  } catch (const std::exception& e) {
    throw SchemaError("load_field_map: bad sidecar JSON: " +
                      std::string(e.what()));
  }
  FieldMap map;
  try {
    map.wavelength = meta.at("wavelength_m").get<double>();
    map.period = meta.at("period_m").get<double>();
    map.synthetic = meta.value("synthetic", false);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("load_field_map: sidecar missing key: " +
                      std::string(e.what()));
  }

  std::string line;
  if (!std::getline(is, line) || line.rfind("x_m,y_m,enh", 0) != 0)
    throw SchemaError("load_field_map: expected header 'x_m,y_m,enh' in " +
                      path);
  std::vector<double> xs, ys, vals;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    double x, y, v;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg", &x, &y, &v) != 3)
      throw SchemaError("load_field_map: malformed row at line " +
                        std::to_string(line_no));
    xs.push_back(x);
    ys.push_back(y);
    vals.push_back(v);
  }
  if (vals.size() < 4)
    throw SchemaError("load_field_map: fewer than 4 grid nodes");

  // Infer nx from the first y block.
  int nx = 0;
  for (std::size_t k = 0; k < ys.size(); ++k) {
    if (std::abs(ys[k] - ys[0]) > 1e-15 + 1e-9 * std::abs(ys.back())) break;
    ++nx;
  }
  if (nx < 2 || vals.size() % nx != 0)
    throw SchemaError("load_field_map: grid is not rectangular");
  const int ny = int(vals.size() / nx);
  if (ny < 2) throw SchemaError("load_field_map: need at least 2 rows in y");

  map.nx = nx;
  map.ny = ny;
  map.y_max = ys.back();
  map.values = vals;

  // Uniform spacing and one-period coverage checks.
  const double dx = (xs[nx - 1] - xs[0]) / (nx - 1);
  const double dy = (ys.back() - ys[0]) / (ny - 1);
  const double xtol = 1e-6 * map.period, ytol = 1e-6 * std::max(map.y_max, 1e-30);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const std::size_t k = std::size_t(iy) * nx + ix;
      if (std::abs(xs[k] - (xs[0] + ix * dx)) > xtol ||
          std::abs(ys[k] - (ys[0] + iy * dy)) > ytol)
        throw SchemaError("load_field_map: non-uniform grid at cell (" +
                          std::to_string(ix) + ", " + std::to_string(iy) + ")");
      if (!(vals[k] >= 0) || !std::isfinite(vals[k]))
        throw SchemaError("load_field_map: negative sample at cell (" +
                          std::to_string(ix) + ", " + std::to_string(iy) + ")");
    }
  if (std::abs(xs[0] + map.period / 2) > xtol ||
      std::abs(xs[nx - 1] - map.period / 2) > xtol)
    throw SchemaError(
        "load_field_map: x range does not cover one period [-p/2, p/2] for "
        "p = " + std::to_string(map.period));
  if (std::abs(ys[0]) > ytol)
    throw SchemaError("load_field_map: y range must start at 0");

  map.validate();
  return map;
}

namespace detail {

// Composite trapezoid over x (full period; both endpoints are the same
// physical point) and y in [0, d], with the last y interval shortened to d
// using linear interpolation. f(ix, iy) supplies the integrand on nodes;
// returns the area integral.
template <typename F>
double integrate_xy(const FieldMap& map, double d, F&& f) {
  if (!(d >= 0)) throw ValidationError("depth must be >= 0");
  if (d > map.y_max * (1.0 + 1e-12))
    throw ValidationError("depth " + std::to_string(d) +
                          " m exceeds field map extent y_max = " +
                          std::to_string(map.y_max) + " m");
  d = std::min(d, map.y_max);
  const double dx = map.dx(), dy = map.dy();

  auto row_integral = [&](int iy) {
    double s = 0.5 * (f(0, iy) + f(map.nx - 1, iy));
    for (int ix = 1; ix < map.nx - 1; ++ix) s += f(ix, iy);
    return s * dx;
  };

  const int full_rows = std::min(int(std::floor(d / dy + 1e-12)), map.ny - 1);
  double integral = 0.0;
  double prev = row_integral(0);
  for (int iy = 1; iy <= full_rows; ++iy) {
    const double cur = row_integral(iy);
    integral += 0.5 * (prev + cur) * dy;
    prev = cur;
  }
  const double rem = d - full_rows * dy;
  if (rem > 1e-12 * map.y_max && full_rows + 1 <= map.ny - 1) {
    const double next = row_integral(full_rows + 1);
    const double frac = rem / dy;
    const double at_d = prev + (next - prev) * frac;
    integral += 0.5 * (prev + at_d) * rem;
  }
  return integral;
}

}  // namespace detail

// Volume average of |E/E0|^2 over one period in x and depth [0, d].
inline double average_enhancement(const FieldMap& map, double d) {
  map.validate();
  if (!(d > 0)) {
    // Degenerate-depth limit: surface row average.
    double s = 0.5 * (map.at(0, 0) + map.at(map.nx - 1, 0));
    for (int ix = 1; ix < map.nx - 1; ++ix) s += map.at(ix, 0);
    return s / double(map.nx - 1);
  }
  const double integral = detail::integrate_xy(
      map, d, [&](int ix, int iy) { return map.at(ix, iy); });
  return integral / (map.period * d);
}

// Enhancement-weighted sensing-spin count <|E/E0|^2> * V_pixel * n_NV.
inline double figure_of_merit(const FieldMap& map, const PixelGeometry& geom,
                              double n_NV) {
  geom.validate();
  if (!(n_NV >= 0)) throw ValidationError("figure_of_merit: n_NV must be >= 0");
  return average_enhancement(map, geom.d_NV) * geom.pixel_volume() * n_NV;
}

}  // namespace nvsurf
