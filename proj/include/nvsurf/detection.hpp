// detection.hpp - from spatially resolved populations to the pixel
// absorption signal, homodyne/direct detection, shot-noise-limited SNR and
// the homodyne operating-point optimizer.
//
// Signal chain: resolve_populations() solves the rate model cell by cell
// under the locally enhanced drive; pixel_absorption() folds the net
// singlet population against the probe enhancement map into the fractional
// IR absorption I_NV (per microwave state); reflection_magnitude() and the
// phase model turn that into the complex reflection seen by the
// interferometer; homodyne_output() applies the beam-splitter algebra; the
// snr_* functions apply photon shot-noise statistics.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nvsurf/constants.hpp"
#include "nvsurf/errors.hpp"
#include "nvsurf/field_map.hpp"
#include "nvsurf/integrator.hpp"
#include "nvsurf/params.hpp"
#include "nvsurf/rate_model.hpp"

namespace nvsurf {

// Pixel absorption signal for both microwave states.
// I_NV_*: fractional change of the reflected IR intensity; a_pixel_* are the
// input-intensity-normalized variants A = I_NV * I_out(0,0) / I_s
// (= I_NV * R0). The invariant I_NV_on >= I_NV_off holds for any pumped
// drive (microwave mixing only adds population to the shelving path).
struct AbsorptionSignal {
  double I_NV_on = 0;
  double I_NV_off = 0;
  double a_pixel_on = 0;
  double a_pixel_off = 0;

  void validate() const {
    if (!(I_NV_off >= -1e-15))
      throw ValidationError("absorption signal: I_NV_off must be >= 0");
    if (I_NV_on + 1e-15 < I_NV_off)
      throw ValidationError(
          "absorption signal: I_NV with microwave drive must not fall below "
          "the microwave-off value");
  }
};

// Steady-state populations on the shared grid of the two field maps, for
// both microwave states.
struct ResolvedPopulations {
  int nx = 0, ny = 0;
  std::vector<LevelPopulations> mw_on;   // row-major, matching the maps
  std::vector<LevelPopulations> mw_off;
};

// Per-cell steady state under locally enhanced pump/probe rates. Optically
// dark cells (zero local pump, no microwave) have no unique stationary spin
// split; they are assigned the unpolarized equal split, which is the limit
// prepared by any prior history without optical pumping. Other solver
// failures propagate with the cell index attached.
inline ResolvedPopulations resolve_populations(const FieldMap& map_pump,
                                               const FieldMap& map_probe,
                                               const PhotophysicsParams& params,
                                               const OpticalDrive& drive) {
  map_pump.validate();
  map_probe.validate();
  if (!map_pump.same_grid(map_probe))
    throw ValidationError(
        "resolve_populations: pump and probe maps must share grid and "
        "period");
  params.validate();
  drive.validate();

  ResolvedPopulations out;
  out.nx = map_pump.nx;
  out.ny = map_pump.ny;
  out.mw_on.resize(std::size_t(out.nx) * out.ny);
  out.mw_off.resize(std::size_t(out.nx) * out.ny);

  for (int iy = 0; iy < out.ny; ++iy) {
    for (int ix = 0; ix < out.nx; ++ix) {
      const std::size_t k = std::size_t(iy) * out.nx + ix;
      const double enh_p = map_pump.at(ix, iy);
      const double enh_s = map_probe.at(ix, iy);
      for (bool mw : {false, true}) {
        OpticalDrive d = drive;
        d.mw_on = mw;
        LevelPopulations pop;
        if (d.I_t * enh_p == 0.0 && !mw) {
          pop.n[level::ground_ms0] = params.n_NV / 2;
          pop.n[level::ground_ms1] = params.n_NV / 2;
        } else {
          try {
            pop = steady_state(build_generator(params, d, enh_p, enh_s),
                               params.n_NV);
          } catch (const Error& e) {
            throw NumericalError("resolve_populations: cell (" +
                                 std::to_string(ix) + ", " +
                                 std::to_string(iy) + "): " + e.what());
          }
        }
        (mw ? out.mw_on : out.mw_off)[k] = pop;
      }
    }
  }
  return out;
}

// Fractional IR absorption of the pixel down to sensing depth d:
//   I_NV = sigma_s / (R0 p) * integral over one period and [0, d] of
//          (n6 - n5)(x, y) |E/E0|^2(x, y) dx dy,
// evaluated per microwave state on the probe map's trapezoid grid.
inline AbsorptionSignal pixel_absorption(const ResolvedPopulations& pops,
                                         const FieldMap& map_probe,
                                         const PhotophysicsParams& params,
                                         const DetectionConfig& det,
                                         double d) {
  map_probe.validate();
  det.validate();
  if (pops.nx != map_probe.nx || pops.ny != map_probe.ny)
    throw ValidationError(
        "pixel_absorption: populations grid does not match probe map");

  auto integrate_state =
      [&](const std::vector<LevelPopulations>& grid) {
        const double integral = detail::integrate_xy(
            map_probe, d, [&](int ix, int iy) {
              const std::size_t k = std::size_t(iy) * map_probe.nx + ix;
              return net_singlet_population(grid[k]) * map_probe.at(ix, iy);
            });
        return params.sigma_s * integral / (det.R0 * map_probe.period);
      };

  AbsorptionSignal sig;
  sig.I_NV_on = integrate_state(pops.mw_on);
  sig.I_NV_off = integrate_state(pops.mw_off);
  sig.a_pixel_on = sig.I_NV_on * det.R0;
  sig.a_pixel_off = sig.I_NV_off * det.R0;
  sig.validate();
  return sig;
}

// NV-induced phase of the reflected probe for a given pixel absorption.
inline double nv_phase(double a_pixel, const DetectionConfig& det) {
  return det.phase_model(a_pixel);
}

// Reflection amplitude |r| = sqrt(R0 (1 - I_NV)).
inline double reflection_magnitude(double I_NV, double R0) {
  if (I_NV > 1.0)
    throw UnphysicalAbsorptionError(
        "reflection_magnitude: fractional absorption I_NV = " +
        std::to_string(I_NV) + " exceeds 1");
  return std::sqrt(R0 * (1.0 - I_NV));
}

struct ReflectionPair {
  double r_on = 0, r_off = 0;        // |r| per microwave state
  double phi_on = 0, phi_off = 0;    // NV phase per microwave state
};

inline ReflectionPair reflection_state(const AbsorptionSignal& sig,
                                       const DetectionConfig& det) {
  ReflectionPair rp;
  rp.r_on = reflection_magnitude(sig.I_NV_on, det.R0);
  rp.r_off = reflection_magnitude(sig.I_NV_off, det.R0);
  rp.phi_on = nv_phase(sig.a_pixel_on, det);
  rp.phi_off = nv_phase(sig.a_pixel_off, det);
  return rp;
}

// Interferometer output normalized to the incident probe intensity:
//   (1-R) + R |r|^2 + 2 sqrt((1-R) R) |r| cos(dphi_LO + dphi_NV).
inline double homodyne_output(double r_mag, double delta_phi_nv, double R,
                              double delta_phi_lo) {
  if (!(R >= 0.0 && R <= 1.0))
    throw ValidationError("homodyne_output: R must lie in [0, 1]");
  if (!(r_mag >= 0))
    throw ValidationError("homodyne_output: |r| must be >= 0");
  return (1.0 - R) + R * r_mag * r_mag +
         2.0 * std::sqrt((1.0 - R) * R) * r_mag *
             std::cos(delta_phi_lo + delta_phi_nv);
}

enum class DetectionMode { homodyne, direct };

inline const char* to_string(DetectionMode m) {
  return m == DetectionMode::homodyne ? "homodyne" : "direct";
}

namespace detail {

// Normalized detector intensities (I_out/I_s) for the two microwave states.
inline std::pair<double, double> detected_outputs(const ReflectionPair& rp,
                                                  DetectionMode mode,
                                                  double R, double phi_lo) {
  if (mode == DetectionMode::direct)
    return {rp.r_off * rp.r_off, rp.r_on * rp.r_on};
  return {homodyne_output(rp.r_off, rp.phi_off, R, phi_lo),
          homodyne_output(rp.r_on, rp.phi_on, R, phi_lo)};
}

inline double snr_from_outputs(double u_off, double u_on, double I_s,
                               double L, double t_mea) {
  const double denom = u_off + u_on;
  if (!(denom > 0))
    throw UndefinedSnrError(
        "snr: both detector intensities vanish; contrast undefined");
  return std::sqrt(t_mea * L * L * I_s / photon_energy(kLambdaProbe)) *
         std::abs(u_off - u_on) / std::sqrt(denom);
}

}  // namespace detail

// Shot-noise-limited SNR of the microwave on/off contrast for a readout of
// duration t_mea on a pixel of side L. Homodyne mode biases the
// interferometer at (det.R, det.delta_phi_LO); direct mode detects the bare
// reflection.
inline double snr_shot_limited(const AbsorptionSignal& sig,
                               const DetectionConfig& det, double I_s,
                               double L, double t_mea, DetectionMode mode) {
  if (!(t_mea > 0)) throw ValidationError("snr: t_mea must be > 0");
  if (!(I_s >= 0) || !(L > 0))
    throw ValidationError("snr: I_s must be >= 0 and L > 0");
  const ReflectionPair rp = reflection_state(sig, det);
  const auto [u_off, u_on] =
      detail::detected_outputs(rp, mode, det.R, det.delta_phi_LO);
  return detail::snr_from_outputs(u_off, u_on, I_s, L, t_mea);
}

// Low-contrast closed form: SNR = sqrt(R0 I_s t L^2 / (2 hbar omega)) *
// (I_NV_on - I_NV_off). Agrees with direct-mode snr_shot_limited when the
// contrast is small.
inline double snr_low_contrast(const AbsorptionSignal& sig, double R0,
                               double I_s, double L, double t_mea) {
  if (!(t_mea > 0) || !(L > 0) || !(I_s >= 0) || !(R0 > 0))
    throw ValidationError("snr_low_contrast: invalid input");
  return std::sqrt(R0 * I_s * t_mea * L * L /
                   (2.0 * photon_energy(kLambdaProbe))) *
         (sig.I_NV_on - sig.I_NV_off);
}

struct HomodyneOptimum {
  double R = 0;
  double delta_phi_lo = 0;
  double snr = 0;        // at the given I_s, L, t_mea
  double snr_norm = 0;   // snr / sqrt(t_mea L^2), 1/(m sqrt(s))
};

struct HomodyneOptimizerOptions {
  int n_R = 160;
  int n_phi = 256;
  int top_k = 5;       // coarse cells refined
  int refine_rounds = 40;
  double R_min = 1e-3;
  double R_max = 1.0 - 1e-3;
};

namespace detail {

// Golden-section maximization on [a, b]; deterministic, derivative-free.
inline double golden_max(const std::function<double(double)>& f, double a,
                         double b, int iters) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc > fd) {
      b = d; d = c; fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

// Deterministic grid search plus coordinate-wise golden-section refinement
// of the homodyne SNR over splitting ratio and LO phase. The refinement
// restarts from the best top_k coarse cells so narrow near-null ridges are
// not missed.
inline HomodyneOptimum optimize_homodyne(
    const AbsorptionSignal& sig, const DetectionConfig& det, double I_s,
    double t_mea, double L, const HomodyneOptimizerOptions& opt = {}) {
  if (!(t_mea > 0) || !(L > 0) || !(I_s > 0))
    throw ValidationError("optimize_homodyne: I_s, L, t_mea must be > 0");
  const ReflectionPair rp = reflection_state(sig, det);
  if (std::abs(rp.r_on - rp.r_off) == 0.0 &&
      std::abs(rp.phi_on - rp.phi_off) == 0.0)
    throw DegenerateOptimumError(
        "optimize_homodyne: zero spin contrast, SNR surface is flat");

  const double two_pi = 2.0 * std::numbers::pi;
  auto objective = [&](double R, double phi) {
    const auto [u_off, u_on] =
        detail::detected_outputs(rp, DetectionMode::homodyne, R, phi);
    const double denom = u_off + u_on;
    if (!(denom > 0)) return 0.0;
    return std::abs(u_off - u_on) / std::sqrt(denom);
  };

  struct Cell { double v, R, phi; };
  std::vector<Cell> best;
  for (int i = 0; i < opt.n_R; ++i) {
    const double R = opt.R_min + (opt.R_max - opt.R_min) * i / (opt.n_R - 1);
    for (int j = 0; j < opt.n_phi; ++j) {
      const double phi = two_pi * j / opt.n_phi;
      const double v = objective(R, phi);
      if (int(best.size()) < opt.top_k) {
        best.push_back({v, R, phi});
        std::sort(best.begin(), best.end(),
                  [](const Cell& a, const Cell& b) { return a.v > b.v; });
      } else if (v > best.back().v) {
        best.back() = {v, R, phi};
        std::sort(best.begin(), best.end(),
                  [](const Cell& a, const Cell& b) { return a.v > b.v; });
      }
    }
  }
  if (best.empty() || !(best.front().v > 0))
    throw DegenerateOptimumError(
        "optimize_homodyne: SNR vanishes on the whole search grid");

  const double dR = (opt.R_max - opt.R_min) / (opt.n_R - 1);
  const double dphi = two_pi / opt.n_phi;

  Cell champion = best.front();
  for (const Cell& start : best) {
    double R = start.R, phi = start.phi;
    double wR = 2.0 * dR, wphi = 2.0 * dphi;
    for (int round = 0; round < opt.refine_rounds; ++round) {
      phi = detail::golden_max([&](double x) { return objective(R, x); },
                               phi - wphi, phi + wphi, 32);
      R = detail::golden_max(
          [&](double x) { return objective(x, phi); },
          std::max(opt.R_min, R - wR), std::min(opt.R_max, R + wR), 32);
      wR *= 0.5;
      wphi *= 0.5;
      if (wR < 1e-12 && wphi < 1e-12) break;
    }
    const double v = objective(R, phi);
    if (v > champion.v) {
      phi = std::fmod(phi, two_pi);
      if (phi < 0) phi += two_pi;
      champion = {v, R, phi};
    }
  }

  HomodyneOptimum res;
  res.R = champion.R;
  res.delta_phi_lo = champion.phi;
  res.snr_norm =
      champion.v * std::sqrt(I_s / photon_energy(kLambdaProbe));
  res.snr = res.snr_norm * std::sqrt(t_mea * L * L);
  return res;
}

}  // namespace nvsurf
