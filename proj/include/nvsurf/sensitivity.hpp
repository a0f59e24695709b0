// sensitivity.hpp - magnetometric figures of merit: CW (ODMR) sensitivity,
// spin-projection limit, pulsed readout fidelity, optimal readout time and
// AC sensitivity, plus the end-to-end pixel pipelines feeding them.
//
// Pulsed protocol: the pixel is initialized to the green-only steady state
// (pump on, probe and microwave off); at t = 0 the readout drive (pump +
// probe) is applied. The two readout branches differ by the prepared spin
// state: branch "off" reads the polarized state directly, branch "on" reads
// it after a population-swapping microwave pi-pulse on the ground spin
// doublet. The spin contrast therefore starts at zero, peaks once the
// swapped population shelves into the singlet, and decays to zero as
// optical cycling repolarizes the ensemble.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nvsurf/constants.hpp"
#include "nvsurf/detection.hpp"
#include "nvsurf/errors.hpp"
#include "nvsurf/field_map.hpp"
#include "nvsurf/integrator.hpp"
#include "nvsurf/params.hpp"
#include "nvsurf/rate_model.hpp"

namespace nvsurf {

// CW (ODMR) sensitivity per root area from a normalized SNR,
//   eta = hbar Gamma_MW / (g mu_B) / snr_norm,  Gamma_MW = 2/T2*.
// snr_norm = SNR / sqrt(t_mea L^2) in 1/(m sqrt(s)); result in T m / Hz^1/2.
// Zero SNR is reported as +infinity (serialized as "unmeasurable").
inline double eta_cw(double snr_per_sqrt_area_time, double T2_star) {
  if (!(T2_star > 0)) throw ValidationError("eta_cw: T2_star must be > 0");
  if (!(snr_per_sqrt_area_time > 0))
    return std::numeric_limits<double>::infinity();
  const double gamma_mw = 2.0 / T2_star;
  return kHbar * gamma_mw / (kGFactorNV * kBohrMagneton) /
         snr_per_sqrt_area_time;
}

// Spin-projection-noise limit of an ensemble per root area,
//   eta = hbar / (g mu_B sqrt(n_NV d_NV tau)),  in T m / Hz^1/2.
inline double eta_spin_projection(double n_NV, double d_NV, double tau) {
  if (!(n_NV > 0) || !(d_NV > 0) || !(tau > 0))
    throw ValidationError("eta_spin_projection: inputs must be positive");
  return kHbar / (kGFactorNV * kBohrMagneton * std::sqrt(n_NV * d_NV * tau));
}

// Inverse readout fidelity sigma_R = sqrt(1 + 2(a+b)/(a-b)^2) from the mean
// photon numbers per spin per measurement for the two prepared spin states.
// a == b is reported as +infinity.
inline double readout_fidelity(double a, double b) {
  if (!(a >= 0) || !(b >= 0))
    throw ValidationError("readout_fidelity: photon numbers must be >= 0");
  const double diff = a - b;
  if (diff == 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(1.0 + 2.0 * (a + b) / (diff * diff));
}

// AC (echo) sensitivity per root area,
//   eta = hbar sigma_R e^{tau/T2} / (g mu_B sqrt(n d tau))
//         * sqrt(1 + (t_I + t_R)/tau).
inline double eta_ac(const PhotophysicsParams& params, double d_NV,
                     double sigma_R, double tau, double t_I, double t_R) {
  if (!(tau > 0) || !(t_I > 0) || !(t_R > 0))
    throw ValidationError("eta_ac: tau, t_I, t_R must be > 0");
  if (!(sigma_R >= 1.0)) throw ValidationError("eta_ac: sigma_R must be >= 1");
  return eta_spin_projection(params.n_NV, d_NV, tau) * sigma_R *
         std::exp(tau / params.T2) * std::sqrt(1.0 + (t_I + t_R) / tau);
}

// ---------------------------------------------------------------------------
// Pulsed pixel traces

// Pixel-aggregated time traces of the pulsed readout for both prepared spin
// states: depth-averaged singlet-ground population and fractional IR
// absorption on a shared uniform time grid.
struct PulsedPixelTrace {
  std::vector<double> time;       // s
  std::vector<double> n6_off;     // m^-3, depth-averaged, polarized branch
  std::vector<double> n6_on;      // m^-3, spin-swapped branch
  std::vector<double> I_NV_off;   // fractional absorption per branch
  std::vector<double> I_NV_on;
};

namespace detail {

// Trapezoid weight of grid node (ix, iy) for the area integral over one
// period and depth d; mirrors integrate_xy in field_map.hpp but exposed as
// per-node weights so a time series can be accumulated cell by cell.
inline std::vector<double> quadrature_weights(const FieldMap& map, double d) {
  std::vector<double> w(std::size_t(map.nx) * map.ny, 0.0);
  const double dx = map.dx(), dy = map.dy();
  const int full_rows = std::min(int(std::floor(d / dy + 1e-12)), map.ny - 1);
  const double rem = d - full_rows * dy;

  // y weights: composite trapezoid over full rows, then the partial strip
  // [full_rows*dy, d] with a linearly interpolated endpoint.
  std::vector<double> wy(map.ny, 0.0);
  for (int iy = 1; iy <= full_rows; ++iy) {
    wy[iy - 1] += 0.5 * dy;
    wy[iy] += 0.5 * dy;
  }
  if (rem > 1e-12 * map.y_max && full_rows + 1 <= map.ny - 1) {
    const double frac = rem / dy;
    // integral over strip = rem/2 * (f(y0) + f(d)),
    // f(d) = (1-frac) f(y0) + frac f(y1)
    wy[full_rows] += 0.5 * rem * (1.0 + (1.0 - frac));
    wy[full_rows + 1] += 0.5 * rem * frac;
  }

  for (int iy = 0; iy < map.ny; ++iy) {
    if (wy[iy] == 0.0) continue;
    for (int ix = 0; ix < map.nx; ++ix) {
      const double wx = (ix == 0 || ix == map.nx - 1) ? 0.5 * dx : dx;
      w[std::size_t(iy) * map.nx + ix] = wx * wy[iy];
    }
  }
  return w;
}

}  // namespace detail

// Runs the pulsed readout cell by cell and accumulates the pixel traces.
// drive.mw_on is ignored: both prepared spin states are always computed.
inline PulsedPixelTrace pulsed_pixel_trace(
    const PhotophysicsParams& params, const OpticalDrive& drive,
    const FieldMap& map_pump, const FieldMap& map_probe,
    const PixelGeometry& geom, const DetectionConfig& det,
    const SolverOptions& solver) {
  map_pump.validate();
  map_probe.validate();
  if (!map_pump.same_grid(map_probe))
    throw ValidationError(
        "pulsed_pixel_trace: pump and probe maps must share grid and period");
  if (!(drive.I_t > 0))
    throw ValidationError(
        "pulsed_pixel_trace: pulsed readout requires green pump drive");

  const double t_max = solver.pulsed_t_max;
  const double dt = solver.pulsed_dt_sample;
  const std::size_t n_samples =
      static_cast<std::size_t>(std::floor(t_max / dt + 1e-9)) + 1;

  PulsedPixelTrace tr;
  tr.time.resize(n_samples);
  for (std::size_t k = 0; k < n_samples; ++k) tr.time[k] = k * dt;
  tr.n6_off.assign(n_samples, 0.0);
  tr.n6_on.assign(n_samples, 0.0);
  tr.I_NV_off.assign(n_samples, 0.0);
  tr.I_NV_on.assign(n_samples, 0.0);

  const auto weights = detail::quadrature_weights(map_probe, geom.d_NV);
  const double area = map_probe.period * geom.d_NV;

  IntegratorOptions iopt;
  iopt.rtol = solver.rtol;
  iopt.atol = solver.atol;

  OpticalDrive init_drive = drive;
  init_drive.I_s = 0.0;
  init_drive.mw_on = false;
  OpticalDrive readout_drive = drive;
  readout_drive.mw_on = false;

  for (int iy = 0; iy < map_pump.ny; ++iy) {
    // Rows entirely above the sensing depth contribute nothing.
    bool row_used = false;
    for (int ix = 0; ix < map_pump.nx; ++ix)
      if (weights[std::size_t(iy) * map_pump.nx + ix] != 0.0) row_used = true;
    if (!row_used) continue;

    for (int ix = 0; ix < map_pump.nx; ++ix) {
      const std::size_t k = std::size_t(iy) * map_pump.nx + ix;
      const double w = weights[k];
      if (w == 0.0) continue;
      const double enh_p = map_pump.at(ix, iy);
      const double enh_s = map_probe.at(ix, iy);

      LevelPopulations init;
      if (drive.I_t * enh_p == 0.0) {
        init.n[level::ground_ms0] = params.n_NV / 2;
        init.n[level::ground_ms1] = params.n_NV / 2;
      } else {
        init = steady_state(build_generator(params, init_drive, enh_p, enh_s),
                            params.n_NV);
      }
      LevelPopulations init_swapped = init;
      std::swap(init_swapped.n[level::ground_ms0],
                init_swapped.n[level::ground_ms1]);

      const RateGenerator gen =
          build_generator(params, readout_drive, enh_p, enh_s);

      for (bool swapped : {false, true}) {
        PopulationTrace cell;
        try {
          cell = evolve(gen, swapped ? init_swapped : init, t_max, dt, iopt);
        } catch (const Error& e) {
          throw NumericalError("pulsed_pixel_trace: cell (" +
                               std::to_string(ix) + ", " +
                               std::to_string(iy) + "): " + e.what());
        }
        if (cell.size() < n_samples)
          throw NumericalError("pulsed_pixel_trace: short trace at cell (" +
                               std::to_string(ix) + ", " +
                               std::to_string(iy) + ")");
        auto& n6 = swapped ? tr.n6_on : tr.n6_off;
        auto& inv = swapped ? tr.I_NV_on : tr.I_NV_off;
        const double inv_coeff = params.sigma_s * enh_s /
                                 (det.R0 * map_probe.period);
        for (std::size_t s = 0; s < n_samples; ++s) {
          n6[s] += cell.samples[s].n[level::singlet_lower] * w / area;
          inv[s] += net_singlet_population(cell.samples[s]) * inv_coeff * w;
        }
      }
    }
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Optimal readout time

enum class ReadoutOptimumStatus {
  interior,        // genuine interior maximum
  boundary_small,  // time-averaged contrast maximized as t -> 0
  horizon,         // still rising at t_max; extend the horizon
};

struct ReadoutTimeResult {
  double t_opt = 0;
  ReadoutOptimumStatus status = ReadoutOptimumStatus::interior;
};

// Maximizes (1/t) * integral_0^t contrast(t') dt' over the sampled trace.
// The running average is refined by a parabolic fit through the discrete
// argmax and its neighbours.
inline ReadoutTimeResult optimal_readout_from_contrast(
    const std::vector<double>& time, const std::vector<double>& contrast) {
  if (time.size() != contrast.size() || time.size() < 3)
    throw ValidationError(
        "optimal_readout_from_contrast: need >= 3 samples");
  const std::size_t n = time.size();
  std::vector<double> avg(n, 0.0);
  double cume = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    cume += 0.5 * (contrast[k - 1] + contrast[k]) * (time[k] - time[k - 1]);
    avg[k] = cume / time[k];
  }
  std::size_t best = 1;
  for (std::size_t k = 2; k < n; ++k)
    if (avg[k] > avg[best]) best = k;

  ReadoutTimeResult res;
  if (best == 1) {
    res.t_opt = time[1];
    res.status = ReadoutOptimumStatus::boundary_small;
    return res;
  }
  if (best == n - 1) {
    res.t_opt = time[n - 1];
    res.status = ReadoutOptimumStatus::horizon;
    return res;
  }
  // Parabolic vertex through the three samples around the maximum.
  const double t0 = time[best - 1], t1 = time[best], t2 = time[best + 1];
  const double f0 = avg[best - 1], f1 = avg[best], f2 = avg[best + 1];
  const double d1 = (f1 - f0) / (t1 - t0);
  const double d2 = (f2 - f1) / (t2 - t1);
  const double curv = (d2 - d1) / (0.5 * (t2 - t0));
  double t_opt = t1;
  if (curv < 0) {
    const double slope_mid = 0.5 * (d1 + d2);
    t_opt = std::clamp(t1 - slope_mid / curv, t0, t2);
  }
  res.t_opt = t_opt;
  res.status = ReadoutOptimumStatus::interior;
  return res;
}

// Optimal pulsed readout time from the depth-averaged singlet contrast.
inline ReadoutTimeResult optimize_readout_time(
    const PhotophysicsParams& params, const OpticalDrive& drive,
    const FieldMap& map_pump, const FieldMap& map_probe,
    const PixelGeometry& geom, const DetectionConfig& det,
    const SolverOptions& solver) {
  const PulsedPixelTrace tr =
      pulsed_pixel_trace(params, drive, map_pump, map_probe, geom, det, solver);
  std::vector<double> contrast(tr.time.size());
  for (std::size_t k = 0; k < contrast.size(); ++k)
    contrast[k] = tr.n6_on[k] - tr.n6_off[k];
  return optimal_readout_from_contrast(tr.time, contrast);
}

// ---------------------------------------------------------------------------
// Photons per spin and the pulsed detection chain

struct PhotonsPerSpin {
  double a = 0;  // prepared m_s = 0 (polarized branch)
  double b = 0;  // prepared m_s = +-1 (swapped branch)
};

namespace detail {

// integral_0^t_read of u(t) dt on the trace grid, trapezoid with a linearly
// interpolated partial last interval.
inline double integrate_to(const std::vector<double>& time,
                           const std::vector<double>& u, double t_read) {
  double acc = 0.0;
  for (std::size_t k = 1; k < time.size(); ++k) {
    if (time[k] <= t_read) {
      acc += 0.5 * (u[k - 1] + u[k]) * (time[k] - time[k - 1]);
      if (time[k] == t_read) return acc;
    } else {
      const double t0 = time[k - 1];
      if (t_read <= t0) break;
      const double frac = (t_read - t0) / (time[k] - t0);
      const double u_at = u[k - 1] + (u[k] - u[k - 1]) * frac;
      acc += 0.5 * (u[k - 1] + u_at) * (t_read - t0);
      break;
    }
  }
  return acc;
}

// Normalized detected-intensity traces u(t) for both branches under the
// given detection settings.
inline std::pair<std::vector<double>, std::vector<double>> detected_traces(
    const PulsedPixelTrace& tr, const DetectionConfig& det,
    DetectionMode mode, double R, double phi_lo) {
  const std::size_t n = tr.time.size();
  std::vector<double> u_off(n), u_on(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double r_off = reflection_magnitude(tr.I_NV_off[k], det.R0);
    const double r_on = reflection_magnitude(tr.I_NV_on[k], det.R0);
    if (mode == DetectionMode::direct) {
      u_off[k] = r_off * r_off;
      u_on[k] = r_on * r_on;
    } else {
      u_off[k] = homodyne_output(r_off, nv_phase(tr.I_NV_off[k] * det.R0, det),
                                 R, phi_lo);
      u_on[k] = homodyne_output(r_on, nv_phase(tr.I_NV_on[k] * det.R0, det),
                                R, phi_lo);
    }
  }
  return {std::move(u_off), std::move(u_on)};
}

}  // namespace detail

// Mean detected photons per spin per measurement for the two prepared spin
// states, integrating the detected intensity over the readout window.
inline PhotonsPerSpin photons_per_spin(const PulsedPixelTrace& tr,
                                       const DetectionConfig& det,
                                       DetectionMode mode, double I_s,
                                       const PixelGeometry& geom,
                                       double n_NV, double t_read) {
  if (!(t_read > 0)) throw ValidationError("photons_per_spin: t_read must be > 0");
  const auto [u_off, u_on] =
      detail::detected_traces(tr, det, mode, det.R, det.delta_phi_LO);
  const double n_spins = n_NV * geom.pixel_volume();
  const double flux = I_s * geom.L * geom.L / photon_energy(kLambdaProbe);
  PhotonsPerSpin ps;
  ps.a = flux * detail::integrate_to(tr.time, u_off, t_read) / n_spins;
  ps.b = flux * detail::integrate_to(tr.time, u_on, t_read) / n_spins;
  return ps;
}

// Homodyne operating point maximizing the pulsed photon-count SNR
// |N_a - N_b| / sqrt(N_a + N_b) over the readout window.
inline HomodyneOptimum optimize_homodyne_pulsed(
    const PulsedPixelTrace& tr, const DetectionConfig& det, double I_s,
    double L, double t_read, const HomodyneOptimizerOptions& opt = {}) {
  const double two_pi = 2.0 * std::numbers::pi;
  auto objective = [&](double R, double phi) {
    const auto [u_off, u_on] =
        detail::detected_traces(tr, det, DetectionMode::homodyne, R, phi);
    const double n_off = detail::integrate_to(tr.time, u_off, t_read);
    const double n_on = detail::integrate_to(tr.time, u_on, t_read);
    const double denom = n_off + n_on;
    if (!(denom > 0)) return 0.0;
    return std::abs(n_off - n_on) / std::sqrt(denom);
  };

  // Coarser grid than the CW optimizer; each evaluation walks the traces.
  const int n_R = std::max(24, opt.n_R / 4);
  const int n_phi = std::max(32, opt.n_phi / 4);
  struct Cell { double v, R, phi; };
  std::vector<Cell> best;
  for (int i = 0; i < n_R; ++i) {
    const double R = opt.R_min + (opt.R_max - opt.R_min) * i / (n_R - 1);
    for (int j = 0; j < n_phi; ++j) {
      const double phi = two_pi * j / n_phi;
      const double v = objective(R, phi);
      if (int(best.size()) < opt.top_k) {
        best.push_back({v, R, phi});
      } else if (v > best.back().v) {
        best.back() = {v, R, phi};
      } else {
        continue;
      }
      std::sort(best.begin(), best.end(),
                [](const Cell& a, const Cell& b) { return a.v > b.v; });
    }
  }
  if (best.empty() || !(best.front().v > 0))
    throw DegenerateOptimumError(
        "optimize_homodyne_pulsed: zero contrast over the search grid");

  const double dR = (opt.R_max - opt.R_min) / (n_R - 1);
  const double dphi = two_pi / n_phi;
  Cell champion = best.front();
  for (const Cell& start : best) {
    double R = start.R, phi = start.phi;
    double wR = 2.0 * dR, wphi = 2.0 * dphi;
    for (int round = 0; round < 12; ++round) {
      phi = detail::golden_max([&](double x) { return objective(R, x); },
                               phi - wphi, phi + wphi, 24);
      R = detail::golden_max(
          [&](double x) { return objective(x, phi); },
          std::max(opt.R_min, R - wR), std::min(opt.R_max, R + wR), 24);
      wR *= 0.5;
      wphi *= 0.5;
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
  // champion.v carries units of sqrt(time); scaling by the photon flux
  // yields the photon-count SNR of one readout window.
  res.snr = champion.v * std::sqrt(I_s * L * L / photon_energy(kLambdaProbe));
  res.snr_norm = res.snr / std::sqrt(t_read * L * L);
  return res;
}

// ---------------------------------------------------------------------------
// Reports

enum class Protocol { cw, pulsed };

inline const char* to_string(Protocol p) {
  return p == Protocol::cw ? "cw" : "pulsed";
}

// One full pipeline evaluation. Sensitivities are in T m / Hz^1/2 (multiply
// by 1e18 for pT um / Hz^1/2); infinities mean "unmeasurable" and serialize
// as that token.
struct SensitivityReport {
  Protocol protocol = Protocol::cw;
  DetectionMode mode = DetectionMode::homodyne;
  double I_t = 0, I_s = 0;     // W/m^2
  double d_NV = 0, L = 0;      // m
  double eta_cw = std::numeric_limits<double>::quiet_NaN();
  double eta_ac = std::numeric_limits<double>::quiet_NaN();
  double eta_sp = 0;
  double sigma_R = std::numeric_limits<double>::quiet_NaN();
  double t_read_opt = std::numeric_limits<double>::quiet_NaN();
  double tau = std::numeric_limits<double>::quiet_NaN();  // echo time used
  double R_used = std::numeric_limits<double>::quiet_NaN();
  double dphi_lo_used = std::numeric_limits<double>::quiet_NaN();
  ReadoutOptimumStatus readout_status = ReadoutOptimumStatus::interior;
  std::vector<std::string> provenance;  // input data lineage notes

  void validate() const {
    if (std::isfinite(sigma_R) && !(sigma_R >= 1.0))
      throw ValidationError("report: sigma_R must be >= 1");
    if (std::isfinite(eta_cw) && eta_cw + 1e-12 * eta_sp < eta_sp)
      throw ValidationError(
          "report: eta_cw below the spin-projection limit (unphysical "
          "inputs)");
    if (std::isfinite(eta_ac) && eta_ac + 1e-12 * eta_sp < eta_sp)
      throw ValidationError(
          "report: eta_ac below the spin-projection limit (unphysical "
          "inputs)");
  }
};

}  // namespace nvsurf
