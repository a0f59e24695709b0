// params.hpp - physical parameters, drive conditions, pixel geometry and
// detection settings. These are plain immutable value types; validate()
// enforces the documented invariants and throws ValidationError with the
// dotted key of the offending field.

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nvsurf/constants.hpp"
#include "nvsurf/errors.hpp"

namespace nvsurf {

// Rate constants, cross sections, densities and coherence times of the
// eight-level NV photodynamics model.
//
// Units: plain rates in s^-1; k38/k48 (photoionization out of the excited
// triplet) and k71/k72 (optical recombination of the neutral charge state)
// are normalized per unit local intensity, s^-1 per (W/m^2); cross sections
// in m^2; n_NV in m^-3; times in s; Omega_R in rad/s.
struct PhotophysicsParams {
  double k31 = 0, k42 = 0;      // 3E -> 3A2, spin conserving
  double k35 = 0, k45 = 0;      // 3E -> singlet shelving
  double k61 = 0, k62 = 0;      // singlet ground -> 3A2
  double k38 = 0, k48 = 0;      // photoionization, per (W/m^2)
  double k71 = 0, k72 = 0;      // NV0 recombination, per (W/m^2)
  double Gamma = 0;             // singlet excited-state total decay
  double Gamma_NV0 = 0;         // NV0 excited-state decay
  double sigma_t = 0;           // triplet absorption cross section
  double sigma_s = 0;           // singlet absorption cross section
  double sigma_NV0 = 0;         // NV0 absorption cross section
  double n_NV = 0;              // NV- density
  double T2_star = 0, T2 = 0;   // coherence times
  double Omega_R = 0;           // Rabi angular frequency
  double gamma_r = 0;           // singlet radiative decay rate
  double F_p = 1.0;             // Purcell factor
  double gamma_quenching = 0;   // metal-induced quenching rate

  void validate() const {
    auto nonneg = [](double v, const char* key) {
      if (!(v >= 0) || !std::isfinite(v))
        throw ValidationError(std::string("photophysics.") + key +
                              " must be finite and nonnegative");
    };
    nonneg(k31, "k31"); nonneg(k42, "k42");
    nonneg(k35, "k35"); nonneg(k45, "k45");
    nonneg(k61, "k61"); nonneg(k62, "k62");
    nonneg(k38, "k38"); nonneg(k48, "k48");
    nonneg(k71, "k71"); nonneg(k72, "k72");
    nonneg(Gamma, "Gamma"); nonneg(Gamma_NV0, "Gamma_NV0");
    nonneg(sigma_t, "sigma_t"); nonneg(sigma_s, "sigma_s");
    nonneg(sigma_NV0, "sigma_NV0");
    nonneg(n_NV, "n_NV");
    nonneg(T2_star, "T2_star"); nonneg(T2, "T2");
    nonneg(Omega_R, "Omega_R");
    nonneg(gamma_r, "gamma_r"); nonneg(F_p, "F_p");
    nonneg(gamma_quenching, "gamma_quenching");
    if (T2 < T2_star)
      throw ValidationError("photophysics.T2 must be >= T2_star");
    if (gamma_r > Gamma)
      throw ValidationError(
          "photophysics.gamma_r exceeds Gamma (radiative branch cannot "
          "exceed total decay)");
  }
};

// Tabulated defaults. gamma_r is not tabulated directly; it follows from
// the ~0.1% radiative quantum efficiency of the singlet excited state, so
// gamma_r = 1e-3 * Gamma.
inline PhotophysicsParams default_params() {
  PhotophysicsParams p;
  p.k31 = 66e6;
  p.k42 = 66e6;
  p.k35 = 7.9e6;
  p.k45 = 53e6;
  p.k61 = 1.0e6;
  p.k62 = 0.7e6;
  p.k38 = 41.8 * kMhzPerMwUm2ToSi;
  p.k48 = 41.8 * kMhzPerMwUm2ToSi;
  p.k71 = 35.5 * kMhzPerMwUm2ToSi;
  p.k72 = 35.5 * kMhzPerMwUm2ToSi;
  p.Gamma = 1e9;
  p.Gamma_NV0 = 53e6;
  p.sigma_t = 3e-21;
  p.sigma_s = 3e-22;
  p.sigma_NV0 = 6e-21;
  p.n_NV = 28e23;
  p.T2_star = 200e-9;
  p.T2 = 2e-6;
  p.Omega_R = 2.0 * std::numbers::pi * 1.5e6;
  p.gamma_r = 1e-3 * p.Gamma;
  p.F_p = 1.0;
  p.gamma_quenching = 0.0;
  return p;
}

// Optical drive condition. Intensities are stored in SI (W/m^2); config
// files quote them in mW/um^2 and convert on load.
struct OpticalDrive {
  double I_t = 0;        // green pump intensity, W/m^2
  double I_s = 0;        // IR probe intensity, W/m^2
  bool mw_on = false;
  double lambda_pump = kLambdaPump;
  double lambda_probe = kLambdaProbe;

  void validate() const {
    if (!(I_t >= 0) || !std::isfinite(I_t))
      throw ValidationError("drive.I_t must be finite and nonnegative");
    if (!(I_s >= 0) || !std::isfinite(I_s))
      throw ValidationError("drive.I_s must be finite and nonnegative");
  }
};

struct PixelGeometry {
  double L = 1e-6;        // pixel side, m
  double d_NV = 5e-6;     // NV layer thickness, m
  double p = 434e-9;      // grating period, m
  double w = 125e-9;      // wire width, m
  double t = 125e-9;      // wire thickness, m
  double n_diamond = 2.4;

  double pixel_volume() const { return L * L * d_NV; }

  void validate() const {
    if (!(L > 0) || !(d_NV > 0))
      throw ValidationError("geometry: pixel volume L^2*d_NV must be > 0");
    if (!(p > 0)) throw ValidationError("geometry.p must be > 0");
    if (!(w > 0) || !(t > 0))
      throw ValidationError("geometry: wire dimensions must be > 0");
    if (!(w < p)) throw ValidationError("geometry.w must be < p");
    if (!(n_diamond > 0))
      throw ValidationError("geometry.n_diamond must be > 0");
  }
};

// Maps pixel absorption A_pixel to the NV-induced phase of the reflected
// probe. Either a linear slope kappa (rad per unit absorption) or a
// tabulated curve; a nonempty table wins over the slope.
struct PhaseModel {
  double kappa = 0.0;
  std::vector<std::pair<double, double>> table;  // (A_pixel, dphi_rad), sorted

  void validate() const {
    for (std::size_t i = 1; i < table.size(); ++i)
      if (!(table[i].first > table[i - 1].first))
        throw ValidationError(
            "detection.phase_model.table must be strictly increasing in "
            "A_pixel");
  }

  double operator()(double a_pixel) const {
    if (!(a_pixel >= 0))
      throw ValidationError("nv_phase: A_pixel must be nonnegative");
    if (table.empty()) return kappa * a_pixel;
    if (a_pixel < table.front().first || a_pixel > table.back().first)
      throw DomainError("nv_phase: A_pixel outside table range [" +
                        std::to_string(table.front().first) + ", " +
                        std::to_string(table.back().first) + "]");
    for (std::size_t i = 1; i < table.size(); ++i) {
      if (a_pixel <= table[i].first) {
        const auto& [a0, f0] = table[i - 1];
        const auto& [a1, f1] = table[i];
        return f0 + (f1 - f0) * (a_pixel - a0) / (a1 - a0);
      }
    }
    return table.back().second;
  }
};

struct DetectionConfig {
  double R = 0.5;             // beam-splitter power splitting ratio
  double delta_phi_LO = std::numbers::pi;  // LO phase bias, rad
  double R0 = 1.0;            // baseline metasurface reflectance
  PhaseModel phase_model;

  void validate() const {
    if (!(R >= 0.0 && R <= 1.0))
      throw ValidationError("detection.R must lie in [0, 1]");
    if (!(R0 > 0.0 && R0 <= 1.0))
      throw ValidationError("detection.R0 must lie in (0, 1]");
    phase_model.validate();
  }
};

// Numerical knobs shared by the solvers and pipelines.
struct SolverOptions {
  double rtol = 1e-8;          // integrator relative tolerance
  double atol = 1e-18;         // integrator absolute tolerance (fractions)
  double pulsed_t_max = 10e-6;   // pulsed readout horizon, s
  double pulsed_dt_sample = 10e-9;  // pulsed trace sampling, s
  double t_init = 5e-6;        // initialization time budget, s
  int optimizer_n_R = 160;     // homodyne optimizer coarse grid
  int optimizer_n_phi = 256;
  int tau_scan_points = 400;   // AC interrogation-time scan

  void validate() const {
    if (!(rtol > 0) || !(atol > 0))
      throw ValidationError("solver tolerances must be > 0");
    if (!(pulsed_t_max > 0) || !(pulsed_dt_sample > 0))
      throw ValidationError("solver pulsed horizon/sampling must be > 0");
    if (pulsed_dt_sample >= pulsed_t_max)
      throw ValidationError("solver.pulsed_dt_sample must be < pulsed_t_max");
    if (optimizer_n_R < 4 || optimizer_n_phi < 4)
      throw ValidationError("solver optimizer grid must be at least 4x4");
    if (tau_scan_points < 8)
      throw ValidationError("solver.tau_scan_points must be >= 8");
    if (!(t_init > 0)) throw ValidationError("solver.t_init must be > 0");
  }
};

}  // namespace nvsurf
