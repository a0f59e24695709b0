// dispersion.hpp - grating momentum-matching design equations.
//
// Two families of modes matter for the metasurface: diffracted-wave
// (Rayleigh-Wood anomaly) modes, which satisfy
//     (omega/c) n_d = k0 sin(theta_i) + m 2pi/p,
// and surface-plasmon Bloch-wave modes, whose grating-coupled dispersion is
//     Re[(omega/c) sqrt(eps_m eps_d / (eps_m + eps_d))] = |k_x + m 2pi/p|.

#pragma once

#include <cmath>
#include <complex>
#include <string>

#include "nvsurf/constants.hpp"
#include "nvsurf/errors.hpp"

namespace nvsurf {

// Grating period that phase-matches diffraction order m at wavelength
// lambda and incidence angle theta_i inside a dielectric of index n_d:
// p = m * lambda / (n_d - sin(theta_i)).
inline double rwa_period(double lambda, double n_d, int m_order,
                         double theta_i) {
  if (!(lambda > 0) || !(n_d > 0))
    throw ValidationError("rwa_period: lambda and n_d must be > 0");
  if (m_order == 0)
    throw ValidationError("rwa_period: diffraction order m must be nonzero");
  const double denom = n_d - std::sin(theta_i);
  const double p = m_order * lambda / denom;
  if (!(p > 0) || !std::isfinite(p))
    throw DomainError("rwa_period: no positive period solves the "
                      "phase-matching condition (n_d - sin(theta) = " +
                      std::to_string(denom) + ", m = " +
                      std::to_string(m_order) + ")");
  return p;
}

// Incidence angle coupling order m at wavelength lambda for a given period:
// sin(theta) = n_d - m*lambda/p. Returns the signed angle.
inline double rwa_incidence_angle(double lambda, double n_d, int m_order,
                                  double p) {
  if (!(lambda > 0) || !(n_d > 0) || !(p > 0))
    throw ValidationError(
        "rwa_incidence_angle: lambda, n_d, p must be > 0");
  if (m_order == 0)
    throw ValidationError(
        "rwa_incidence_angle: diffraction order m must be nonzero");
  const double s = n_d - m_order * lambda / p;
  if (std::abs(s) > 1.0)
    throw DomainError(
        "rwa_incidence_angle: no free-space coupling; required sin(theta) = " +
        std::to_string(s) + " exceeds unity");
  return std::asin(s);
}

// Drude metal permittivity with an optional single Lorentz oscillator:
// eps(w) = eps_inf - wp^2/(w^2 + i gamma w)
//        + lorentz_s * wl^2 / (wl^2 - w^2 - i gamma_l w).
struct DrudeLorentzMetal {
  double eps_inf = 1.0;
  double omega_p = 0.0;   // rad/s
  double gamma = 0.0;     // rad/s
  double lorentz_s = 0.0;
  double omega_l = 0.0;
  double gamma_l = 0.0;

  std::complex<double> eps(double omega) const {
    std::complex<double> e =
        eps_inf - omega_p * omega_p /
                      (omega * omega + std::complex<double>(0, gamma * omega));
    if (lorentz_s != 0.0)
      e += lorentz_s * omega_l * omega_l /
           (omega_l * omega_l - omega * omega -
            std::complex<double>(0, gamma_l * omega));
    return e;
  }

  std::complex<double> eps_at_wavelength(double lambda) const {
    return eps(angular_frequency(lambda));
  }
};

// Near-IR Drude fit for silver: eps_inf = 3.7, hbar*wp = 9.1 eV,
// hbar*gamma = 18 meV. Adequate through the visible-to-telecom range used
// here; swap coefficients for a different tabulation if needed.
inline DrudeLorentzMetal silver_drude() {
  DrudeLorentzMetal m;
  m.eps_inf = 3.7;
  m.omega_p = 9.1 * kElectronVolt / kHbar;
  m.gamma = 0.018 * kElectronVolt / kHbar;
  return m;
}

struct DispersionQuery {
  double lambda = 0;    // m
  double n_d = 0;       // dielectric index
  int m = 1;            // diffraction / Bloch order
  double theta_i = 0;   // rad
  double p = 0;         // m
  std::complex<double> eps_m{0, 0};  // metal permittivity at lambda
};

// Signed residual of the plasmon Bloch-wave condition,
//   Re[(w/c) sqrt(eps_m eps_d/(eps_m+eps_d))] - |k_x + m 2pi/p|.
// A root locates a grating-coupled plasmon resonance.
inline double spp_bw_mismatch(const DispersionQuery& q) {
  if (!(q.lambda > 0) || !(q.n_d > 0) || !(q.p > 0))
    throw ValidationError("spp_bw_mismatch: lambda, n_d, p must be > 0");
  const std::complex<double> eps_d(q.n_d * q.n_d, 0.0);
  const std::complex<double> denom = q.eps_m + eps_d;
  if (std::abs(denom) <= 1e-12 * (std::abs(q.eps_m) + std::abs(eps_d)))
    throw PoleError(
        "spp_bw_mismatch: eps_m + eps_d vanishes (surface-mode branch "
        "singularity)");
  const double k0 = 2.0 * std::numbers::pi / q.lambda;
  const std::complex<double> k_spp =
      k0 * std::sqrt(q.eps_m * eps_d / denom);
  const double k_grating =
      std::abs(k0 * std::sin(q.theta_i) +
               q.m * 2.0 * std::numbers::pi / q.p);
  return k_spp.real() - k_grating;
}

}  // namespace nvsurf
