// golden_rule.hpp - golden-rule absorption rate of the singlet transition
// in a local field, and the linewidth calibration tying it to the measured
// absorption cross section.

#pragma once

#include <cmath>
#include <numbers>

#include "nvsurf/constants.hpp"
#include "nvsurf/errors.hpp"

namespace nvsurf {

// Absorption rate of one emitter in a field of mean-square amplitude E_sq
// inside a dielectric of index n_d:
//   Gamma_abs = (3 / pi^2 hbar) (gamma_r / gamma_star) (lambda/n)^3
//               * (1/2) eps0 n^2 E_sq * cos^2(theta).
// cos2_theta defaults to the equal-weight four-orientation mean for a
// [100]-cut sample (exactly 1/3; see constants.hpp).
inline double golden_rule_absorption(
    double gamma_r, double gamma_star, double lambda, double n_d, double E_sq,
    double cos2_theta = kMeanCos2ThetaFourOrientations) {
  if (!(gamma_star > 0))
    throw ValidationError("golden_rule_absorption: gamma_star must be > 0");
  if (!(gamma_r >= 0) || !(lambda > 0) || !(n_d > 0) || !(E_sq >= 0) ||
      !(cos2_theta >= 0))
    throw ValidationError("golden_rule_absorption: invalid input");
  const double lam_n = lambda / n_d;
  return 3.0 / (std::numbers::pi * std::numbers::pi * kHbar) *
         (gamma_r / gamma_star) * lam_n * lam_n * lam_n * 0.5 * kEps0 *
         (n_d * n_d) * E_sq * cos2_theta;
}

// Effective transition linewidth gamma_star such that the golden-rule rate
// in the field of a plane wave of intensity I reproduces sigma_s * I /
// (hbar omega) for every I. Closed form:
//   gamma_star = (6/pi) gamma_r (lambda/n)^2 cos2_theta / sigma_s.
inline double calibrate_linewidth(
    double sigma_s, double gamma_r, double lambda, double n_d,
    double cos2_theta = kMeanCos2ThetaFourOrientations) {
  if (!(sigma_s > 0) || !(gamma_r > 0) || !(lambda > 0) || !(n_d > 0) ||
      !(cos2_theta > 0))
    throw ValidationError("calibrate_linewidth: inputs must be positive");
  const double lam_n = lambda / n_d;
  return 6.0 / std::numbers::pi * gamma_r * lam_n * lam_n * cos2_theta /
         sigma_s;
}

}  // namespace nvsurf
