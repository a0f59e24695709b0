// rate_model.hpp - the eight-level NV photodynamics model: transition-rate
// generator construction and the constrained steady-state solve.
//
// Level indexing (the single source of truth for the whole library):
//
//   index 0  |1>  3A2 ground triplet, m_s = 0
//   index 1  |2>  3A2 ground triplet, m_s = +-1
//   index 2  |3>  3E excited triplet, m_s = 0
//   index 3  |4>  3E excited triplet, m_s = +-1
//   index 4  |5>  1A1 singlet (upper)
//   index 5  |6>  1E singlet (lower, probed at 1042 nm)
//   index 6  |7>  NV0 excited state
//   index 7  |8>  NV0 ground state
//
// The generator G is the column-conservative rate matrix of dn/dt = G n:
// G(i,j) for i != j is the rate from level j into level i, diagonals carry
// the negative total outflow, so every column sums to zero.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>

#include "nvsurf/constants.hpp"
#include "nvsurf/errors.hpp"
#include "nvsurf/params.hpp"

namespace nvsurf {

inline constexpr int kNumLevels = 8;

namespace level {
inline constexpr int ground_ms0 = 0;
inline constexpr int ground_ms1 = 1;
inline constexpr int excited_ms0 = 2;
inline constexpr int excited_ms1 = 3;
inline constexpr int singlet_upper = 4;
inline constexpr int singlet_lower = 5;
inline constexpr int nv0_excited = 6;
inline constexpr int nv0_ground = 7;
}  // namespace level

using Matrix8 = Eigen::Matrix<double, kNumLevels, kNumLevels>;
using Vector8 = Eigen::Matrix<double, kNumLevels, 1>;

// Level densities (m^-3) at one spatial cell.
struct LevelPopulations {
  std::array<double, kNumLevels> n{};

  double operator[](int i) const { return n[i]; }
  double& operator[](int i) { return n[i]; }

  double total() const {
    double s = 0;
    for (double v : n) s += v;
    return s;
  }

  Vector8 as_vector() const {
    Vector8 v;
    for (int i = 0; i < kNumLevels; ++i) v[i] = n[i];
    return v;
  }

  static LevelPopulations from_vector(const Vector8& v) {
    LevelPopulations p;
    for (int i = 0; i < kNumLevels; ++i) p.n[i] = v[i];
    return p;
  }
};

// Checks number conservation (relative) and nonnegativity (absolute, in
// units of n_NV) against the contract tolerances.
inline void validate_populations(const LevelPopulations& pop, double n_NV,
                                 double rel_tol = 1e-9,
                                 double neg_tol = 1e-12) {
  if (!(n_NV > 0)) throw ValidationError("populations: n_NV must be > 0");
  const double sum = pop.total();
  if (std::abs(sum - n_NV) > rel_tol * n_NV)
    throw ValidationError("populations: number conservation violated");
  for (int i = 0; i < kNumLevels; ++i)
    if (pop.n[i] < -neg_tol * n_NV)
      throw ValidationError("populations: level " + std::to_string(i + 1) +
                            " is negative");
}

// Incoherent microwave transition rate between the ground spin sublevels,
// Omega_R^2 * T2*/2.
inline double microwave_rate(double omega_r, double t2_star) {
  if (!(omega_r >= 0) || !(t2_star >= 0))
    throw ValidationError("microwave_rate: inputs must be nonnegative");
  return omega_r * omega_r * t2_star / 2.0;
}

// Optical excitation rate sigma*I/(hbar*omega), scaled by the local field
// intensity enhancement.
inline double optical_rate(double sigma, double intensity, double lambda,
                           double enhancement) {
  if (!(sigma >= 0) || !(intensity >= 0) || !(lambda > 0) ||
      !(enhancement >= 0))
    throw ValidationError("optical_rate: inputs must be nonnegative");
  return enhancement * sigma * intensity / photon_energy(lambda);
}

struct RateGenerator {
  Matrix8 G = Matrix8::Zero();
  // Effective (locally enhanced) drive rates, cached for inspection.
  double W_pump = 0;
  double W_probe = 0;
  double W_MW = 0;
  double W_NV0 = 0;

  // Rate from level `from` into level `to` (0-based indices).
  double rate(int from, int to) const { return G(to, from); }

  void add_rate(int from, int to, double r) {
    G(to, from) += r;
    G(from, from) -= r;
  }

  double max_rate() const { return G.diagonal().cwiseAbs().maxCoeff(); }

  bool is_conservative(double tol = 1e-9) const {
    const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
    return (G.colwise().sum()).cwiseAbs().maxCoeff() <= tol * scale;
  }
};

// Assembles the eight-level generator for the given drive condition and
// local field enhancements. All green-driven rates (pumping, two-photon
// ionization, NV0 recombination) see the locally enhanced pump intensity
// enh_pump * I_t; the probe coupling between the singlet levels sees
// enh_probe * I_s and acts symmetrically (absorption up, stimulated
// emission down). The singlet excited-state decay is
// Gamma_eff = gamma_nr + F_p*gamma_r + gamma_quenching with
// gamma_nr = Gamma - gamma_r.
inline RateGenerator build_generator(const PhotophysicsParams& params,
                                     const OpticalDrive& drive,
                                     double local_enh_pump,
                                     double local_enh_probe) {
  if (!(local_enh_pump >= 0) || !(local_enh_probe >= 0))
    throw ValidationError("build_generator: enhancements must be >= 0");
  params.validate();
  drive.validate();

  RateGenerator gen;
  gen.W_pump = optical_rate(params.sigma_t, drive.I_t, drive.lambda_pump,
                            local_enh_pump);
  gen.W_probe = optical_rate(params.sigma_s, drive.I_s, drive.lambda_probe,
                             local_enh_probe);
  gen.W_MW = drive.mw_on ? microwave_rate(params.Omega_R, params.T2_star) : 0.0;
  gen.W_NV0 = optical_rate(params.sigma_NV0, drive.I_t, drive.lambda_pump,
                           local_enh_pump);

  const double I_t_local = drive.I_t * local_enh_pump;
  const double gamma_nr = params.Gamma - params.gamma_r;
  const double gamma_eff =
      gamma_nr + params.F_p * params.gamma_r + params.gamma_quenching;

  using namespace level;
  gen.add_rate(ground_ms0, excited_ms0, gen.W_pump);
  gen.add_rate(ground_ms1, excited_ms1, gen.W_pump);
  if (drive.mw_on) {
    gen.add_rate(ground_ms0, ground_ms1, gen.W_MW);
    gen.add_rate(ground_ms1, ground_ms0, gen.W_MW);
  }
  gen.add_rate(excited_ms0, ground_ms0, params.k31);
  gen.add_rate(excited_ms0, singlet_upper, params.k35);
  gen.add_rate(excited_ms0, nv0_ground, params.k38 * I_t_local);
  gen.add_rate(excited_ms1, ground_ms1, params.k42);
  gen.add_rate(excited_ms1, singlet_upper, params.k45);
  gen.add_rate(excited_ms1, nv0_ground, params.k48 * I_t_local);
  gen.add_rate(singlet_upper, singlet_lower, gamma_eff + gen.W_probe);
  gen.add_rate(singlet_lower, singlet_upper, gen.W_probe);
  gen.add_rate(singlet_lower, ground_ms0, params.k61);
  gen.add_rate(singlet_lower, ground_ms1, params.k62);
  gen.add_rate(nv0_excited, ground_ms0, params.k71 * I_t_local);
  gen.add_rate(nv0_excited, ground_ms1, params.k72 * I_t_local);
  gen.add_rate(nv0_excited, nv0_ground, params.Gamma_NV0);
  gen.add_rate(nv0_ground, nv0_excited, gen.W_NV0);
  return gen;
}

namespace detail {

// Transitive closure of the rate graph (edge j -> i iff rate(j->i) > 0).
inline std::array<std::array<bool, kNumLevels>, kNumLevels> reachability(
    const Matrix8& G) {
  std::array<std::array<bool, kNumLevels>, kNumLevels> r{};
  for (int i = 0; i < kNumLevels; ++i) {
    r[i][i] = true;
    for (int j = 0; j < kNumLevels; ++j)
      if (i != j && G(j, i) > 0.0) r[i][j] = true;
  }
  for (int k = 0; k < kNumLevels; ++k)
    for (int i = 0; i < kNumLevels; ++i)
      if (r[i][k])
        for (int j = 0; j < kNumLevels; ++j)
          if (r[k][j]) r[i][j] = true;
  return r;
}

}  // namespace detail

// Solves G n = 0 subject to sum(n) = n_NV.
//
// Population is assumed to reside in the spin ground manifold (|1>, |2>)
// absent any drive; levels participate only if the rate graph connects them
// from there. Within that reachable set the stationary solution is unique
// iff it contains exactly one closed communicating class; otherwise the
// split between classes depends on history and a DegeneracyError reporting
// the number of independent stationary directions is thrown. In particular
// a fully dark generator without microwave drive leaves the two ground spin
// states disconnected (a two-dimensional stationary space), while microwave
// mixing alone yields the unique equal split.
inline LevelPopulations steady_state(const RateGenerator& gen, double n_NV) {
  if (!(n_NV > 0)) throw ValidationError("steady_state: n_NV must be > 0");
  if (!gen.is_conservative())
    throw ValidationError(
        "steady_state: generator columns must sum to zero (flux "
        "conservation)");

  const auto reach = detail::reachability(gen.G);

  std::array<bool, kNumLevels> in_r{};
  in_r[level::ground_ms0] = true;
  in_r[level::ground_ms1] = true;
  for (int j = 0; j < kNumLevels; ++j)
    if (reach[level::ground_ms0][j] || reach[level::ground_ms1][j])
      in_r[j] = true;

  // Closed communicating classes within the reachable set. A class is
  // closed when no edge leaves it; every stationary solution is a mixture
  // of one stationary distribution per closed class.
  int closed_classes = 0;
  std::array<bool, kNumLevels> seen{};
  for (int i = 0; i < kNumLevels; ++i) {
    if (!in_r[i] || seen[i]) continue;
    std::array<bool, kNumLevels> cls{};
    for (int j = 0; j < kNumLevels; ++j)
      cls[j] = in_r[j] && reach[i][j] && reach[j][i];
    bool closed = true;
    for (int a = 0; a < kNumLevels && closed; ++a) {
      if (!cls[a]) continue;
      seen[a] = true;
      for (int b = 0; b < kNumLevels; ++b)
        if (!cls[b] && gen.G(b, a) > 0.0) closed = false;
    }
    // Mark the whole class visited even if open so it is not re-counted.
    for (int a = 0; a < kNumLevels; ++a)
      if (cls[a]) seen[a] = true;
    if (closed) ++closed_classes;
  }
  if (closed_classes != 1)
    throw DegeneracyError(
        "steady_state: stationary solution is not unique (" +
            std::to_string(closed_classes) +
            " independent stationary directions); populations depend on "
            "history",
        closed_classes);

  std::array<int, kNumLevels> idx{};
  int r = 0;
  for (int i = 0; i < kNumLevels; ++i)
    if (in_r[i]) idx[r++] = i;

  // Bordered least squares in fraction space: [G_RR; 1^T] x = [0; 1].
  // Rows are equilibrated to unit infinity-norm so the widely spread rate
  // scales (1e3..1e9 s^-1) do not degrade the solve.
  Eigen::MatrixXd A(r + 1, r);
  for (int a = 0; a < r; ++a) {
    double row_max = 0;
    for (int b = 0; b < r; ++b) row_max = std::max(row_max, std::abs(gen.G(idx[a], idx[b])));
    const double scale = row_max > 0 ? 1.0 / row_max : 1.0;
    for (int b = 0; b < r; ++b) A(a, b) = gen.G(idx[a], idx[b]) * scale;
  }
  for (int b = 0; b < r; ++b) A(r, b) = 1.0;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(r + 1);
  rhs[r] = 1.0;

  Eigen::VectorXd x = A.colPivHouseholderQr().solve(rhs);

  const double resid = (A * x - rhs).cwiseAbs().maxCoeff();
  if (!(resid < 1e-7) || !x.allFinite())
    throw NumericalError("steady_state: solve failed (residual " +
                         std::to_string(resid) + ")");

  double sum = x.sum();
  if (!(sum > 0))
    throw NumericalError("steady_state: nonpositive total population");
  x *= 1.0 / sum;
  for (int a = 0; a < r; ++a) {
    if (x[a] < -1e-12)
      throw NumericalError("steady_state: negative population beyond "
                           "round-off threshold");
    if (x[a] < 0) x[a] = 0;
  }
  x *= 1.0 / x.sum();

  LevelPopulations pop;
  for (int a = 0; a < r; ++a) pop.n[idx[a]] = x[a] * n_NV;
  return pop;
}

// Net singlet-ground population n6 - n5 (absorption minus stimulated
// emission weight).
inline double net_singlet_population(const LevelPopulations& pop) {
  return pop.n[level::singlet_lower] - pop.n[level::singlet_upper];
}

}  // namespace nvsurf
