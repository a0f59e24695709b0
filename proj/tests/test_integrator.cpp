#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nvsurf/integrator.hpp"

using namespace nvsurf;

namespace {

OpticalDrive drive_mw(double I_t_mw, double I_s_mw, bool mw) {
  OpticalDrive d;
  d.I_t = I_t_mw * 1e9;
  d.I_s = I_s_mw * 1e9;
  d.mw_on = mw;
  return d;
}

}  // namespace

TEST_CASE("frozen dynamics: zero generator keeps the trace constant") {
  RateGenerator gen;  // G = 0
  LevelPopulations init;
  init.n[level::ground_ms0] = 0.75;
  init.n[level::singlet_lower] = 0.25;
  const auto tr = evolve(gen, init, 1e-6, 1e-7);
  REQUIRE(tr.size() >= 10);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    CHECK(tr.samples[k].n[level::ground_ms0] == doctest::Approx(0.75));
    CHECK(tr.samples[k].n[level::singlet_lower] == doctest::Approx(0.25));
  }
}

TEST_CASE("dark decay of |3> matches the closed-form lifetime") {
  const auto params = default_params();
  const auto gen = build_generator(params, drive_mw(0, 0, false), 1, 1);

  LevelPopulations init;
  init.n[level::excited_ms0] = params.n_NV;

  const double rate = params.k31 + params.k35;       // 73.9 us^-1
  const double tau = 1.0 / rate;                     // 13.53 ns
  CHECK(tau == doctest::Approx(13.5e-9).epsilon(3e-3));

  IntegratorOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-16;
  const auto tr = evolve(gen, init, 5 * tau, tau / 20, opt);

  // Measured 1/e time from the sample nearest tau.
  std::size_t k_tau = 0;
  for (std::size_t k = 0; k < tr.size(); ++k)
    if (std::abs(tr.time[k] - tau) < std::abs(tr.time[k_tau] - tau)) k_tau = k;
  const double frac =
      tr.samples[k_tau].n[level::excited_ms0] / params.n_NV;
  const double tau_measured = -tr.time[k_tau] / std::log(frac);
  CHECK(tau_measured == doctest::Approx(tau).epsilon(1e-4));

  // Full-curve comparison against the exponential.
  for (std::size_t k = 1; k < tr.size(); ++k) {
    const double expect = params.n_NV * std::exp(-rate * tr.time[k]);
    CHECK(tr.samples[k].n[level::excited_ms0] ==
          doctest::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("conservation and positivity along random traces") {
  const auto params = default_params();
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gen = build_generator(
        params, drive_mw(0.003 + 2 * u(rng), 2 * u(rng), u(rng) > 0.5),
        0.5 + 20 * u(rng), 0.5 + 50 * u(rng));
    LevelPopulations init;
    // Random valid initial state.
    double sum = 0;
    for (int i = 0; i < kNumLevels; ++i) sum += (init.n[i] = u(rng));
    for (int i = 0; i < kNumLevels; ++i) init.n[i] *= params.n_NV / sum;

    const auto tr = evolve(gen, init, 20e-6, 1e-6);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      CHECK(std::abs(tr.samples[k].total() - params.n_NV) <=
            1e-9 * params.n_NV);
      for (int i = 0; i < kNumLevels; ++i)
        CHECK(tr.samples[k].n[i] >= -1e-12 * params.n_NV);
    }
  }
}

TEST_CASE("oracle equivalence: transient limit reproduces steady state") {
  const auto params = default_params();
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(0, 1);
  IntegratorOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-16;

  for (int trial = 0; trial < 20; ++trial) {
    const double I_t = 0.01 * std::pow(100.0, u(rng));  // 0.01..1 mW/um^2
    const double I_s = 0.01 + 2 * u(rng);
    const bool mw = u(rng) > 0.5;
    const double enh_p = 0.5 + 10 * u(rng);
    const double enh_s = 0.5 + 30 * u(rng);
    const auto gen =
        build_generator(params, drive_mw(I_t, I_s, mw), enh_p, enh_s);

    const auto ss = steady_state(gen, params.n_NV);

    LevelPopulations init;
    init.n[level::ground_ms0] = params.n_NV;
    const auto tr = evolve(gen, init, 10e-3, 1e-3, opt);
    const auto& last = tr.samples.back();

    for (int i = 0; i < kNumLevels; ++i) {
      INFO("trial ", trial, " level ", i + 1);
      CHECK(std::abs(last.n[i] - ss.n[i]) <=
            1e-6 * std::max(ss.n[i], 1e-12 * params.n_NV));
    }
  }
}

TEST_CASE("fixed-step error halves twice when the step halves") {
  // Mildly stiff generator so the asymptotic second-order regime is clean.
  auto params = default_params();
  params.Gamma = 5e6;
  params.gamma_r = 5e3;
  const auto gen = build_generator(params, drive_mw(0.1, 1, true), 1, 1);

  LevelPopulations init;
  init.n[level::ground_ms0] = params.n_NV;

  IntegratorOptions tight;
  tight.rtol = 1e-12;
  tight.atol = 1e-18;
  const double t_end = 2e-6;
  const auto ref = evolve(gen, init, t_end, t_end, tight);

  auto err_at = [&](double h) {
    IntegratorOptions fo;
    fo.fixed_step = h;
    const auto tr = evolve(gen, init, t_end, t_end, fo);
    double e = 0;
    for (int i = 0; i < kNumLevels; ++i)
      e = std::max(e, std::abs(tr.samples.back().n[i] -
                               ref.samples.back().n[i]) /
                          params.n_NV);
    return e;
  };

  const double e1 = err_at(4e-9);
  const double e2 = err_at(2e-9);
  const double ratio = e1 / e2;
  INFO("e1 ", e1, " e2 ", e2, " ratio ", ratio);
  CHECK(ratio > 2.7);   // nominal order 2 -> ratio ~ 4
  CHECK(ratio < 6.0);
}

TEST_CASE("tolerance tightening reduces the adaptive error") {
  const auto params = default_params();
  const auto gen = build_generator(params, drive_mw(0.1, 1, true), 1, 1);
  LevelPopulations init;
  init.n[level::ground_ms0] = params.n_NV;

  IntegratorOptions tight;
  tight.rtol = 1e-12;
  tight.atol = 1e-18;
  const double t_end = 5e-6;
  const auto ref = evolve(gen, init, t_end, t_end, tight);

  double prev_err = -1;
  for (double rtol : {1e-4, 1e-6, 1e-8}) {
    IntegratorOptions o;
    o.rtol = rtol;
    o.atol = 1e-16;
    const auto tr = evolve(gen, init, t_end, t_end, o);
    double e = 0;
    for (int i = 0; i < kNumLevels; ++i)
      e = std::max(e, std::abs(tr.samples.back().n[i] -
                               ref.samples.back().n[i]) /
                          params.n_NV);
    if (prev_err >= 0) CHECK(e < prev_err);
    prev_err = e;
  }
}

TEST_CASE("pulsed readout: spin contrast peaks early, then decays") {
  const auto params = default_params();
  const auto gen = build_generator(params, drive_mw(0.1, 1, false), 2, 9);

  // Green-initialized, then the swapped branch against the polarized one.
  OpticalDrive init_drive = drive_mw(0.1, 0, false);
  const auto init =
      steady_state(build_generator(params, init_drive, 2, 9), params.n_NV);
  LevelPopulations swapped = init;
  std::swap(swapped.n[level::ground_ms0], swapped.n[level::ground_ms1]);

  const auto tr_a = evolve(gen, init, 10e-6, 20e-9);
  const auto tr_b = evolve(gen, swapped, 10e-6, 20e-9);

  double peak = 0, t_peak = 0;
  for (std::size_t k = 0; k < tr_a.size(); ++k) {
    const double c = tr_b.samples[k].n[level::singlet_lower] -
                     tr_a.samples[k].n[level::singlet_lower];
    if (c > peak) { peak = c; t_peak = tr_a.time[k]; }
  }
  const double c_end = tr_b.samples.back().n[level::singlet_lower] -
                       tr_a.samples.back().n[level::singlet_lower];
  CHECK(peak > 0);
  CHECK(t_peak < 1e-6);          // contrast maximum within the first 1 us
  CHECK(c_end < 0.05 * peak);    // polarization lost after a few us
}

TEST_CASE("evolve input validation") {
  RateGenerator gen;
  LevelPopulations init;
  init.n[0] = 1.0;
  CHECK_THROWS_AS(evolve(gen, init, -1.0, 1e-9), ValidationError);
  CHECK_THROWS_AS(evolve(gen, init, 1e-6, 0.0), ValidationError);
  LevelPopulations empty;
  CHECK_THROWS_AS(evolve(gen, empty, 1e-6, 1e-7), ValidationError);
  LevelPopulations neg;
  neg.n[0] = 1.0;
  neg.n[1] = -0.5;
  CHECK_THROWS_AS(evolve(gen, neg, 1e-6, 1e-7), ValidationError);
}

TEST_CASE("trace CSV export") {
  RateGenerator gen;
  LevelPopulations init;
  init.n[0] = 1.0;
  const auto tr = evolve(gen, init, 1e-6, 2.5e-7);
  std::ostringstream os;
  tr.write_csv(os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "time_s,n1,n2,n3,n4,n5,n6,n7,n8");
  std::size_t rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == tr.size());
  // Time strictly increasing.
  for (std::size_t k = 1; k < tr.size(); ++k)
    CHECK(tr.time[k] > tr.time[k - 1]);
}
