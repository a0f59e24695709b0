// acceptance.cpp - end-to-end acceptance suite. Each numbered criterion
// prints one [PASS]/[FAIL] line; soft reproduction targets (criterion 10)
// are checked against the documented synthetic field maps and phase table
// at order-of-magnitude tolerance and print measured-vs-target without
// affecting the exit status. Any hard failure exits nonzero.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nvsurf/csv.hpp"
#include "nvsurf/dispersion.hpp"
#include "nvsurf/golden_rule.hpp"
#include "nvsurf/pipeline.hpp"

using namespace nvsurf;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
int g_failures = 0;

void report(int criterion, bool ok, const std::string& what) {
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion,
              what.c_str());
  if (!ok) ++g_failures;
}

void report_soft(bool ok, const std::string& what) {
  std::printf("[%s] criterion 10 (soft): %s\n", ok ? "soft-pass" : "SOFT-MISS",
              what.c_str());
}

OpticalDrive drive_mw(double I_t_mw, double I_s_mw, bool mw) {
  OpticalDrive d;
  d.I_t = I_t_mw * 1e9;
  d.I_s = I_s_mw * 1e9;
  d.mw_on = mw;
  return d;
}

std::string fmt(const char* f, double a, double b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// --------------------------------------------------------------------------

void criterion_1_conservation() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto params = default_params();
  std::mt19937 rng(1001);
  std::uniform_real_distribution<double> u(0, 1);

  bool ok = true;
  int checked = 0;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    const double I_t = 0.002 * std::pow(500.0, u(rng));  // 0.002..1 mW/um^2
    const double I_s = 2.5 * u(rng);
    const bool mw = u(rng) > 0.5;
    const double enh_p = 0.3 + 20 * u(rng);
    const double enh_s = 0.3 + 50 * u(rng);
    const auto gen =
        build_generator(params, drive_mw(I_t, I_s, mw), enh_p, enh_s);

    const auto ss = steady_state(gen, params.n_NV);
    if (std::abs(ss.total() - params.n_NV) > 1e-9 * params.n_NV) ok = false;
    for (int i = 0; i < kNumLevels; ++i)
      if (ss.n[i] < -1e-12 * params.n_NV) ok = false;

    LevelPopulations init;
    double s = 0;
    for (int i = 0; i < kNumLevels; ++i) s += (init.n[i] = u(rng));
    for (int i = 0; i < kNumLevels; ++i) init.n[i] *= params.n_NV / s;
    const auto tr = evolve(gen, init, 20e-6, 1e-6);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      if (std::abs(tr.samples[k].total() - params.n_NV) > 1e-9 * params.n_NV)
        ok = false;
      for (int i = 0; i < kNumLevels; ++i)
        if (tr.samples[k].n[i] < -1e-12 * params.n_NV) ok = false;
      ++checked;
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  report(1, ok && secs < 60.0,
         "conservation 1e-9 and positivity -1e-12 over 100 random drives, " +
             std::to_string(checked) + " samples, " +
             std::to_string(secs).substr(0, 5) + " s (< 60 s)");
}

void criterion_2_oracle_equivalence() {
  const auto params = default_params();
  std::mt19937 rng(2002);
  std::uniform_real_distribution<double> u(0, 1);
  IntegratorOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-16;

  bool ok = true;
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const double I_t = 0.01 * std::pow(100.0, u(rng));
    const double I_s = 0.01 + 2.5 * u(rng);
    const bool mw = u(rng) > 0.5;
    const auto gen = build_generator(params, drive_mw(I_t, I_s, mw),
                                     0.5 + 10 * u(rng), 0.5 + 30 * u(rng));
    const auto ss = steady_state(gen, params.n_NV);
    LevelPopulations init;
    init.n[level::ground_ms0] = params.n_NV;
    const auto tr = evolve(gen, init, 10e-3, 2e-3, opt);
    for (int i = 0; i < kNumLevels; ++i) {
      const double rel = std::abs(tr.samples.back().n[i] - ss.n[i]) /
                         std::max(ss.n[i], 1e-12 * params.n_NV);
      worst = std::max(worst, rel);
      if (rel > 1e-6) ok = false;
    }
  }
  report(2, ok,
         fmt("steady state vs 10 ms transient limit, 20 configs, worst "
             "component error %.2e (tol %.0e)",
             worst, 1e-6));
}

void criterion_3_dispersion() {
  const double p = rwa_period(1042e-9, 2.4, 1, 0.0);
  const bool ok_p = std::abs(p - 434e-9) < 1e-9;
  const double th =
      std::abs(rwa_incidence_angle(532e-9, 2.4, 2, 434e-9)) * 180.0 / kPi;
  const bool ok_t = std::abs(th - 2.9) < 0.2;
  report(3, ok_p && ok_t,
         fmt("grating period %.2f nm (434 +- 1), coupling angle %.3f deg "
             "(2.9 +- 0.2)",
             p * 1e9, th));
}

void criterion_4_dark_decay() {
  const auto params = default_params();
  const auto gen = build_generator(params, drive_mw(0, 0, false), 1, 1);
  LevelPopulations init;
  init.n[level::excited_ms0] = params.n_NV;
  const double tau = 1.0 / (params.k31 + params.k35);

  IntegratorOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-16;
  const auto tr = evolve(gen, init, 3 * tau, tau / 16, opt);
  std::size_t k_tau = 0;
  for (std::size_t k = 0; k < tr.size(); ++k)
    if (std::abs(tr.time[k] - tau) < std::abs(tr.time[k_tau] - tau)) k_tau = k;
  const double tau_measured =
      -tr.time[k_tau] /
      std::log(tr.samples[k_tau].n[level::excited_ms0] / params.n_NV);
  const double rel = std::abs(tau_measured - tau) / tau;
  report(4, rel < 1e-4,
         fmt("dark |3> decay time %.6g ns vs closed form %.6g ns",
             tau_measured * 1e9, tau * 1e9) +
             fmt(", rel err %.2e (tol %.0e)", rel, 1e-4));
}

void criterion_5_golden_rule() {
  const double sigma_s = 3e-22, gamma_r = 1e6, lambda = 1042e-9, n = 2.4;
  const double gs = calibrate_linewidth(sigma_s, gamma_r, lambda, n);
  bool ok = true;
  double worst = 0;
  for (double I = 1e4; I <= 1.0001e9; I *= 10) {
    const double rate =
        golden_rule_absorption(gamma_r, gs, lambda, n, plane_wave_field_sq(I, n));
    const double expect = sigma_s * I / photon_energy(lambda);
    const double rel = std::abs(rate - expect) / expect;
    worst = std::max(worst, rel);
    if (rel > 1e-9) ok = false;
  }
  report(5, ok,
         fmt("calibrated golden rule vs sigma_s*I/(hbar w) over 5 decades, "
             "worst rel err %.2e (tol %.0e)",
             worst, 1e-9));
}

void criterion_6_homodyne_algebra() {
  std::mt19937 rng(6006);
  std::uniform_real_distribution<double> u(0, 1);
  bool ok = true;
  for (int trial = 0; trial < 10000; ++trial) {
    const double R = u(rng);
    const double r = 1.5 * u(rng);
    const double phi = 4 * kPi * (u(rng) - 0.5);
    const double out = homodyne_output(r, 0.0, R, phi);
    const double lo = std::pow(std::sqrt(1 - R) - std::sqrt(R) * r, 2);
    const double hi = std::pow(std::sqrt(1 - R) + std::sqrt(R) * r, 2);
    if (out < lo - 1e-12 || out > hi + 1e-12) ok = false;
  }
  // Phase-averaged unit-reflectance output is exactly 1 (trapezoid over a
  // period is exact for trigonometric polynomials).
  for (double R : {0.05, 0.3, 0.5, 0.87, 0.99}) {
    double acc = 0;
    const int N = 128;
    for (int k = 0; k < N; ++k)
      acc += homodyne_output(1.0, 0.0, R, 2 * kPi * k / N);
    if (std::abs(acc / N - 1.0) > 1e-12) ok = false;
  }
  if (std::abs(homodyne_output(1.0, 0.0, 0.5, kPi)) > 1e-12) ok = false;
  report(6, ok,
         "interferometer bounds, phase average and null identities to 1e-12 "
         "over 10^4 random settings");
}

void criterion_7_optimizer(const RunConfig& base, const FieldMap& pump,
                           const FieldMap& probe) {
  // Stationarity against an independent dense verification grid.
  const auto res =
      resolve_populations(pump, probe, base.photophysics, base.optical_drive());
  const auto sig = pixel_absorption(res, probe, base.photophysics,
                                    base.detection, base.geometry.d_NV);
  const auto best = optimize_homodyne(sig, base.detection,
                                      base.optical_drive().I_s, 1.0,
                                      base.geometry.L);
  const ReflectionPair rp = reflection_state(sig, base.detection);
  double grid_max = 0;
  for (int i = 0; i < 200; ++i) {
    const double R = 0.0025 + (0.995) * i / 199.0;
    for (int j = 0; j < 200; ++j) {
      const double phi = 2 * kPi * j / 200.0;
      const auto [u_off, u_on] =
          detail::detected_outputs(rp, DetectionMode::homodyne, R, phi);
      const double denom = u_off + u_on;
      if (denom > 0)
        grid_max = std::max(grid_max, std::abs(u_off - u_on) / std::sqrt(denom));
    }
  }
  const double best_raw =
      best.snr_norm / std::sqrt(base.optical_drive().I_s /
                                photon_energy(kLambdaProbe));
  const bool ok_stationary = grid_max <= best_raw * (1 + 1e-6);

  // Homodyne optimum dominates direct detection across the sweep grid.
  bool ok_dominates = true;
  for (int i = 0; i < 8; ++i) {
    const double I_t = 0.01 * std::pow(100.0, i / 7.0);
    for (double I_s : {0.1, 0.5, 1.0, 2.0}) {
      RunConfig cfg = base;
      cfg.drive.I_t = I_t;
      cfg.drive.I_s = I_s;
      const auto r2 = resolve_populations(pump, probe, cfg.photophysics,
                                          cfg.optical_drive());
      const auto s2 = pixel_absorption(r2, probe, cfg.photophysics,
                                       cfg.detection, cfg.geometry.d_NV);
      const double direct = snr_shot_limited(
          s2, cfg.detection, cfg.optical_drive().I_s, cfg.geometry.L, 1.0,
          DetectionMode::direct);
      const auto hom = optimize_homodyne(s2, cfg.detection,
                                         cfg.optical_drive().I_s, 1.0,
                                         cfg.geometry.L);
      if (hom.snr < direct * (1 - 1e-9)) ok_dominates = false;
    }
  }
  report(7, ok_stationary && ok_dominates,
         fmt("200x200 verification grid max %.6e <= optimizer %.6e",
             grid_max, best_raw) +
             "; homodyne >= direct on the 8x4 intensity sweep grid");
}

void criterion_8_low_contrast_linearity() {
  const auto base_params = default_params();
  DetectionConfig det;

  auto snr_for = [&](double n_scale, double d, double map_scale) {
    PhotophysicsParams p = base_params;
    p.n_NV = base_params.n_NV * n_scale;
    const auto pump = synthetic_field_map(
        434e-9, 12e-6, 0.0, 1e-7, 1.0,
        std::numeric_limits<double>::infinity(), 5, 25, 532e-9);
    const auto probe = synthetic_field_map(
        434e-9, 12e-6, 0.0, 1e-7, map_scale,
        std::numeric_limits<double>::infinity(), 5, 25, 1042e-9);
    // Tiny probe intensity keeps the populations in the linear regime.
    const auto res = resolve_populations(pump, probe, p, drive_mw(0.1, 1e-4, true));
    const auto sig = pixel_absorption(res, probe, p, det, d);
    return snr_low_contrast(sig, det.R0, 1e-4 * 1e9, 1e-6, 1e-5);
  };

  const double s0 = snr_for(1, 5e-6, 1);
  const double rn = snr_for(10, 5e-6, 1) / s0;
  const double rd = snr_for(1, 0.5e-6, 1) * 10 / s0;
  const double rm = snr_for(1, 5e-6, 10) / s0;
  const bool ok = std::abs(rn / 10 - 1) < 0.01 &&
                  std::abs(rd - 1) < 0.01 && std::abs(rm / 10 - 1) < 0.01;
  report(8, ok,
         fmt("snr_low_contrast linearity over a decade: x10 n_NV -> %.4f, "
             "d_NV ratio %.4f, ",
             rn, rd) +
             fmt("x10 map scale -> %.4f (all within 1%% of 10, 1, 10)", rm,
                 0.0));
}

void criterion_9_spin_projection() {
  const double eta = eta_spin_projection(28e23, 5e-6, 200e-9);
  const double rel = std::abs(eta * 1e18 - 3.4) / 3.4;
  report(9, rel < 0.02,
         fmt("eta_sp = %.4f pT Hz^-1/2 um vs 3.4 (within %.2f%%)", eta * 1e18,
             rel * 100));
}

void criterion_10_soft_targets(const RunConfig& base) {
  std::printf(
      "-- criterion 10: soft reproduction targets (synthetic field maps and "
      "phase table; non-fatal) --\n");

  // CW sensitivity, homodyne, defaults.
  const FieldMap pump = base.pump_map();
  const FieldMap probe = base.probe_map();
  const auto rep_cw = run_cw(base, pump, probe, DetectionMode::homodyne);
  report_soft(rep_cw.eta_cw * 1e15 < 3.0,
              fmt("eta_cw(homodyne) = %.4f nT Hz^-1/2 um vs target < 1 "
                  "(x3 window: < 3)",
                  rep_cw.eta_cw * 1e15, 0.0));

  // Pulsed chain on a reduced grid.
  RunConfig pc = base;
  pc.field_maps.pump_synthetic.nx = 17;
  pc.field_maps.pump_synthetic.ny = 101;
  pc.field_maps.probe_synthetic.nx = 17;
  pc.field_maps.probe_synthetic.ny = 101;
  const auto rep_ac = run_pulsed(pc, pc.pump_map(), pc.probe_map(),
                                 DetectionMode::homodyne);
  report_soft(rep_ac.eta_ac * 1e18 >= 10.0 / 3 && rep_ac.eta_ac * 1e18 <= 30.0,
              fmt("eta_ac(homodyne) = %.2f pT Hz^-1/2 um vs target 10 "
                  "(x3 window: 3.3..30)",
                  rep_ac.eta_ac * 1e18, 0.0));
  report_soft(rep_ac.t_read_opt >= 100e-9 && rep_ac.t_read_opt <= 2e-6,
              fmt("optimal readout time = %.0f ns vs target near 500 "
                  "(window 100..2000)",
                  rep_ac.t_read_opt * 1e9, 0.0));
  report_soft(1.0 / rep_ac.sigma_R >= 0.2 && 1.0 / rep_ac.sigma_R <= 0.8,
              fmt("readout fidelity 1/sigma_R = %.3f vs target near 0.5 "
                  "(window 0.2..0.8)",
                  1.0 / rep_ac.sigma_R, 0.0));

  // Operating-point reproduction with the shipped phase table and a lossy
  // baseline reflectance.
  RunConfig ref = base;
  ref.detection.R0 = 0.13;
  ref.detection.phase_model.kappa = 0.0;
  {
    std::ifstream ts(std::string(NVSURF_DATA_DIR) + "/dphi_nv_table.csv");
    std::string line;
    std::getline(ts, line);  // header
    while (std::getline(ts, line)) {
      double a, f;
      if (std::sscanf(line.c_str(), "%lg,%lg", &a, &f) == 2)
        ref.detection.phase_model.table.emplace_back(a, f);
    }
  }
  const auto res = resolve_populations(pump, probe, ref.photophysics,
                                       ref.optical_drive());
  const auto sig = pixel_absorption(res, probe, ref.photophysics,
                                    ref.detection, ref.geometry.d_NV);
  const auto opt = optimize_homodyne(sig, ref.detection,
                                     ref.optical_drive().I_s, 10e-6,
                                     ref.geometry.L);
  report_soft(std::abs(opt.delta_phi_lo - 1.28 * kPi) <= 0.15 * kPi,
              fmt("homodyne optimum dphi_LO = %.3f pi vs 1.28 pi (+- 0.15 pi)",
                  opt.delta_phi_lo / kPi, 0.0));
  report_soft(std::abs(opt.R - 0.87) <= 0.1,
              fmt("homodyne optimum R = %.3f vs 0.87 (+- 0.1)", opt.R, 0.0));
}

void criterion_11_depth_monotonicity(const RunConfig& base) {
  double first = 0, last = 0, prev = -1;
  bool monotone = true;
  for (double d_um : {0.5, 1.0, 2.0, 3.5, 5.0, 7.0, 10.0}) {
    RunConfig cfg = base;
    cfg.geometry.d_NV = d_um * 1e-6;
    const auto rep = run_cw(cfg, cfg.pump_map(), cfg.probe_map(),
                            DetectionMode::homodyne);
    if (prev > 0 && rep.eta_cw >= prev) monotone = false;
    if (prev < 0) first = rep.eta_cw;
    prev = rep.eta_cw;
    last = rep.eta_cw;
  }
  const double factor = first / last;
  const bool ok = monotone && factor >= 4.5 && factor <= 18.0;
  report(11, ok,
         fmt("sensitivity improves monotonically over d_NV 0.5..10 um, "
             "factor %.2f vs ~9 (x2 window: 4.5..18)",
             factor, 0.0));
}

void criterion_12_determinism() {
  const std::string dir = "acceptance_determinism";
  fs::create_directories(dir);
  const std::string cfg_path = dir + "/config.json";
  {
    std::ofstream os(cfg_path);
    os << R"({
  "field_maps": {
    "pump_synthetic":  {"nx": 9, "ny": 61, "y_max": 8e-6},
    "probe_synthetic": {"nx": 9, "ny": 61, "y_max": 8e-6}
  },
  "solver": {"optimizer_n_R": 32, "optimizer_n_phi": 48}
})";
  }
  const std::string cmd_base =
      std::string(NVSURF_CLI_PATH) + " --config " + cfg_path + " --out " + dir +
      " sensitivity --mode both --protocol cw --sweep drive.I_t --min 0.03 "
      "--max 0.3 --count 3 --log";

  auto body = [&](const std::string& jobs) {
    const int status =
        std::system((cmd_base + jobs + " > /dev/null 2>&1").c_str());
    if (WEXITSTATUS(status) != 0) return std::string();
    std::ifstream is(dir + "/sensitivity.csv");
    std::stringstream ss;
    ss << is.rdbuf();
    return csv_body(ss.str());
  };

  const std::string b1 = body(" --jobs 1");
  const std::string b2 = body(" --jobs 1");
  const std::string b3 = body(" --jobs 4");
  const bool ok = !b1.empty() && b1 == b2 && b1 == b3;
  report(12, ok,
         "repeated cmd_sensitivity runs produce byte-identical CSV bodies "
         "(1 and 4 workers)");
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  std::printf("nvsurf acceptance suite\n");

  const RunConfig base;  // documented defaults

  try {
    criterion_1_conservation();
    criterion_2_oracle_equivalence();
    criterion_3_dispersion();
    criterion_4_dark_decay();
    criterion_5_golden_rule();
    criterion_6_homodyne_algebra();
    const FieldMap pump = base.pump_map();
    const FieldMap probe = base.probe_map();
    criterion_7_optimizer(base, pump, probe);
    criterion_8_low_contrast_linearity();
    criterion_9_spin_projection();
    criterion_10_soft_targets(base);
    criterion_11_depth_monotonicity(base);
    criterion_12_determinism();
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance suite aborted: %s\n", e.what());
    return 1;
  }

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::printf("acceptance suite finished in %.1f s: %s\n", secs,
              g_failures == 0 ? "all hard criteria PASS"
                              : (std::to_string(g_failures) + " FAILURES").c_str());
  return g_failures == 0 ? 0 : 1;
}
