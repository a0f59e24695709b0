// pipeline.hpp - end-to-end evaluations: config in, SensitivityReport out.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nvsurf/config.hpp"
#include "nvsurf/detection.hpp"
#include "nvsurf/sensitivity.hpp"

namespace nvsurf {

namespace detail {

inline void note_provenance(SensitivityReport& rep, const RunConfig& cfg,
                            const FieldMap& pump, const FieldMap& probe) {
  rep.provenance.push_back(std::string("pump map: ") +
                           (pump.synthetic ? "synthetic" : "file"));
  rep.provenance.push_back(std::string("probe map: ") +
                           (probe.synthetic ? "synthetic" : "file"));
  rep.provenance.push_back(
      cfg.detection.phase_model.table.empty()
          ? "phase model: linear kappa=" +
                std::to_string(cfg.detection.phase_model.kappa)
          : "phase model: table (" +
                std::to_string(cfg.detection.phase_model.table.size()) +
                " points)");
}

// Interrogation time minimizing the echo sensitivity envelope over
// (0, 3 T2]: deterministic scan plus parabolic refinement.
inline double optimal_tau(const PhotophysicsParams& params, double d_NV,
                          double sigma_R, double t_overhead, int scan_points) {
  auto eta_of = [&](double tau) {
    return eta_spin_projection(params.n_NV, d_NV, tau) * sigma_R *
           std::exp(tau / params.T2) *
           std::sqrt(1.0 + t_overhead / tau);
  };
  const double tau_max = 3.0 * params.T2;
  const double tau_min = tau_max / (10.0 * scan_points);
  double best_tau = tau_min, best = eta_of(tau_min);
  for (int i = 1; i < scan_points; ++i) {
    const double tau =
        tau_min * std::pow(tau_max / tau_min, double(i) / (scan_points - 1));
    const double v = eta_of(tau);
    if (v < best) { best = v; best_tau = tau; }
  }
  const double lo = best_tau / 1.5, hi = std::min(best_tau * 1.5, tau_max);
  const double refined = golden_max(
      [&](double tau) { return -eta_of(tau); }, lo, hi, 60);
  return eta_of(refined) < best ? refined : best_tau;
}

}  // namespace detail

// Steady-state (CW ODMR) sensitivity pipeline. In homodyne mode the
// operating point (R, dphi_LO) is optimized per condition, as the detection
// scheme prescribes; direct mode detects the bare reflection.
inline SensitivityReport run_cw(const RunConfig& cfg, const FieldMap& pump,
                                const FieldMap& probe, DetectionMode mode) {
  cfg.validate();
  const OpticalDrive drive = cfg.optical_drive();
  const auto resolved =
      resolve_populations(pump, probe, cfg.photophysics, drive);
  const AbsorptionSignal sig = pixel_absorption(
      resolved, probe, cfg.photophysics, cfg.detection, cfg.geometry.d_NV);

  SensitivityReport rep;
  rep.protocol = Protocol::cw;
  rep.mode = mode;
  rep.I_t = drive.I_t;
  rep.I_s = drive.I_s;
  rep.d_NV = cfg.geometry.d_NV;
  rep.L = cfg.geometry.L;

  const double t_ref = 1.0;  // snr_norm is independent of t_mea and L
  double snr_norm = 0;
  if (mode == DetectionMode::homodyne) {
    HomodyneOptimizerOptions oopt;
    oopt.n_R = cfg.solver.optimizer_n_R;
    oopt.n_phi = cfg.solver.optimizer_n_phi;
    const HomodyneOptimum best = optimize_homodyne(
        sig, cfg.detection, drive.I_s, t_ref, cfg.geometry.L, oopt);
    snr_norm = best.snr_norm;
    rep.R_used = best.R;
    rep.dphi_lo_used = best.delta_phi_lo;
  } else {
    const double snr = snr_shot_limited(sig, cfg.detection, drive.I_s,
                                        cfg.geometry.L, t_ref, mode);
    snr_norm = snr / std::sqrt(t_ref * cfg.geometry.L * cfg.geometry.L);
    rep.R_used = 1.0;
  }

  rep.eta_cw = eta_cw(snr_norm, cfg.photophysics.T2_star);
  rep.eta_sp = eta_spin_projection(cfg.photophysics.n_NV, cfg.geometry.d_NV,
                                   cfg.photophysics.T2_star);
  detail::note_provenance(rep, cfg, pump, probe);
  rep.validate();
  return rep;
}

// Pulsed (echo) sensitivity pipeline: pixel traces -> optimal readout time
// -> photons per spin -> readout fidelity -> AC sensitivity at the
// sensitivity-optimal interrogation time.
inline SensitivityReport run_pulsed(const RunConfig& cfg, const FieldMap& pump,
                                    const FieldMap& probe,
                                    DetectionMode mode) {
  cfg.validate();
  const OpticalDrive drive = cfg.optical_drive();
  const PulsedPixelTrace tr =
      pulsed_pixel_trace(cfg.photophysics, drive, pump, probe, cfg.geometry,
                         cfg.detection, cfg.solver);

  std::vector<double> contrast(tr.time.size());
  for (std::size_t k = 0; k < contrast.size(); ++k)
    contrast[k] = tr.n6_on[k] - tr.n6_off[k];
  const ReadoutTimeResult ro = optimal_readout_from_contrast(tr.time, contrast);

  SensitivityReport rep;
  rep.protocol = Protocol::pulsed;
  rep.mode = mode;
  rep.I_t = drive.I_t;
  rep.I_s = drive.I_s;
  rep.d_NV = cfg.geometry.d_NV;
  rep.L = cfg.geometry.L;
  rep.t_read_opt = ro.t_opt;
  rep.readout_status = ro.status;

  DetectionConfig det = cfg.detection;
  if (mode == DetectionMode::homodyne) {
    HomodyneOptimizerOptions oopt;
    oopt.n_R = cfg.solver.optimizer_n_R;
    oopt.n_phi = cfg.solver.optimizer_n_phi;
    const HomodyneOptimum best = optimize_homodyne_pulsed(
        tr, det, drive.I_s, cfg.geometry.L, ro.t_opt, oopt);
    det.R = best.R;
    det.delta_phi_LO = best.delta_phi_lo;
    rep.R_used = best.R;
    rep.dphi_lo_used = best.delta_phi_lo;
  } else {
    rep.R_used = 1.0;
  }

  const PhotonsPerSpin ps =
      photons_per_spin(tr, det, mode, drive.I_s, cfg.geometry,
                       cfg.photophysics.n_NV, ro.t_opt);
  rep.sigma_R = readout_fidelity(ps.a, ps.b);

  if (std::isfinite(rep.sigma_R)) {
    const double t_overhead = cfg.solver.t_init + ro.t_opt;
    rep.tau = detail::optimal_tau(cfg.photophysics, cfg.geometry.d_NV,
                                  rep.sigma_R, t_overhead,
                                  cfg.solver.tau_scan_points);
    rep.eta_ac = eta_ac(cfg.photophysics, cfg.geometry.d_NV, rep.sigma_R,
                        rep.tau, cfg.solver.t_init, ro.t_opt);
    rep.eta_sp = eta_spin_projection(cfg.photophysics.n_NV, cfg.geometry.d_NV,
                                     rep.tau);
  } else {
    rep.eta_ac = std::numeric_limits<double>::infinity();
    rep.eta_sp = eta_spin_projection(cfg.photophysics.n_NV, cfg.geometry.d_NV,
                                     cfg.photophysics.T2);
  }
  detail::note_provenance(rep, cfg, pump, probe);
  rep.validate();
  return rep;
}

inline SensitivityReport run_pipeline(const RunConfig& cfg, Protocol protocol,
                                      DetectionMode mode) {
  const FieldMap pump = cfg.pump_map();
  const FieldMap probe = cfg.probe_map();
  return protocol == Protocol::cw ? run_cw(cfg, pump, probe, mode)
                                  : run_pulsed(cfg, pump, probe, mode);
}

// Structured-text serialization of a report. Sensitivities are SI
// (T m / Hz^1/2); unmeasurable values serialize as the string token.
inline nlohmann::json report_to_json(const SensitivityReport& rep) {
  using nlohmann::json;
  auto num = [](double v) -> json {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return "unmeasurable";
    return v;
  };
  json j{{"protocol", to_string(rep.protocol)},
         {"mode", to_string(rep.mode)},
         {"inputs",
          {{"I_t_W_m2", rep.I_t},
           {"I_s_W_m2", rep.I_s},
           {"d_NV_m", rep.d_NV},
           {"L_m", rep.L}}},
         {"eta_cw_T_m_sqrtHz", num(rep.eta_cw)},
         {"eta_ac_T_m_sqrtHz", num(rep.eta_ac)},
         {"eta_sp_T_m_sqrtHz", num(rep.eta_sp)},
         {"sigma_R", num(rep.sigma_R)},
         {"t_read_opt_s", num(rep.t_read_opt)},
         {"tau_s", num(rep.tau)},
         {"R_used", num(rep.R_used)},
         {"dphi_LO_used_rad", num(rep.dphi_lo_used)},
         {"provenance", rep.provenance}};
  if (rep.protocol == Protocol::pulsed)
    j["readout_status"] =
        rep.readout_status == ReadoutOptimumStatus::interior
            ? "interior"
            : rep.readout_status == ReadoutOptimumStatus::boundary_small
                  ? "boundary_small_t"
                  : "horizon";
  return j;
}

}  // namespace nvsurf
