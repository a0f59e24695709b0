// nvsurf_main.cpp - command-line front end.
//
// Subcommands: steady, evolve, sensitivity, optimize, dispersion,
// fieldmap-stats. Global flags: --config PATH (or $NVSURF_CONFIG),
// --out DIR, --jobs N.
//
// Exit status: 0 success, 1 invalid input (config/schema/domain errors),
// 2 numerical failure (including degenerate optima).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "nvsurf/config.hpp"
#include "nvsurf/csv.hpp"
#include "nvsurf/detection.hpp"
#include "nvsurf/dispersion.hpp"
#include "nvsurf/field_map.hpp"
#include "nvsurf/pipeline.hpp"
#include "nvsurf/svg.hpp"
#include "nvsurf/sweep.hpp"

namespace {

using namespace nvsurf;

constexpr double kPi = std::numbers::pi;

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string out_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return dir + "/" + name;
}

std::vector<double> parse_value_list(const std::string& csv) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    vals.push_back(std::stod(tok));
  }
  if (vals.empty())
    throw ValidationError("expected a comma-separated list of numbers, got '" +
                          csv + "'");
  return vals;
}

struct SweepCliArgs {
  std::string key;
  double min = 0, max = 0;
  int count = 0;
  bool log_scale = false;
  std::string family_key;
  std::string family_values;
  std::vector<std::string> overrides;  // KEY=VALUE
};

void apply_fixed_overrides(RunConfig& cfg,
                           const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ValidationError("--set expects KEY=VALUE, got '" + ov + "'");
    apply_override(cfg, ov.substr(0, eq), std::stod(ov.substr(eq + 1)));
  }
}

// Sweep points in deterministic order: family values outer, primary inner.
// An empty sweep key yields the single configured point.
struct SweepPlan {
  std::vector<std::string> axis_names;
  std::vector<SweepPoint> points;
};

SweepPlan plan_sweep(const RunConfig& base, const SweepCliArgs& args) {
  SweepPlan plan;
  if (args.key.empty()) {
    if (!args.family_key.empty())
      throw ValidationError("--family requires --sweep");
    SweepPoint pt;
    pt.config = base;
    plan.points.push_back(pt);
    return plan;
  }
  SweepSpec spec;
  spec.primary = {args.key, args.min, args.max, args.count, args.log_scale};
  spec.validate();
  plan.axis_names.push_back(args.key);

  std::vector<double> fam_vals;
  if (!args.family_key.empty()) {
    fam_vals = parse_value_list(args.family_values);
    plan.axis_names.push_back(args.family_key);
  } else {
    fam_vals.push_back(0);  // placeholder single pass
  }

  for (double fv : fam_vals) {
    for (int i = 0; i < spec.primary.count; ++i) {
      SweepPoint pt;
      pt.config = base;
      pt.values.push_back(spec.primary.value(i));
      apply_override(pt.config, spec.primary.key, pt.values.back());
      if (!args.family_key.empty()) {
        pt.values.push_back(fv);
        apply_override(pt.config, args.family_key, fv);
      }
      plan.points.push_back(std::move(pt));
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------

int cmd_steady(const RunConfig& base, const SweepCliArgs& sweep_args,
               const std::string& out_dir, int jobs) {
  const SweepPlan plan = plan_sweep(base, sweep_args);

  struct SteadyRow {
    std::array<double, kNumLevels> on{}, off{};
    double net_on = 0, net_off = 0;
  };
  auto eval = [](const RunConfig& cfg) {
    const FieldMap pump = cfg.pump_map();
    const FieldMap probe = cfg.probe_map();
    const auto res =
        resolve_populations(pump, probe, cfg.photophysics, cfg.optical_drive());
    const auto w = detail::quadrature_weights(probe, cfg.geometry.d_NV);
    const double area = probe.period * cfg.geometry.d_NV;
    SteadyRow row;
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (w[k] == 0) continue;
      for (int i = 0; i < kNumLevels; ++i) {
        row.on[i] += res.mw_on[k].n[i] * w[k] / area;
        row.off[i] += res.mw_off[k].n[i] * w[k] / area;
      }
    }
    row.net_on = row.on[level::singlet_lower] - row.on[level::singlet_upper];
    row.net_off = row.off[level::singlet_lower] - row.off[level::singlet_upper];
    return row;
  };

  const auto results = run_sweep<SteadyRow>(plan.points, jobs, eval);

  CsvWriter csv;
  csv.comment("generated: " + timestamp());
  csv.comment("volume-averaged level densities (m^-3) over one period x d_NV");
  std::vector<std::string> hdr;
  for (const auto& n : plan.axis_names) hdr.push_back(n);
  for (const char* s : {"n1", "n2", "n3", "n4", "n5", "n6", "n7", "n8"})
    hdr.push_back(std::string(s) + "_on");
  hdr.push_back("net_on");
  for (const char* s : {"n1", "n2", "n3", "n4", "n5", "n6", "n7", "n8"})
    hdr.push_back(std::string(s) + "_off");
  hdr.push_back("net_off");
  hdr.push_back("status");
  csv.header(hdr);
  for (const auto& r : results) {
    std::vector<std::string> cells;
    for (double v : r.values) cells.push_back(format_number(v));
    if (r.error.empty()) {
      for (int i = 0; i < kNumLevels; ++i)
        cells.push_back(format_number(r.result.on[i]));
      cells.push_back(format_number(r.result.net_on));
      for (int i = 0; i < kNumLevels; ++i)
        cells.push_back(format_number(r.result.off[i]));
      cells.push_back(format_number(r.result.net_off));
      cells.push_back("ok");
    } else {
      for (int i = 0; i < 2 * kNumLevels + 2; ++i) cells.push_back("");
      cells.push_back("error: " + r.error);
    }
    csv.row(cells);
  }
  csv.save(out_path(out_dir, "steady.csv"));

  if (plan.points.size() == 1 && results.front().error.empty()) {
    const auto& r = results.front().result;
    std::printf("levels (mw on / mw off), m^-3:\n");
    for (int i = 0; i < kNumLevels; ++i)
      std::printf("  n%d  %.6e  %.6e\n", i + 1, r.on[i], r.off[i]);
    std::printf("  net singlet (n6-n5): %.6e / %.6e\n", r.net_on, r.net_off);
  } else {
    std::printf("steady: %zu points -> %s\n", plan.points.size(),
                out_path(out_dir, "steady.csv").c_str());
  }
  for (const auto& r : results)
    if (!r.error.empty())
      std::fprintf(stderr, "point failed: %s\n", r.error.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_evolve(const RunConfig& cfg, double t_end, double sampling,
               const std::string& out_dir) {
  const FieldMap pump = cfg.pump_map();
  const FieldMap probe = cfg.probe_map();
  const double enh_p = average_enhancement(pump, cfg.geometry.d_NV);
  const double enh_s = average_enhancement(probe, cfg.geometry.d_NV);
  const OpticalDrive drive = cfg.optical_drive();
  if (t_end <= 0) t_end = cfg.solver.pulsed_t_max;
  if (sampling <= 0) sampling = cfg.solver.pulsed_dt_sample;

  OpticalDrive init_drive = drive;
  init_drive.I_s = 0;
  init_drive.mw_on = false;
  const LevelPopulations init = steady_state(
      build_generator(cfg.photophysics, init_drive, enh_p, enh_s),
      cfg.photophysics.n_NV);
  LevelPopulations init_swapped = init;
  std::swap(init_swapped.n[level::ground_ms0],
            init_swapped.n[level::ground_ms1]);

  OpticalDrive readout = drive;
  readout.mw_on = false;
  const RateGenerator gen =
      build_generator(cfg.photophysics, readout, enh_p, enh_s);
  IntegratorOptions iopt;
  iopt.rtol = cfg.solver.rtol;
  iopt.atol = cfg.solver.atol;

  const PopulationTrace tr_a = evolve(gen, init, t_end, sampling, iopt);
  const PopulationTrace tr_b = evolve(gen, init_swapped, t_end, sampling, iopt);

  for (auto [trace, name] : {std::pair<const PopulationTrace*, const char*>{
                                 &tr_a, "evolve_ms0.csv"},
                             {&tr_b, "evolve_ms1.csv"}}) {
    std::ofstream os(out_path(out_dir, name));
    if (!os) throw ValidationError(std::string("cannot open ") + name);
    os << "# generated: " << timestamp() << "\n";
    trace->write_csv(os);
  }

  double peak = 0, t_peak = 0;
  for (std::size_t k = 0; k < tr_a.size(); ++k) {
    const double c = tr_b.samples[k].n[level::singlet_lower] -
                     tr_a.samples[k].n[level::singlet_lower];
    if (c > peak) { peak = c; t_peak = tr_a.time[k]; }
  }
  std::printf(
      "homogeneous-cell readout traces written (enh_pump=%.3g, "
      "enh_probe=%.3g)\n",
      enh_p, enh_s);
  std::printf("peak singlet contrast %.4e m^-3 at t = %.4g us\n", peak,
              t_peak * 1e6);
  return 0;
}

// ---------------------------------------------------------------------------

constexpr double kEtaCwUnit = 1e-15;  // T m/sqrt(Hz) per (nT um)
constexpr double kEtaAcUnit = 1e-18;  // T m/sqrt(Hz) per (pT um)

int cmd_sensitivity(const RunConfig& base, const SweepCliArgs& sweep_args,
                    const std::string& mode_arg, const std::string& proto_arg,
                    const std::string& quantity, const std::string& out_dir,
                    int jobs) {
  const SweepPlan plan = plan_sweep(base, sweep_args);

  std::vector<DetectionMode> modes;
  if (mode_arg == "both" || mode_arg == "homodyne")
    modes.push_back(DetectionMode::homodyne);
  if (mode_arg == "both" || mode_arg == "direct")
    modes.push_back(DetectionMode::direct);
  if (modes.empty())
    throw ValidationError("--mode must be homodyne, direct, or both");

  if (quantity == "snr") {
    // Detection-stage sweep: Fig 2c style CSV.
    struct SnrRow {
      double R[2] = {0, 0}, phi[2] = {0, 0}, snr_norm[2] = {0, 0};
      bool has[2] = {false, false};
    };
    auto eval = [&](const RunConfig& cfg) {
      const FieldMap pump = cfg.pump_map();
      const FieldMap probe = cfg.probe_map();
      const auto res = resolve_populations(pump, probe, cfg.photophysics,
                                           cfg.optical_drive());
      const auto sig = pixel_absorption(res, probe, cfg.photophysics,
                                        cfg.detection, cfg.geometry.d_NV);
      SnrRow row;
      for (DetectionMode m : modes) {
        const int idx = m == DetectionMode::homodyne ? 0 : 1;
        row.has[idx] = true;
        if (m == DetectionMode::homodyne) {
          HomodyneOptimizerOptions oopt;
          oopt.n_R = cfg.solver.optimizer_n_R;
          oopt.n_phi = cfg.solver.optimizer_n_phi;
          const auto best =
              optimize_homodyne(sig, cfg.detection, cfg.optical_drive().I_s,
                                1.0, cfg.geometry.L, oopt);
          row.R[idx] = best.R;
          row.phi[idx] = best.delta_phi_lo;
          row.snr_norm[idx] = best.snr_norm;
        } else {
          const double snr =
              snr_shot_limited(sig, cfg.detection, cfg.optical_drive().I_s,
                               cfg.geometry.L, 1.0, m);
          row.R[idx] = 1.0;
          row.phi[idx] = 0.0;
          row.snr_norm[idx] = snr / cfg.geometry.L;
        }
      }
      return row;
    };
    const auto results = run_sweep<SnrRow>(plan.points, jobs, eval);

    CsvWriter csv;
    csv.comment("generated: " + timestamp());
    csv.comment(
        "SNR_per_sqrt_area: shot-noise SNR for 1 s integration, per meter of "
        "pixel side (1/(m sqrt(s)))");
    std::vector<std::string> hdr = {"I_t", "I_s", "mode", "R", "dphi_LO",
                                    "SNR_per_sqrt_area", "status"};
    csv.header(hdr);
    for (const auto& r : results) {
      const RunConfig& cfg = plan.points[&r - &results[0]].config;
      for (DetectionMode m : modes) {
        const int idx = m == DetectionMode::homodyne ? 0 : 1;
        std::vector<std::string> cells = {format_number(cfg.drive.I_t),
                                          format_number(cfg.drive.I_s),
                                          to_string(m)};
        if (r.error.empty() && r.result.has[idx]) {
          cells.push_back(format_number(r.result.R[idx]));
          cells.push_back(format_number(r.result.phi[idx]));
          cells.push_back(format_number(r.result.snr_norm[idx]));
          cells.push_back("ok");
        } else {
          cells.insert(cells.end(), {"", "", ""});
          cells.push_back("error: " + r.error);
        }
        csv.row(cells);
      }
    }
    csv.save(out_path(out_dir, "snr.csv"));
    std::printf("snr: %zu points -> %s\n", plan.points.size(),
                out_path(out_dir, "snr.csv").c_str());
    return 0;
  }

  std::vector<Protocol> protocols;
  if (proto_arg == "both" || proto_arg == "cw") protocols.push_back(Protocol::cw);
  if (proto_arg == "both" || proto_arg == "pulsed")
    protocols.push_back(Protocol::pulsed);
  if (protocols.empty())
    throw ValidationError("--protocol must be cw, pulsed, or both");

  struct SensRow {
    std::vector<SensitivityReport> reports;
  };
  auto eval = [&](const RunConfig& cfg) {
    const FieldMap pump = cfg.pump_map();
    const FieldMap probe = cfg.probe_map();
    SensRow row;
    for (Protocol pr : protocols)
      for (DetectionMode m : modes)
        row.reports.push_back(pr == Protocol::cw
                                  ? run_cw(cfg, pump, probe, m)
                                  : run_pulsed(cfg, pump, probe, m));
    return row;
  };
  const auto results = run_sweep<SensRow>(plan.points, jobs, eval);

  CsvWriter csv;
  csv.comment("generated: " + timestamp());
  csv.comment(
      "units: I_t,I_s mW/um^2; d_NV um; eta_cw nT Hz^-1/2 um; eta_ac,eta_sp "
      "pT Hz^-1/2 um; t_read_opt us");
  csv.header({"I_t", "I_s", "d_NV", "mode", "eta_cw", "eta_ac", "eta_sp",
              "sigma_R", "t_read_opt", "status"});
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    const RunConfig& cfg = plan.points[k].config;
    if (!r.error.empty()) {
      csv.row({format_number(cfg.drive.I_t), format_number(cfg.drive.I_s),
               format_number(cfg.geometry.d_NV * 1e6), "", "", "", "", "", "",
               "error: " + r.error});
      continue;
    }
    for (const auto& rep : r.result.reports) {
      const bool cw = rep.protocol == Protocol::cw;
      csv.row({format_number(cfg.drive.I_t), format_number(cfg.drive.I_s),
               format_number(cfg.geometry.d_NV * 1e6),
               std::string(to_string(rep.mode)) + "/" + to_string(rep.protocol),
               cw ? format_number(rep.eta_cw / kEtaCwUnit) : std::string(""),
               cw ? std::string("") : format_number(rep.eta_ac / kEtaAcUnit),
               format_number(rep.eta_sp / kEtaAcUnit),
               cw ? std::string("") : format_number(rep.sigma_R),
               cw ? std::string("") : format_number(rep.t_read_opt * 1e6),
               "ok"});
    }
  }
  const std::string csv_path = out_path(out_dir, "sensitivity.csv");
  csv.save(csv_path);

  // Plot: sensitivity vs the primary axis, one curve per (family, mode,
  // protocol), spin-projection reference in black.
  if (!plan.axis_names.empty()) {
    PlotSpec plot;
    plot.title = "sensitivity per sqrt(area)";
    plot.x_label = plan.axis_names[0];
    plot.y_label = protocols[0] == Protocol::cw && protocols.size() == 1
                       ? "eta_cw (nT Hz^-1/2 um)"
                       : "eta (nT um for cw, pT um for ac)";
    plot.log_x = sweep_args.log_scale;
    plot.log_y = true;
    const char* colors[] = {"#1f6fb2", "#d1495b", "#3a7d44", "#8d5a97",
                            "#c77b30", "#4a4a4a"};
    int color_idx = 0;
    const std::size_t n_rep = protocols.size() * modes.size();
    const std::size_t slice = std::max(1, sweep_args.count);
    for (std::size_t rep_i = 0; rep_i < n_rep; ++rep_i) {
      // Group points into family slices.
      for (std::size_t offset = 0; offset < results.size(); offset += slice) {
        PlotSeries s;
        s.color = colors[color_idx % 6];
        ++color_idx;
        for (std::size_t k = offset;
             k < std::min(offset + slice, results.size()); ++k) {
          if (!results[k].error.empty()) continue;
          const auto& rep = results[k].result.reports[rep_i];
          if (s.label.empty()) {
            s.label = std::string(to_string(rep.mode)) + "/" +
                      to_string(rep.protocol);
            if (plan.axis_names.size() > 1)
              s.label += " " + sweep_args.family_key + "=" +
                         format_number(plan.points[k].values[1]);
            s.dashed = rep.mode == DetectionMode::direct;
          }
          const double eta = rep.protocol == Protocol::cw
                                 ? rep.eta_cw / kEtaCwUnit
                                 : rep.eta_ac / kEtaAcUnit;
          if (!std::isfinite(eta)) continue;
          s.x.push_back(plan.points[k].values[0]);
          s.y.push_back(eta);
        }
        if (!s.x.empty()) plot.series.push_back(std::move(s));
      }
    }
    // Spin-projection reference line.
    PlotSeries ref;
    ref.label = "spin projection";
    ref.color = "#000000";
    for (std::size_t k = 0; k < std::min(slice, results.size()); ++k) {
      if (!results[k].error.empty() || results[k].result.reports.empty())
        continue;
      const auto& rep = results[k].result.reports[0];
      const double eta = rep.protocol == Protocol::cw ? rep.eta_sp / kEtaCwUnit
                                                      : rep.eta_sp / kEtaAcUnit;
      ref.x.push_back(plan.points[k].values[0]);
      ref.y.push_back(eta);
    }
    if (!ref.x.empty()) plot.series.push_back(std::move(ref));
    plot.provenance_csv = csv_body(csv.str());
    try {
      save_svg_plot(plot, out_path(out_dir, "sensitivity.svg"));
    } catch (const ValidationError&) {
      // Nothing plottable (all points unmeasurable); CSV still stands.
    }
  }

  // Single evaluations also get the full structured report.
  if (plan.points.size() == 1 && results.front().error.empty()) {
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& rep : results.front().result.reports)
      reports.push_back(report_to_json(rep));
    std::ofstream os(out_path(out_dir, "sensitivity_report.json"));
    os << reports.dump(2) << "\n";
  }

  std::printf("sensitivity: %zu points -> %s\n", plan.points.size(),
              csv_path.c_str());
  for (const auto& r : results)
    if (!r.error.empty())
      std::fprintf(stderr, "point failed: %s\n", r.error.c_str());
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_optimize(const RunConfig& cfg, const std::string& target,
                 const std::string& out_dir) {
  const FieldMap pump = cfg.pump_map();
  const FieldMap probe = cfg.probe_map();

  if (target == "homodyne") {
    const auto res = resolve_populations(pump, probe, cfg.photophysics,
                                         cfg.optical_drive());
    const auto sig = pixel_absorption(res, probe, cfg.photophysics,
                                      cfg.detection, cfg.geometry.d_NV);
    const double I_s = cfg.optical_drive().I_s;

    HomodyneOptimizerOptions oopt;
    oopt.n_R = cfg.solver.optimizer_n_R;
    oopt.n_phi = cfg.solver.optimizer_n_phi;
    const HomodyneOptimum best =
        optimize_homodyne(sig, cfg.detection, I_s, 1.0, cfg.geometry.L, oopt);

    // Contour CSV over the full coarse grid.
    const ReflectionPair rp = reflection_state(sig, cfg.detection);
    CsvWriter csv;
    csv.comment("generated: " + timestamp());
    csv.header({"R", "dphi_LO", "SNR_per_sqrt_area"});
    const double scale = std::sqrt(I_s / photon_energy(kLambdaProbe));
    for (int i = 0; i < oopt.n_R; ++i) {
      const double R =
          oopt.R_min + (oopt.R_max - oopt.R_min) * i / (oopt.n_R - 1);
      for (int j = 0; j < oopt.n_phi; ++j) {
        const double phi = 2.0 * kPi * j / oopt.n_phi;
        const auto [u_off, u_on] =
            detail::detected_outputs(rp, DetectionMode::homodyne, R, phi);
        const double denom = u_off + u_on;
        const double v =
            denom > 0 ? scale * std::abs(u_off - u_on) / std::sqrt(denom) : 0;
        csv.row({format_number(R), format_number(phi), format_number(v)});
      }
    }
    csv.save(out_path(out_dir, "homodyne_contour.csv"));
    std::printf("optimum: R = %.4f, dphi_LO = %.4f rad (%.4f pi), "
                "SNR/sqrt(area*time) = %.6e\n",
                best.R, best.delta_phi_lo, best.delta_phi_lo / kPi,
                best.snr_norm);
    std::printf("contour -> %s\n",
                out_path(out_dir, "homodyne_contour.csv").c_str());
    return 0;
  }

  if (target == "readout-time") {
    const PulsedPixelTrace tr =
        pulsed_pixel_trace(cfg.photophysics, cfg.optical_drive(), pump, probe,
                           cfg.geometry, cfg.detection, cfg.solver);
    std::vector<double> contrast(tr.time.size());
    for (std::size_t k = 0; k < contrast.size(); ++k)
      contrast[k] = tr.n6_on[k] - tr.n6_off[k];
    const ReadoutTimeResult ro =
        optimal_readout_from_contrast(tr.time, contrast);

    CsvWriter csv;
    csv.comment("generated: " + timestamp());
    csv.header({"t_s", "contrast_m3", "avg_contrast_m3"});
    double cume = 0;
    for (std::size_t k = 0; k < tr.time.size(); ++k) {
      if (k > 0)
        cume += 0.5 * (contrast[k - 1] + contrast[k]) *
                (tr.time[k] - tr.time[k - 1]);
      csv.row({format_number(tr.time[k]), format_number(contrast[k]),
               format_number(k > 0 ? cume / tr.time[k] : 0.0)});
    }
    csv.save(out_path(out_dir, "readout_time.csv"));

    const char* status = ro.status == ReadoutOptimumStatus::interior
                             ? "interior"
                             : ro.status == ReadoutOptimumStatus::boundary_small
                                   ? "boundary (t -> 0)"
                                   : "horizon (extend pulsed_t_max)";
    std::printf("optimal readout time: %.4g us (%s)\n", ro.t_opt * 1e6,
                status);
    std::printf("curve -> %s\n", out_path(out_dir, "readout_time.csv").c_str());
    return 0;
  }

  throw ValidationError("--target must be homodyne or readout-time");
}

// ---------------------------------------------------------------------------

int cmd_dispersion(const std::string& what, double lambda, double n_d, int m,
                   double theta_deg, double p) {
  const DrudeLorentzMetal silver = silver_drude();
  const double theta = theta_deg * kPi / 180.0;

  if (what == "period") {
    const double period = rwa_period(lambda, n_d, m, theta);
    DispersionQuery q;
    q.lambda = lambda;
    q.n_d = n_d;
    q.m = m;
    q.theta_i = theta;
    q.p = period;
    q.eps_m = silver.eps_at_wavelength(lambda);
    std::printf("diffracted-wave period: p = %.6g nm\n", period * 1e9);
    std::printf("  lambda = %g nm, n = %g, m = %d, theta = %g deg\n",
                lambda * 1e9, n_d, m, theta_deg);
    std::printf("plasmon Bloch-wave mismatch at this period: %.6g rad/m "
                "(silver Drude fit, eps_m = %.3g%+.3gi)\n",
                spp_bw_mismatch(q), q.eps_m.real(), q.eps_m.imag());
    return 0;
  }
  if (what == "angle") {
    if (!(p > 0)) throw ValidationError("dispersion angle: --p is required");
    const double th = rwa_incidence_angle(lambda, n_d, m, p);
    DispersionQuery q;
    q.lambda = lambda;
    q.n_d = n_d;
    q.m = m;
    q.theta_i = th;
    q.p = p;
    q.eps_m = silver.eps_at_wavelength(lambda);
    std::printf("coupling incidence angle: theta = %.4f deg (|theta| = %.4f "
                "deg, sin = %.6g)\n",
                th * 180.0 / kPi, std::abs(th) * 180.0 / kPi, std::sin(th));
    std::printf("plasmon Bloch-wave mismatch at this angle: %.6g rad/m\n",
                spp_bw_mismatch(q));
    return 0;
  }
  if (what == "spp") {
    if (!(p > 0)) throw ValidationError("dispersion spp: --p is required");
    DispersionQuery q;
    q.lambda = lambda;
    q.n_d = n_d;
    q.m = m;
    q.theta_i = theta;
    q.p = p;
    q.eps_m = silver.eps_at_wavelength(lambda);
    std::printf("plasmon Bloch-wave mismatch: %.6g rad/m (eps_m = "
                "%.4g%+.4gi)\n",
                spp_bw_mismatch(q), q.eps_m.real(), q.eps_m.imag());
    return 0;
  }
  throw ValidationError("dispersion: unknown query '" + what + "'");
}

// ---------------------------------------------------------------------------

int cmd_fieldmap_stats(const RunConfig& cfg, const std::string& map_path,
                       const std::string& which, const std::string& depths_arg,
                       const std::string& out_dir) {
  FieldMap map;
  if (!map_path.empty())
    map = load_field_map(map_path);
  else if (which == "pump")
    map = cfg.pump_map();
  else if (which == "probe")
    map = cfg.probe_map();
  else
    throw ValidationError("fieldmap-stats: --which must be pump or probe");

  std::vector<double> depths_um;
  if (!depths_arg.empty())
    depths_um = parse_value_list(depths_arg);
  else
    depths_um = {0.5, 1, 2, 5, std::min(map.y_max, 10e-6) * 1e6};

  std::printf("field map: %dx%d grid, period %.4g nm, wavelength %.4g nm, "
              "%s\n",
              map.nx, map.ny, map.period * 1e9, map.wavelength * 1e9,
              map.synthetic ? "synthetic" : "from file");
  CsvWriter csv;
  csv.comment("generated: " + timestamp());
  csv.header({"depth_um", "avg_enhancement", "figure_of_merit"});
  for (double d_um : depths_um) {
    const double d = d_um * 1e-6;
    if (d > map.y_max) continue;
    const double avg = average_enhancement(map, d);
    PixelGeometry g = cfg.geometry;
    g.d_NV = d;
    const double fom = figure_of_merit(map, g, cfg.photophysics.n_NV);
    std::printf("  depth %6.2f um: <|E/E0|^2> = %8.4f   FOM = %.4e\n", d_um,
                avg, fom);
    csv.row({format_number(d_um), format_number(avg), format_number(fom)});
  }
  csv.save(out_path(out_dir, "fieldmap_stats.csv"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nvsurf - absorption-readout NV magnetometry on a plasmonic "
               "metasurface: rate-equation, detection and sensitivity "
               "toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path, out_dir = ".";
  int jobs = int(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  app.add_option("--config", config_path,
                 "config JSON path (default: $NVSURF_CONFIG or built-in "
                 "defaults)");
  app.add_option("--out", out_dir, "output directory for CSV/SVG files");
  app.add_option("--jobs", jobs, "sweep worker threads");

  SweepCliArgs sweep_args;
  auto add_sweep_flags = [&](CLI::App* cmd) {
    cmd->add_option("--sweep", sweep_args.key, "config key to sweep");
    cmd->add_option("--min", sweep_args.min, "sweep minimum");
    cmd->add_option("--max", sweep_args.max, "sweep maximum");
    cmd->add_option("--count", sweep_args.count, "sweep point count (>= 2)");
    cmd->add_flag("--log", sweep_args.log_scale, "logarithmic spacing");
    cmd->add_option("--family", sweep_args.family_key,
                    "config key varied across curves");
    cmd->add_option("--family-values", sweep_args.family_values,
                    "comma-separated family values");
    cmd->add_option("--set", sweep_args.overrides,
                    "fixed override KEY=VALUE (repeatable)");
  };

  auto* c_steady = app.add_subcommand(
      "steady", "steady-state level populations (microwave on/off)");
  add_sweep_flags(c_steady);

  auto* c_evolve = app.add_subcommand(
      "evolve", "pulsed readout traces of a homogeneous pixel");
  double ev_t_end = 0, ev_sampling = 0;
  c_evolve->add_option("--t-end", ev_t_end, "horizon (s)");
  c_evolve->add_option("--sampling", ev_sampling, "output sampling (s)");

  auto* c_sens = app.add_subcommand(
      "sensitivity", "full pipeline: sensitivity or SNR sweeps + plot");
  add_sweep_flags(c_sens);
  std::string mode_arg = "both", proto_arg = "cw", quantity = "sensitivity";
  c_sens->add_option("--mode", mode_arg, "homodyne|direct|both");
  c_sens->add_option("--protocol", proto_arg, "cw|pulsed|both");
  c_sens->add_option("--quantity", quantity, "sensitivity|snr");

  auto* c_opt = app.add_subcommand(
      "optimize", "homodyne operating point or pulsed readout time");
  std::string target = "homodyne";
  c_opt->add_option("--target", target, "homodyne|readout-time");

  auto* c_disp = app.add_subcommand(
      "dispersion", "grating design: period, angle, plasmon mismatch");
  c_disp->require_subcommand(1);
  double dp_lambda = kLambdaProbe, dp_n = 2.4, dp_theta = 0, dp_p = 0;
  int dp_m = 1;
  std::string disp_what;
  for (const char* sub : {"period", "angle", "spp"}) {
    auto* c = c_disp->add_subcommand(sub);
    c->add_option("--lambda", dp_lambda, "wavelength (m)")->required();
    c->add_option("--n", dp_n, "dielectric index")->required();
    c->add_option("--m", dp_m, "diffraction order (nonzero)");
    c->add_option("--theta", dp_theta, "incidence angle (deg)");
    c->add_option("--p", dp_p, "grating period (m)");
    c->callback([&disp_what, sub]() { disp_what = sub; });
  }

  auto* c_fms = app.add_subcommand("fieldmap-stats",
                                   "enhancement statistics of a field map");
  std::string fms_map, fms_which = "probe", fms_depths;
  c_fms->add_option("--map", fms_map, "field map CSV path");
  c_fms->add_option("--which", fms_which,
                    "pump|probe (config map when --map absent)");
  c_fms->add_option("--depths", fms_depths, "comma-separated depths (um)");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig base = [&] {
      RunConfig cfg = resolve_config(config_path);
      apply_fixed_overrides(cfg, sweep_args.overrides);
      cfg.validate();
      return cfg;
    }();

    if (app.got_subcommand(c_steady))
      return cmd_steady(base, sweep_args, out_dir, jobs);
    if (app.got_subcommand(c_evolve))
      return cmd_evolve(base, ev_t_end, ev_sampling, out_dir);
    if (app.got_subcommand(c_sens))
      return cmd_sensitivity(base, sweep_args, mode_arg, proto_arg, quantity,
                             out_dir, jobs);
    if (app.got_subcommand(c_opt)) return cmd_optimize(base, target, out_dir);
    if (app.got_subcommand(c_disp))
      return cmd_dispersion(disp_what, dp_lambda, dp_n, dp_m, dp_theta, dp_p);
    if (app.got_subcommand(c_fms))
      return cmd_fieldmap_stats(base, fms_map, fms_which, fms_depths, out_dir);
    std::fprintf(stderr, "no subcommand\n");
    return 1;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return 2;
  }
}
