// config.hpp - run configuration: JSON schema, strict loading with dotted
// key names in every error, lossless serialization, and materialization of
// the field maps.
//
// Units at this boundary follow the conventions the numbers are usually
// quoted in: drive intensities in mW/um^2; everything else (rates, cross
// sections, densities, lengths, times) in SI exactly as the parameter
// structs define them. Unknown keys are rejected.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvsurf/constants.hpp"
#include "nvsurf/errors.hpp"
#include "nvsurf/field_map.hpp"
#include "nvsurf/params.hpp"

namespace nvsurf {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kConfigEnvVar = "NVSURF_CONFIG";

// Drive condition in figure units (mW/um^2); converted to SI on demand.
struct DriveConfig {
  double I_t = 0.1;
  double I_s = 1.0;
  bool mw_on = true;

  void validate() const {
    if (!(I_t >= 0) || !std::isfinite(I_t))
      throw ValidationError("config: drive.I_t must be finite and nonnegative");
    if (!(I_s >= 0) || !std::isfinite(I_s))
      throw ValidationError("config: drive.I_s must be finite and nonnegative");
  }

  OpticalDrive to_si() const {
    OpticalDrive d;
    d.I_t = I_t * kWPerM2PerMwUm2;
    d.I_s = I_s * kWPerM2PerMwUm2;
    d.mw_on = mw_on;
    return d;
  }
};

// Parameters of one synthetic field map (used when no map file is given).
struct SyntheticMapSpec {
  double spp_amplitude = 0;
  double spp_decay = 1e-7;     // m
  double rwa_amplitude = 1;
  double rwa_decay = 5e-6;     // m
  double y_max = 10e-6;        // m
  int nx = 33;
  int ny = 201;
};

// Defaults sized to the structure studied here: the green map reproduces a
// depth-averaged enhancement near 2 over 5 um; the probe map concentrates a
// strong surface component over the wires on top of a vertically extended
// component with a few-micron decay.
inline SyntheticMapSpec default_pump_synthetic() {
  SyntheticMapSpec s;
  s.spp_amplitude = 4.0;
  s.spp_decay = 0.15e-6;
  s.rwa_amplitude = 2.62;
  s.rwa_decay = 8e-6;
  return s;
}

inline SyntheticMapSpec default_probe_synthetic() {
  SyntheticMapSpec s;
  s.spp_amplitude = 35.0;
  s.spp_decay = 0.2e-6;
  s.rwa_amplitude = 14.0;
  s.rwa_decay = 5.5e-6;
  return s;
}

struct FieldMapConfig {
  std::string pump_path;   // empty -> synthesize
  std::string probe_path;
  SyntheticMapSpec pump_synthetic = default_pump_synthetic();
  SyntheticMapSpec probe_synthetic = default_probe_synthetic();
};

struct RunConfig {
  PhotophysicsParams photophysics = default_params();
  DriveConfig drive;
  PixelGeometry geometry;
  DetectionConfig detection = default_detection();
  FieldMapConfig field_maps;
  SolverOptions solver;

  static DetectionConfig default_detection() {
    DetectionConfig d;
    d.phase_model.kappa = -15.0;  // rad per unit pixel absorption
    return d;
  }

  void validate() const {
    photophysics.validate();
    drive.validate();
    geometry.validate();
    detection.validate();
    solver.validate();
  }

  OpticalDrive optical_drive() const { return drive.to_si(); }

  FieldMap pump_map() const {
    if (!field_maps.pump_path.empty())
      return load_field_map(field_maps.pump_path);
    const auto& s = field_maps.pump_synthetic;
    return synthetic_field_map(geometry.p, s.y_max, s.spp_amplitude,
                               s.spp_decay, s.rwa_amplitude, s.rwa_decay,
                               s.nx, s.ny, kLambdaPump);
  }

  FieldMap probe_map() const {
    if (!field_maps.probe_path.empty())
      return load_field_map(field_maps.probe_path);
    const auto& s = field_maps.probe_synthetic;
    return synthetic_field_map(geometry.p, s.y_max, s.spp_amplitude,
                               s.spp_decay, s.rwa_amplitude, s.rwa_decay,
                               s.nx, s.ny, kLambdaProbe);
  }
};

namespace detail {

using nlohmann::json;

inline void require_keys(const json& obj, const std::string& prefix,
                         const std::vector<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) { ok = true; break; }
    if (!ok)
      throw SchemaError("config: unknown key '" + prefix + it.key() + "'");
  }
}

inline double get_num(const json& obj, const std::string& prefix,
                      const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number())
    throw SchemaError("config: key '" + prefix + key + "' must be a number");
  return v.get<double>();
}

inline int get_int(const json& obj, const std::string& prefix,
                   const std::string& key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer())
    throw SchemaError("config: key '" + prefix + key + "' must be an integer");
  return v.get<int>();
}

inline bool get_bool(const json& obj, const std::string& prefix,
                     const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean())
    throw SchemaError("config: key '" + prefix + key + "' must be a boolean");
  return v.get<bool>();
}

inline std::string get_str(const json& obj, const std::string& prefix,
                           const std::string& key, std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string())
    throw SchemaError("config: key '" + prefix + key + "' must be a string");
  return v.get<std::string>();
}

inline SyntheticMapSpec parse_synthetic(const json& obj,
                                        const std::string& prefix,
                                        SyntheticMapSpec s) {
  require_keys(obj, prefix,
               {"spp_amplitude", "spp_decay", "rwa_amplitude", "rwa_decay",
                "y_max", "nx", "ny"});
  s.spp_amplitude = get_num(obj, prefix, "spp_amplitude", s.spp_amplitude);
  s.spp_decay = get_num(obj, prefix, "spp_decay", s.spp_decay);
  s.rwa_amplitude = get_num(obj, prefix, "rwa_amplitude", s.rwa_amplitude);
  s.rwa_decay = get_num(obj, prefix, "rwa_decay", s.rwa_decay);
  s.y_max = get_num(obj, prefix, "y_max", s.y_max);
  s.nx = get_int(obj, prefix, "nx", s.nx);
  s.ny = get_int(obj, prefix, "ny", s.ny);
  return s;
}

inline json synthetic_to_json(const SyntheticMapSpec& s) {
  return json{{"spp_amplitude", s.spp_amplitude}, {"spp_decay", s.spp_decay},
              {"rwa_amplitude", s.rwa_amplitude}, {"rwa_decay", s.rwa_decay},
              {"y_max", s.y_max},                 {"nx", s.nx},
              {"ny", s.ny}};
}

// File references inside a config resolve relative to the config file's own
// directory, not the working directory.
inline std::string resolve_path(const std::string& base_dir,
                                const std::string& path) {
  if (path.empty() || base_dir.empty()) return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace detail

inline RunConfig load_config_json(const nlohmann::json& root,
                                  const std::string& base_dir = "") {
  using detail::get_bool;
  using detail::get_int;
  using detail::get_num;
  using detail::get_str;
  using detail::require_keys;

  if (!root.is_object())
    throw SchemaError("config: top level must be a JSON object");
  require_keys(root, "",
               {"schema_version", "photophysics", "drive", "geometry",
                "detection", "field_maps", "solver"});
  const int ver = get_int(root, "", "schema_version", kConfigSchemaVersion);
  if (ver != kConfigSchemaVersion)
    throw SchemaError("config: unsupported schema_version " +
                      std::to_string(ver));

  RunConfig cfg;

  if (root.contains("photophysics")) {
    const auto& ph = root.at("photophysics");
    const std::string pre = "photophysics.";
    require_keys(ph, pre,
                 {"k31", "k42", "k35", "k45", "k61", "k62", "k38", "k48",
                  "k71", "k72", "Gamma", "Gamma_NV0", "sigma_t", "sigma_s",
                  "sigma_NV0", "n_NV", "T2_star", "T2", "Omega_R", "gamma_r",
                  "F_p", "gamma_quenching"});
    auto& p = cfg.photophysics;
    p.k31 = get_num(ph, pre, "k31", p.k31);
    p.k42 = get_num(ph, pre, "k42", p.k42);
    p.k35 = get_num(ph, pre, "k35", p.k35);
    p.k45 = get_num(ph, pre, "k45", p.k45);
    p.k61 = get_num(ph, pre, "k61", p.k61);
    p.k62 = get_num(ph, pre, "k62", p.k62);
    p.k38 = get_num(ph, pre, "k38", p.k38);
    p.k48 = get_num(ph, pre, "k48", p.k48);
    p.k71 = get_num(ph, pre, "k71", p.k71);
    p.k72 = get_num(ph, pre, "k72", p.k72);
    p.Gamma = get_num(ph, pre, "Gamma", p.Gamma);
    p.Gamma_NV0 = get_num(ph, pre, "Gamma_NV0", p.Gamma_NV0);
    p.sigma_t = get_num(ph, pre, "sigma_t", p.sigma_t);
    p.sigma_s = get_num(ph, pre, "sigma_s", p.sigma_s);
    p.sigma_NV0 = get_num(ph, pre, "sigma_NV0", p.sigma_NV0);
    p.n_NV = get_num(ph, pre, "n_NV", p.n_NV);
    p.T2_star = get_num(ph, pre, "T2_star", p.T2_star);
    p.T2 = get_num(ph, pre, "T2", p.T2);
    p.Omega_R = get_num(ph, pre, "Omega_R", p.Omega_R);
    p.gamma_r = get_num(ph, pre, "gamma_r", p.gamma_r);
    p.F_p = get_num(ph, pre, "F_p", p.F_p);
    p.gamma_quenching = get_num(ph, pre, "gamma_quenching", p.gamma_quenching);
  }

  if (root.contains("drive")) {
    const auto& dr = root.at("drive");
    require_keys(dr, "drive.", {"I_t", "I_s", "mw_on"});
    cfg.drive.I_t = get_num(dr, "drive.", "I_t", cfg.drive.I_t);
    cfg.drive.I_s = get_num(dr, "drive.", "I_s", cfg.drive.I_s);
    cfg.drive.mw_on = get_bool(dr, "drive.", "mw_on", cfg.drive.mw_on);
  }

  if (root.contains("geometry")) {
    const auto& g = root.at("geometry");
    require_keys(g, "geometry.", {"L", "d_NV", "p", "w", "t", "n_diamond"});
    cfg.geometry.L = get_num(g, "geometry.", "L", cfg.geometry.L);
    cfg.geometry.d_NV = get_num(g, "geometry.", "d_NV", cfg.geometry.d_NV);
    cfg.geometry.p = get_num(g, "geometry.", "p", cfg.geometry.p);
    cfg.geometry.w = get_num(g, "geometry.", "w", cfg.geometry.w);
    cfg.geometry.t = get_num(g, "geometry.", "t", cfg.geometry.t);
    cfg.geometry.n_diamond =
        get_num(g, "geometry.", "n_diamond", cfg.geometry.n_diamond);
  }

  if (root.contains("detection")) {
    const auto& de = root.at("detection");
    require_keys(de, "detection.",
                 {"R", "delta_phi_LO", "R0", "phase_model"});
    cfg.detection.R = get_num(de, "detection.", "R", cfg.detection.R);
    cfg.detection.delta_phi_LO =
        get_num(de, "detection.", "delta_phi_LO", cfg.detection.delta_phi_LO);
    cfg.detection.R0 = get_num(de, "detection.", "R0", cfg.detection.R0);
    if (de.contains("phase_model")) {
      const auto& pm = de.at("phase_model");
      require_keys(pm, "detection.phase_model.",
                   {"kappa", "table", "table_path"});
      cfg.detection.phase_model.kappa =
          get_num(pm, "detection.phase_model.", "kappa",
                  cfg.detection.phase_model.kappa);
      if (pm.contains("table")) {
        if (!pm.at("table").is_array())
          throw SchemaError(
              "config: key 'detection.phase_model.table' must be an array of "
              "[A_pixel, dphi_rad] pairs");
        cfg.detection.phase_model.table.clear();
        for (const auto& row : pm.at("table")) {
          if (!row.is_array() || row.size() != 2 || !row[0].is_number() ||
              !row[1].is_number())
            throw SchemaError(
                "config: key 'detection.phase_model.table' rows must be "
                "[A_pixel, dphi_rad] number pairs");
          cfg.detection.phase_model.table.emplace_back(row[0].get<double>(),
                                                       row[1].get<double>());
        }
      }
      const std::string tp = detail::resolve_path(
          base_dir, get_str(pm, "detection.phase_model.", "table_path", ""));
      if (!tp.empty()) {
        std::ifstream ts(tp);
        if (!ts)
          throw SchemaError(
              "config: key 'detection.phase_model.table_path': cannot open " +
              tp);
        cfg.detection.phase_model.table.clear();
        std::string line;
        bool first = true;
        while (std::getline(ts, line)) {
          if (line.empty() || line[0] == '#') continue;
          if (first && line.find("A_pixel") != std::string::npos) {
            first = false;
            continue;
          }
          first = false;
          double a, f;
          if (std::sscanf(line.c_str(), "%lg,%lg", &a, &f) != 2)
            throw SchemaError(
                "config: phase table " + tp + ": malformed row '" + line + "'");
          cfg.detection.phase_model.table.emplace_back(a, f);
        }
      }
    }
  }

  if (root.contains("field_maps")) {
    const auto& fm = root.at("field_maps");
    require_keys(fm, "field_maps.",
                 {"pump_path", "probe_path", "pump_synthetic",
                  "probe_synthetic"});
    cfg.field_maps.pump_path = detail::resolve_path(
        base_dir,
        get_str(fm, "field_maps.", "pump_path", cfg.field_maps.pump_path));
    cfg.field_maps.probe_path = detail::resolve_path(
        base_dir,
        get_str(fm, "field_maps.", "probe_path", cfg.field_maps.probe_path));
    if (fm.contains("pump_synthetic"))
      cfg.field_maps.pump_synthetic =
          detail::parse_synthetic(fm.at("pump_synthetic"),
                                  "field_maps.pump_synthetic.",
                                  cfg.field_maps.pump_synthetic);
    if (fm.contains("probe_synthetic"))
      cfg.field_maps.probe_synthetic =
          detail::parse_synthetic(fm.at("probe_synthetic"),
                                  "field_maps.probe_synthetic.",
                                  cfg.field_maps.probe_synthetic);
  }

  if (root.contains("solver")) {
    const auto& so = root.at("solver");
    require_keys(so, "solver.",
                 {"rtol", "atol", "pulsed_t_max", "pulsed_dt_sample",
                  "t_init", "optimizer_n_R", "optimizer_n_phi",
                  "tau_scan_points"});
    auto& s = cfg.solver;
    s.rtol = get_num(so, "solver.", "rtol", s.rtol);
    s.atol = get_num(so, "solver.", "atol", s.atol);
    s.pulsed_t_max = get_num(so, "solver.", "pulsed_t_max", s.pulsed_t_max);
    s.pulsed_dt_sample =
        get_num(so, "solver.", "pulsed_dt_sample", s.pulsed_dt_sample);
    s.t_init = get_num(so, "solver.", "t_init", s.t_init);
    s.optimizer_n_R = get_int(so, "solver.", "optimizer_n_R", s.optimizer_n_R);
    s.optimizer_n_phi =
        get_int(so, "solver.", "optimizer_n_phi", s.optimizer_n_phi);
    s.tau_scan_points =
        get_int(so, "solver.", "tau_scan_points", s.tau_scan_points);
  }

  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& text,
                             const std::string& base_dir = "") {
  nlohmann::json root;
  try {
    root = text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("config: JSON parse error: ") + e.what());
  }
  return load_config_json(root, base_dir);
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return load_config(ss.str(),
                     std::filesystem::path(path).parent_path().string());
}

// Resolves the active config: explicit path, else $NVSURF_CONFIG, else all
// defaults.
inline RunConfig resolve_config(const std::string& path) {
  if (!path.empty()) return load_config_file(path);
  if (const char* env = std::getenv(kConfigEnvVar); env && *env)
    return load_config_file(env);
  return RunConfig{};
}

inline nlohmann::json save_config_json(const RunConfig& cfg) {
  using nlohmann::json;
  const auto& p = cfg.photophysics;
  json phase_model = {{"kappa", cfg.detection.phase_model.kappa}};
  if (!cfg.detection.phase_model.table.empty()) {
    json table = json::array();
    for (const auto& [a, f] : cfg.detection.phase_model.table)
      table.push_back(json::array({a, f}));
    phase_model["table"] = table;
  }
  return json{
      {"schema_version", kConfigSchemaVersion},
      {"photophysics",
       {{"k31", p.k31}, {"k42", p.k42}, {"k35", p.k35}, {"k45", p.k45},
        {"k61", p.k61}, {"k62", p.k62}, {"k38", p.k38}, {"k48", p.k48},
        {"k71", p.k71}, {"k72", p.k72}, {"Gamma", p.Gamma},
        {"Gamma_NV0", p.Gamma_NV0}, {"sigma_t", p.sigma_t},
        {"sigma_s", p.sigma_s}, {"sigma_NV0", p.sigma_NV0}, {"n_NV", p.n_NV},
        {"T2_star", p.T2_star}, {"T2", p.T2}, {"Omega_R", p.Omega_R},
        {"gamma_r", p.gamma_r}, {"F_p", p.F_p},
        {"gamma_quenching", p.gamma_quenching}}},
      {"drive",
       {{"I_t", cfg.drive.I_t}, {"I_s", cfg.drive.I_s},
        {"mw_on", cfg.drive.mw_on}}},
      {"geometry",
       {{"L", cfg.geometry.L}, {"d_NV", cfg.geometry.d_NV},
        {"p", cfg.geometry.p}, {"w", cfg.geometry.w}, {"t", cfg.geometry.t},
        {"n_diamond", cfg.geometry.n_diamond}}},
      {"detection",
       {{"R", cfg.detection.R}, {"delta_phi_LO", cfg.detection.delta_phi_LO},
        {"R0", cfg.detection.R0}, {"phase_model", phase_model}}},
      {"field_maps",
       {{"pump_path", cfg.field_maps.pump_path},
        {"probe_path", cfg.field_maps.probe_path},
        {"pump_synthetic",
         detail::synthetic_to_json(cfg.field_maps.pump_synthetic)},
        {"probe_synthetic",
         detail::synthetic_to_json(cfg.field_maps.probe_synthetic)}}},
      {"solver",
       {{"rtol", cfg.solver.rtol}, {"atol", cfg.solver.atol},
        {"pulsed_t_max", cfg.solver.pulsed_t_max},
        {"pulsed_dt_sample", cfg.solver.pulsed_dt_sample},
        {"t_init", cfg.solver.t_init},
        {"optimizer_n_R", cfg.solver.optimizer_n_R},
        {"optimizer_n_phi", cfg.solver.optimizer_n_phi},
        {"tau_scan_points", cfg.solver.tau_scan_points}}}};
}

inline std::string save_config(const RunConfig& cfg) {
  return save_config_json(cfg).dump(2);
}

}  // namespace nvsurf
