// sweep.hpp - parameter sweeps over config keys with a deterministic
// work-pool. Points are evaluated independently (possibly on several
// threads) and assembled in input order, so repeated runs of the same sweep
// are byte-identical regardless of scheduling. Per-point failures are
// captured as error rows; the sweep keeps going.

#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "nvsurf/config.hpp"
#include "nvsurf/errors.hpp"

namespace nvsurf {

struct SweepAxis {
  std::string key;     // dotted config key, e.g. "drive.I_t"
  double min = 0, max = 0;
  int count = 0;
  bool log_scale = false;

  double value(int i) const {
    if (count == 1) return min;
    const double f = double(i) / (count - 1);
    return log_scale ? min * std::pow(max / min, f) : min + (max - min) * f;
  }
};

struct SweepSpec {
  SweepAxis primary;
  std::vector<SweepAxis> families;  // optional curve-family axes

  void validate() const {
    auto check = [](const SweepAxis& a) {
      if (a.count < 2)
        throw ValidationError("sweep: count must be >= 2 for axis " + a.key);
      if (!(a.min < a.max))
        throw ValidationError("sweep: min must be < max for axis " + a.key);
      if (a.log_scale && !(a.min > 0))
        throw ValidationError("sweep: log axis requires min > 0 for " + a.key);
    };
    check(primary);
    for (const auto& f : families) check(f);
  }
};

// Writable numeric config keys a sweep may target. Units match the config
// schema (drive intensities in mW/um^2, geometry in m, photophysics in SI).
inline const std::map<std::string, std::function<void(RunConfig&, double)>>&
sweepable_keys() {
  static const std::map<std::string, std::function<void(RunConfig&, double)>>
      keys = {
          {"drive.I_t", [](RunConfig& c, double v) { c.drive.I_t = v; }},
          {"drive.I_s", [](RunConfig& c, double v) { c.drive.I_s = v; }},
          {"geometry.L", [](RunConfig& c, double v) { c.geometry.L = v; }},
          {"geometry.d_NV",
           [](RunConfig& c, double v) { c.geometry.d_NV = v; }},
          {"photophysics.n_NV",
           [](RunConfig& c, double v) { c.photophysics.n_NV = v; }},
          {"photophysics.Omega_R",
           [](RunConfig& c, double v) { c.photophysics.Omega_R = v; }},
          {"detection.R0",
           [](RunConfig& c, double v) { c.detection.R0 = v; }},
          {"detection.R", [](RunConfig& c, double v) { c.detection.R = v; }},
          {"detection.delta_phi_LO",
           [](RunConfig& c, double v) { c.detection.delta_phi_LO = v; }},
      };
  return keys;
}

inline void apply_override(RunConfig& cfg, const std::string& key, double v) {
  const auto& keys = sweepable_keys();
  auto it = keys.find(key);
  if (it == keys.end())
    throw ValidationError("sweep: '" + key + "' is not a sweepable config key");
  it->second(cfg, v);
}

struct SweepPoint {
  std::vector<double> values;  // primary first, then families
  RunConfig config;
};

// Cartesian grid of sweep points in deterministic order (families outer,
// primary inner).
inline std::vector<SweepPoint> expand_sweep(const RunConfig& base,
                                            const SweepSpec& spec) {
  spec.validate();
  {
    RunConfig probe = base;  // key check up front, before any work
    apply_override(probe, spec.primary.key, spec.primary.value(0));
    for (const auto& f : spec.families)
      apply_override(probe, f.key, f.value(0));
  }
  std::vector<SweepPoint> points;
  std::vector<int> fam_idx(spec.families.size(), 0);
  auto emit_family = [&](const std::vector<int>& fidx) {
    for (int i = 0; i < spec.primary.count; ++i) {
      SweepPoint pt;
      pt.config = base;
      pt.values.push_back(spec.primary.value(i));
      apply_override(pt.config, spec.primary.key, pt.values.back());
      for (std::size_t f = 0; f < spec.families.size(); ++f) {
        const double v = spec.families[f].value(fidx[f]);
        pt.values.push_back(v);
        apply_override(pt.config, spec.families[f].key, v);
      }
      points.push_back(std::move(pt));
    }
  };
  if (spec.families.empty()) {
    emit_family({});
    return points;
  }
  // Odometer over family axes.
  while (true) {
    emit_family(fam_idx);
    int d = int(spec.families.size()) - 1;
    while (d >= 0 && ++fam_idx[d] == spec.families[d].count) {
      fam_idx[d] = 0;
      --d;
    }
    if (d < 0) break;
  }
  return points;
}

template <typename Result>
struct SweepOutcome {
  std::vector<double> values;
  Result result{};
  std::string error;  // empty on success
};

// Evaluates fn on every point with `jobs` workers; results return in input
// order. Exceptions become error strings on the affected rows only.
template <typename Result>
std::vector<SweepOutcome<Result>> run_sweep(
    const std::vector<SweepPoint>& points, int jobs,
    const std::function<Result(const RunConfig&)>& fn) {
  std::vector<SweepOutcome<Result>> out(points.size());
  if (jobs < 1) jobs = 1;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= points.size()) break;
      out[k].values = points[k].values;
      try {
        out[k].result = fn(points[k].config);
      } catch (const std::exception& e) {
        out[k].error = e.what();
      }
    }
  };
  if (jobs == 1 || points.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n = std::min<std::size_t>(jobs, points.size());
    pool.reserve(n);
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace nvsurf
