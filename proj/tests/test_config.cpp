#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "nvsurf/config.hpp"

using namespace nvsurf;

namespace {

bool configs_equal(const RunConfig& a, const RunConfig& b) {
  const auto& pa = a.photophysics;
  const auto& pb = b.photophysics;
  bool ok = pa.k31 == pb.k31 && pa.k42 == pb.k42 && pa.k35 == pb.k35 &&
            pa.k45 == pb.k45 && pa.k61 == pb.k61 && pa.k62 == pb.k62 &&
            pa.k38 == pb.k38 && pa.k48 == pb.k48 && pa.k71 == pb.k71 &&
            pa.k72 == pb.k72 && pa.Gamma == pb.Gamma &&
            pa.Gamma_NV0 == pb.Gamma_NV0 && pa.sigma_t == pb.sigma_t &&
            pa.sigma_s == pb.sigma_s && pa.sigma_NV0 == pb.sigma_NV0 &&
            pa.n_NV == pb.n_NV && pa.T2_star == pb.T2_star && pa.T2 == pb.T2 &&
            pa.Omega_R == pb.Omega_R && pa.gamma_r == pb.gamma_r &&
            pa.F_p == pb.F_p && pa.gamma_quenching == pb.gamma_quenching;
  ok = ok && a.drive.I_t == b.drive.I_t && a.drive.I_s == b.drive.I_s &&
       a.drive.mw_on == b.drive.mw_on;
  ok = ok && a.geometry.L == b.geometry.L && a.geometry.d_NV == b.geometry.d_NV &&
       a.geometry.p == b.geometry.p && a.geometry.w == b.geometry.w &&
       a.geometry.t == b.geometry.t &&
       a.geometry.n_diamond == b.geometry.n_diamond;
  ok = ok && a.detection.R == b.detection.R &&
       a.detection.delta_phi_LO == b.detection.delta_phi_LO &&
       a.detection.R0 == b.detection.R0 &&
       a.detection.phase_model.kappa == b.detection.phase_model.kappa &&
       a.detection.phase_model.table == b.detection.phase_model.table;
  return ok;
}

}  // namespace

TEST_CASE("empty document yields defaults") {
  const RunConfig cfg = load_config("");
  const auto d = default_params();
  CHECK(cfg.photophysics.k45 == d.k45);
  CHECK(cfg.photophysics.n_NV == d.n_NV);
  CHECK(cfg.drive.I_t == doctest::Approx(0.1));
  CHECK(cfg.drive.I_s == doctest::Approx(1.0));
  CHECK(cfg.geometry.p == doctest::Approx(434e-9));
  // Figure units convert to SI on demand.
  CHECK(cfg.optical_drive().I_t == doctest::Approx(1e8));
  CHECK(cfg.optical_drive().I_s == doctest::Approx(1e9));
}

TEST_CASE("single-field override keeps every other default") {
  const RunConfig cfg =
      load_config(R"({"photophysics": {"n_NV": 1.4e24}})");
  CHECK(cfg.photophysics.n_NV == doctest::Approx(1.4e24));
  CHECK(cfg.photophysics.k45 == default_params().k45);
  CHECK(cfg.drive.I_s == doctest::Approx(1.0));
}

TEST_CASE("invariant violations name the offending key") {
  try {
    load_config(R"({"drive": {"I_t": -0.5}})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("drive.I_t") != std::string::npos);
  }
}

TEST_CASE("unknown and mistyped keys are schema errors") {
  CHECK_THROWS_AS(load_config(R"({"photophysic": {}})"), SchemaError);
  try {
    load_config(R"({"drive": {"I_t": "fast"}})");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("drive.I_t") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config("{nonsense"), SchemaError);
}

TEST_CASE("round trip: serialize(load(x)) reparses equal") {
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    RunConfig cfg;
    cfg.drive.I_t = 0.001 + u(rng);
    cfg.drive.I_s = 0.001 + 2 * u(rng);
    cfg.drive.mw_on = u(rng) > 0.5;
    cfg.photophysics.n_NV = 1e24 * (0.5 + u(rng));
    cfg.geometry.d_NV = 1e-6 * (0.5 + 9 * u(rng));
    cfg.detection.R = u(rng);
    cfg.detection.delta_phi_LO = 2 * 3.14159 * u(rng);
    cfg.detection.phase_model.kappa = -30 * u(rng);
    if (trial % 3 == 0)
      cfg.detection.phase_model.table = {{0.0, 0.0}, {0.1, 0.02 * u(rng)}};

    const RunConfig reparsed = load_config(save_config(cfg));
    CHECK(configs_equal(cfg, reparsed));
    // Fixed point after one cycle.
    CHECK(save_config(reparsed) == save_config(cfg));
  }
}

TEST_CASE("file references resolve relative to the config file") {
  namespace fs = std::filesystem;
  fs::create_directories("cfg_reldir");
  {
    std::ofstream os("cfg_reldir/table.csv");
    os << "A_pixel,dphi_rad\n0,0\n0.2,-0.1\n";
  }
  {
    std::ofstream os("cfg_reldir/config.json");
    os << R"({"detection": {"phase_model": {"table_path": "table.csv"}}})";
  }
  const RunConfig cfg = load_config_file("cfg_reldir/config.json");
  REQUIRE(cfg.detection.phase_model.table.size() == 2);
  CHECK(cfg.detection.phase_model(0.1) == doctest::Approx(-0.05));
  fs::remove_all("cfg_reldir");
}

TEST_CASE("phase table loads from a two-column CSV file") {
  const std::string path = "phase_table_test.csv";
  {
    std::ofstream os(path);
    os << "A_pixel,dphi_rad\n0,0\n0.1,0.05\n";
  }
  const RunConfig cfg = load_config(
      R"({"detection": {"phase_model": {"table_path": ")" + path + R"("}}})");
  REQUIRE(cfg.detection.phase_model.table.size() == 2);
  CHECK(cfg.detection.phase_model(0.05) == doctest::Approx(0.025));
  std::remove(path.c_str());
}
