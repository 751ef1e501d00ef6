#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "approx.hpp"
#include "cavlock/sweep.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using namespace cavlock;

namespace {

std::string csv_text(const CsvDataset& data) {
  std::ostringstream os;
  write_csv(data, os);
  return os.str();
}

template <class F>
std::string error_text(F&& f, ErrorCode expected) {
  try {
    f();
  } catch (const Error& e) {
    CHECK(e.code() == expected);
    return e.what();
  }
  FAIL("expected an error");
  return {};
}

}  // namespace

TEST_SUITE("sweep") {
  TEST_CASE("CSV write-then-read is lossless") {
    CsvDataset data;
    data.metadata = {"tool test", "second line"};
    data.columns = {"a", "b", "label"};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      data.rows.push_back({std::pow(10.0, 40 * u(rng)) * u(rng), u(rng) / 3.0, std::string("row, \"quoted\"")});
    }
    data.rows.push_back({std::nan(""), std::numeric_limits<double>::infinity(), std::string("")});
    const auto back = parse_csv(csv_text(data));
    CHECK(back.metadata == data.metadata);
    CHECK(back.columns == data.columns);
    REQUIRE(back.rows.size() == data.rows.size());
    for (std::size_t i = 0; i + 1 < data.rows.size(); ++i) {
      CHECK(back.number(i, "a") == std::get<double>(data.rows[i][0]));
      CHECK(back.number(i, "b") == std::get<double>(data.rows[i][1]));
      CHECK(back.text(i, "label") == "row, \"quoted\"");
    }
    CHECK(std::isnan(back.number(data.rows.size() - 1, "a")));
    CHECK(std::isinf(back.number(data.rows.size() - 1, "b")));

    const auto path = std::filesystem::temp_directory_path() / "cavlock_test_roundtrip.csv";
    write_csv(data, path.string());
    CHECK(csv_text(read_csv(path.string())) == csv_text(data));
    std::filesystem::remove(path);
  }

  TEST_CASE("CSV width mismatch names the line") {
    const auto msg = error_text([] { parse_csv("# meta\na,b\n1,2\n3\n"); }, ErrorCode::ParseError);
    CHECK(msg.find("line 4") != std::string::npos);
  }

  TEST_CASE("config parse errors name the key and line") {
    auto msg = error_text([] { Config::parse("kappa = 1\n  g@x = 2\n", "cfg"); }, ErrorCode::ParseError);
    CHECK(msg.find("g@x") != std::string::npos);
    CHECK(msg.find("cfg:2") != std::string::npos);

    msg = error_text([] { Config::parse("# c\nkappa = 1\nkapa = 2\n", "cfg"); }, ErrorCode::ParseError);
    CHECK(msg.find("kapa") != std::string::npos);
    CHECK(msg.find("cfg:3") != std::string::npos);

    msg = error_text([] { Config::parse("kappa 1\n", "cfg"); }, ErrorCode::ParseError);
    CHECK(msg.find("cfg:1") != std::string::npos);

    msg = error_text([] { Config::parse("kappa = 1\nkappa = 2\n", "cfg"); }, ErrorCode::ParseError);
    CHECK(msg.find("kappa") != std::string::npos);

    const auto cfg = Config::parse("kappa = abc\n", "cfg");
    msg = error_text([&] { cfg.number("kappa"); }, ErrorCode::ParseError);
    CHECK(msg.find("cfg:1") != std::string::npos);
  }

  TEST_CASE("config values and hashing") {
    const auto a = Config::parse("kappa = 100 # comment\ngamma=1\n");
    const auto b = Config::parse("gamma = 1\n\n  kappa   =   100\n");
    CHECK(a.number("kappa") == 100.0);
    CHECK(a.canonical() == b.canonical());
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != Config::parse("gamma = 1\nkappa = 101\n").hash());
  }

  TEST_CASE("unknown axis lists the allowed names") {
    const auto msg = error_text([] { parse_axis("kappa lin 1 2 3", 1.0); }, ErrorCode::ConfigError);
    for (const auto& n : axis_names()) CHECK(msg.find(n) != std::string::npos);
    error_text([] { parse_axis("NC_eff lin 1 2 1", 1.0); }, ErrorCode::ConfigError);
    error_text([] { parse_axis("NC_eff log 0 2 5", 1.0); }, ErrorCode::ConfigError);
  }

  TEST_CASE("frequency units scale rates at the boundary") {
    const auto hz = point_from_config(Config::parse("units = hz\ng = 4\nkappa = 160000\ngamma = 3\ngamma_d = 3\nn_atoms = 100000\n"));
    const auto rad = point_from_config(Config::parse("g = 4\nkappa = 160000\ngamma = 3\ngamma_d = 3\nn_atoms = 100000\n"));
    CHECK(hz.params.g == kTwoPi * rad.params.g);
    CHECK(hz.params.kappa == kTwoPi * rad.params.kappa);
    CHECK(hz.params.gamma_d == kTwoPi * rad.params.gamma_d);
    CHECK(hz.params.n_atoms == rad.params.n_atoms);
  }

  TEST_CASE("point reports") {
    auto pc = point_from_config(Config::parse(
        "units = hz\ng = 4\nkappa = 160000\ngamma = 3\ngamma_d = 3\nn_atoms = 100000\n"
        "alpha_in_sq_over_I0 = 1.2\n"));
    pc.drive_ratio = 8.0 * (20.0 / 3.0 - 1.0) / (400.0 / 9.0);
    auto r = run_point(pc);
    REQUIRE(r.branches.size() == 1);
    REQUIRE(r.branches[0].linewidth);
    CHECK(r.branches[0].linewidth->delta_f == rel(0.5e-3).epsilon(0.1));
    const auto j = nlohmann::json::parse(point_report_json(r));
    CHECK(j["derived"]["NC_eff"].get<double>() == rel(20.0 / 3.0).epsilon(1e-12));
    CHECK(j["branches"][0]["linewidth"]["regime"] == "dark_point");

    PointConfig low;
    low.params = support::at_nc(0.5);
    low.drive_ratio = 1.0;
    r = run_point(low);
    CHECK_FALSE(r.dark);
    CHECK(nlohmann::json::parse(point_report_json(r))["dark_point"].is_null());

    PointConfig above;
    above.params = support::ideal(0.0);
    above.params.alpha_in_sq = 1.1 * derive(above.params).alpha_in_c_sq;
    r = run_point(above);
    CHECK(r.branches.empty());
    CHECK(r.error.find("AboveThreshold") != std::string::npos);
    CHECK_FALSE(r.hard_error);
  }

  TEST_CASE("sweep output is deterministic and independent of threads") {
    auto cfg = preset_config("fig3a");
    cfg.set("axis1", "alpha_in_sq_over_I0 lin 0.01 3 120");
    auto s = sweep_from_config(cfg);
    s.threads = 1;
    const auto a = csv_text(run_sweep(s));
    s.threads = 4;
    const auto b = csv_text(run_sweep(s));
    CHECK(a == b);
    CHECK(csv_text(run_sweep(s)) == a);
  }

  TEST_CASE("sweep rows satisfy the cubic") {
    const auto s = sweep_from_config(preset_config("fig2d"));
    const auto data = run_sweep(s);
    CHECK(count_hard_errors(data) == 0);
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> pick(0, data.rows.size() - 1);
    const std::size_t n = std::max<std::size_t>(data.rows.size() / 100, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = pick(rng);
      if (data.text(row, "stability") == "fold") continue;
      const double nc = data.number(row, "NC_eff");
      const double drive = data.number(row, "alpha_in_sq_over_I0");
      const double z = data.number(row, "z");
      CHECK(data.number(row, "cubic_residual") < 1e-10);
      CHECK(std::abs(cubic_residual(nc, drive, z)) < 1e-10);
      // The two terms of (z + 1/2)(z - a)^2 + (drive / 8) z cancel at a root.
      const long double a = 0.5L / nc, zl = z;
      const long double scale = std::abs((zl + 0.5L) * (zl - a) * (zl - a)) + std::abs(drive / 8.0L * zl);
      CHECK(static_cast<double>(std::abs(support::cubic_value(nc, drive, zl)) / scale) < 1e-10);
    }
  }

  TEST_CASE("fold rows sit on the bistability window") {
    const auto data = run_sweep(sweep_from_config(preset_config("fig2d")));
    int folds = 0;
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
      if (data.text(i, "stability") != "fold") continue;
      ++folds;
      const double nc = data.number(i, "NC_eff");
      const double x = 2.0 * data.number(i, "alpha_in_sq_over_I0");
      const auto w = bistability_window(nc);
      CHECK(std::min(std::abs(x - w.lower), std::abs(x - w.upper)) < 1e-6);
      CHECK(4 * std::pow(data.number(i, "z"), 2) + data.number(i, "z") + 0.5 / nc ==
            doctest::Approx(0.0).epsilon(1e-6));
    }
    CHECK(folds == 4);
  }

  TEST_CASE("metadata carries the version and config hash") {
    auto cfg = preset_config("fig2d");
    const auto data = run_sweep(sweep_from_config(cfg));
    REQUIRE(data.metadata.size() >= 2);
    CHECK(data.metadata[0].find(kToolVersion) != std::string::npos);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(cfg.hash()));
    CHECK(data.metadata[1].find(hex) != std::string::npos);
  }
}
