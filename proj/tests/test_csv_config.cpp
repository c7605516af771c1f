#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "dakit/config.hpp"
#include "dakit/csv.hpp"
#include "dakit/models.hpp"
#include "dakit/piecewise.hpp"

using dakit::KeyValueConfig;
using dakit::MeasurementSeries;
using dakit::ParseError;

namespace {

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "dakit_io_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_scratch(const std::string& name, const std::string& text) {
  const auto path = (scratch_dir() / name).string();
  dakit::write_file_atomic(path, text);
  return path;
}

}  // namespace

TEST_CASE("config parses key = value lines") {
  const auto cfg = KeyValueConfig::parse(
      "# leading comment\n"
      "alpha = 1.5\n"
      "\n"
      "name = lorenz63\t\n"
      "list = 1, 2.5, -3\r\n"
      "indices = 0,2\n"
      "count = 7\n",
      "test.cfg");
  CHECK(cfg.get_double("alpha") == 1.5);
  CHECK(cfg.get_string("name") == "lorenz63");
  CHECK(cfg.get_double_list("list") == std::vector<double>{1.0, 2.5, -3.0});
  CHECK(cfg.get_index_list("indices") == std::vector<std::size_t>{0, 2});
  CHECK(cfg.get_u64("count") == 7);
  CHECK(cfg.has("alpha"));
  CHECK_FALSE(cfg.has("beta"));

  SECTION("fallbacks cover missing keys only") {
    CHECK(cfg.get_double("alpha", 9.0) == 1.5);
    CHECK(cfg.get_double("missing", 9.0) == 9.0);
    CHECK(cfg.get_string("missing", "x") == "x");
  }
}

TEST_CASE("config rejects malformed text with line numbers") {
  SECTION("missing separator") {
    try {
      KeyValueConfig::parse("a = 1\nbroken line\n", "bad.cfg");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.file == "bad.cfg");
      CHECK(e.line == 2);
      CHECK(std::string(e.what()).find("bad.cfg:2") != std::string::npos);
    }
  }
  SECTION("duplicate key") {
    try {
      KeyValueConfig::parse("a = 1\na = 2\n", "bad.cfg");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 2);
      CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
    }
  }
  SECTION("empty key") {
    CHECK_THROWS_AS(KeyValueConfig::parse("= 3\n", "bad.cfg"), ParseError);
  }
  SECTION("unparsable number names the key") {
    const auto cfg = KeyValueConfig::parse("alpha = abc\n", "bad.cfg");
    try {
      cfg.get_double("alpha");
      FAIL("expected ConfigError");
    } catch (const dakit::ConfigError& e) {
      CHECK(std::string(e.what()).find("alpha") != std::string::npos);
      CHECK(std::string(e.what()).find("bad.cfg:1") != std::string::npos);
    }
  }
}

TEST_CASE("config flags unknown keys against an allowed set") {
  const auto cfg = KeyValueConfig::parse("alpha = 1\ntypo = 2\n", "t.cfg");
  try {
    cfg.require_known({"alpha", "beta"});
    FAIL("expected ConfigError");
  } catch (const dakit::ConfigError& e) {
    CHECK(std::string(e.what()).find("typo") != std::string::npos);
  }
}

TEST_CASE("config serializes canonically and round-trips") {
  KeyValueConfig cfg;
  cfg.set("zeta", "last");
  cfg.set_double("alpha", 0.1);
  cfg.set_u64("mid", 42);
  const std::string text = cfg.serialize();
  // keys come out sorted, one per line
  CHECK(text ==
        "alpha = 0.10000000000000001\n"
        "mid = 42\n"
        "zeta = last\n");

  const auto path = write_scratch("roundtrip.cfg", text);
  const auto loaded = KeyValueConfig::load(path);
  CHECK(loaded.serialize() == text);
  CHECK(loaded.get_double("alpha") == 0.1);
}

TEST_CASE("trajectory csv round-trips bitwise") {
  const std::vector<double> ic{5.0, 5.0, 5.0};
  dakit::PiecewiseDaConfig config;
  config.t_end = 1.0;
  config.output_step = 0.1;
  const auto traj = dakit::free_run(dakit::lorenz_system(), ic, config);

  const auto path = (scratch_dir() / "traj.csv").string();
  dakit::write_trajectory_csv(traj, path);
  const auto loaded = dakit::load_trajectory_csv(path);
  REQUIRE(loaded.times == traj.times);
  REQUIRE(loaded.states == traj.states);
  CHECK_FALSE(loaded.has_derivatives());
}

TEST_CASE("trajectory csv loader validates its input") {
  SECTION("header must match") {
    const auto path = write_scratch("badhdr.csv", "time,x0\n0,1\n");
    CHECK_THROWS_AS(dakit::load_trajectory_csv(path), ParseError);
  }
  SECTION("ragged rows name the line") {
    const auto path =
        write_scratch("ragged.csv", "t,x0,x1\n0,1,2\n0.1,3\n");
    try {
      dakit::load_trajectory_csv(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 3);
    }
  }
  SECTION("time stamps must increase") {
    const auto path =
        write_scratch("backwards.csv", "t,x0\n0,1\n0,2\n");
    CHECK_THROWS_AS(dakit::load_trajectory_csv(path), ParseError);
  }
  SECTION("numbers must parse") {
    const auto path = write_scratch("nonnum.csv", "t,x0\n0,abc\n");
    try {
      dakit::load_trajectory_csv(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("x0") != std::string::npos);
      CHECK(e.line == 2);
    }
  }
}

TEST_CASE("measurement csv round-trips bitwise") {
  MeasurementSeries series;
  series.add(0.5, 0, {1.0 / 3.0, 0.25});
  series.add(1.0, 0, {-2.7182818284590452, 0.25});
  series.add(1.0, 2, {3.14159265358979, 0.125});

  const auto path = (scratch_dir() / "meas.csv").string();
  dakit::write_measurements_csv(series, path);
  const auto loaded = dakit::load_measurements_csv(path);
  REQUIRE(loaded.times == series.times);
  REQUIRE(loaded.size() == 2);
  REQUIRE(loaded.entry_count() == 3);
  for (std::size_t i = 0; i < series.size(); ++i) {
    for (const auto& [comp, obs] : series.observations[i]) {
      REQUIRE(loaded.observations[i].count(comp) == 1);
      CHECK(loaded.observations[i].at(comp).value == obs.value);
      CHECK(loaded.observations[i].at(comp).variance == obs.variance);
    }
  }
}

TEST_CASE("measurement csv loader accepts an empty data section") {
  const auto path =
      write_scratch("empty_meas.csv", "t,component,value,variance\n");
  const auto loaded = dakit::load_measurements_csv(path);
  CHECK(loaded.empty());
}

TEST_CASE("measurement csv loader reports bad rows") {
  SECTION("duplicate time and component") {
    const auto path = write_scratch(
        "dup_meas.csv",
        "t,component,value,variance\n0.5,0,1,0.25\n0.5,0,2,0.25\n");
    try {
      dakit::load_measurements_csv(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 3);
      CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
    }
  }
  SECTION("time running backwards") {
    const auto path = write_scratch(
        "back_meas.csv",
        "t,component,value,variance\n1,0,1,0.25\n0.5,0,2,0.25\n");
    try {
      dakit::load_measurements_csv(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 3);
    }
  }
  SECTION("negative variance") {
    const auto path = write_scratch(
        "negvar_meas.csv", "t,component,value,variance\n1,0,1,-0.25\n");
    CHECK_THROWS_AS(dakit::load_measurements_csv(path), ParseError);
  }
  SECTION("missing file") {
    CHECK_THROWS_AS(dakit::load_measurements_csv("/nonexistent/m.csv"),
                    dakit::IoError);
  }
}

TEST_CASE("parcel csv loader builds validated parcels") {
  const auto path = write_scratch("parcels.csv",
                                  "label,area,cn\n"
                                  "urban,2.5,90\n"
                                  "forest,7.5,60\n");
  const auto parcels = dakit::load_parcels_csv(path);
  REQUIRE(parcels.size() == 2);
  CHECK(parcels[0].label == "urban");
  CHECK(parcels[0].area == 2.5);
  CHECK(parcels[1].cn == 60.0);
  CHECK(dakit::weighted_cn(parcels) == 67.5);

  SECTION("invalid curve number names the row") {
    const auto bad = write_scratch("parcels_bad.csv",
                                   "label,area,cn\nurban,1,150\n");
    CHECK_THROWS_AS(dakit::load_parcels_csv(bad), ParseError);
  }
}

TEST_CASE("runoff day csv loader builds day records") {
  const auto path = write_scratch(
      "days.csv",
      "day,p_mm,model_q,model_var,obs_q,obs_var\n"
      "2007-07-01,12.5,3.1,1.2,2.9,0.8\n"
      "2007-07-02,0,0,1.0,0.1,0.9\n");
  const auto days = dakit::load_runoff_days_csv(path);
  REQUIRE(days.size() == 2);
  CHECK(days[0].day == "2007-07-01");
  CHECK(days[0].rainfall_p == 12.5);
  CHECK(days[0].model_q.value == 3.1);
  CHECK(days[0].model_q.variance == 1.2);
  CHECK(days[0].observed_q.value == 2.9);
  CHECK(days[0].observed_q.variance == 0.8);
  CHECK_FALSE(days[0].fused_q.has_value());

  SECTION("negative rainfall names the row") {
    const auto bad = write_scratch(
        "days_bad.csv",
        "day,p_mm,model_q,model_var,obs_q,obs_var\nd1,-5,0,1,0,1\n");
    try {
      dakit::load_runoff_days_csv(bad);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line == 2);
    }
  }
}

TEST_CASE("csv reader requires a header") {
  const auto path = write_scratch("empty.csv", "");
  CHECK_THROWS_AS(dakit::read_csv(path), ParseError);
}
