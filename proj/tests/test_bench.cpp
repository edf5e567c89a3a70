#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <string>

#include "adfi/bench.hpp"
#include "adfi/errors.hpp"

using namespace adfi;

namespace {

ExperimentConfig tiny_experiment() {
  ExperimentConfig cfg;
  cfg.scenario.scenario.packet_count = 24;
  cfg.scenario.scenario.rows = 4;
  cfg.presets = {"hifi", "adfi-3"};
  cfg.seed_base = 3;
  cfg.repetitions = 2;
  cfg.episode_sim_time = 20.0;
  return cfg;
}

}  // namespace

TEST_CASE("presets map to the documented inflation margins") {
  CHECK(fidelity_preset("hifi").mode == FidelityMode::HiFi);
  CHECK(fidelity_preset("adfi-1").mode == FidelityMode::AdFi);
  CHECK(fidelity_preset("adfi-1").packet.inflation == doctest::Approx(1.00));
  CHECK(fidelity_preset("adfi-2").packet.inflation == doctest::Approx(0.50));
  CHECK(fidelity_preset("adfi-3").packet.inflation == doctest::Approx(0.01));
  CHECK(fidelity_preset_names().size() == 4);
  CHECK_THROWS_AS(fidelity_preset("adfi-9"), ParameterError);
}

TEST_CASE("percent error is symmetric-free and guards the zero baseline") {
  CHECK(percent_error(11.0, 10.0) == doctest::Approx(10.0));
  CHECK(percent_error(9.0, 10.0) == doctest::Approx(10.0));
  CHECK(percent_error(10.0, 10.0) == 0.0);
  CHECK_THROWS_AS(percent_error(1.0, 0.0), ParameterError);
}

TEST_CASE("scenario files round-trip through JSON") {
  ScenarioFile file;
  file.scenario.packet_count = 123;
  file.scenario.seed = 42;
  file.scenario.truck_length = 9.5;
  file.robot.plunger_count = 7;
  file.robot.conveyor_speed = 0.75;
  file.world.gravity = -9.5;
  const std::string path = "/tmp/adfi_scenario_roundtrip.json";
  save_scenario_file(path, file);
  const ScenarioFile back = load_scenario_file(path);
  CHECK(back.scenario.packet_count == 123);
  CHECK(back.scenario.seed == 42);
  CHECK(back.scenario.truck_length == 9.5);
  CHECK(back.robot.plunger_count == 7);
  CHECK(back.robot.conveyor_speed == 0.75);
  CHECK(back.world.gravity == -9.5);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_scenario_file("/tmp/adfi_missing_scenario.json"), ConfigError);
}

TEST_CASE("experiments pair seeds across presets and aggregate correctly") {
  const ExperimentResult result = run_experiment(tiny_experiment());
  REQUIRE(result.rows.size() == 4);
  CHECK(result.rows[0].preset == "hifi");
  CHECK(result.rows[0].seed == 3);
  CHECK(result.rows[1].seed == 4);
  CHECK(result.rows[2].preset == "adfi-3");
  CHECK(result.rows[2].seed == 3);
  for (const ResultRow& row : result.rows) {
    CHECK(!row.failed);
    CHECK(row.metrics.sim_time >= 20.0);
  }
  CHECK(result.mean_unloaded("hifi") ==
        (result.rows[0].metrics.unloaded_count + result.rows[1].metrics.unloaded_count) / 2.0);
  CHECK(result.mean_rtf("adfi-3") > 0.0);
  CHECK_THROWS_AS(result.mean_rtf("adfi-9"), LookupError);
}

TEST_CASE("result CSVs are byte-identical across reruns when wall columns are excluded") {
  const std::string a = results_csv(run_experiment(tiny_experiment()), false);
  const std::string b = results_csv(run_experiment(tiny_experiment()), false);
  CHECK(a == b);
  CHECK(a.find("wall_time") == std::string::npos);
  CHECK(a.find("rtf") == std::string::npos);
  const std::string with_wall = results_csv(run_experiment(tiny_experiment()), true);
  CHECK(with_wall.find("wall_time") != std::string::npos);
  CHECK(with_wall.substr(0, 7) == "preset,");
}

TEST_CASE("result CSVs parse back to the same per-preset means") {
  const ExperimentResult original = run_experiment(tiny_experiment());
  const ExperimentResult parsed = parse_results_csv(results_csv(original));
  REQUIRE(parsed.rows.size() == original.rows.size());
  for (std::size_t i = 0; i < parsed.rows.size(); ++i) {
    CHECK(parsed.rows[i].preset == original.rows[i].preset);
    CHECK(parsed.rows[i].seed == original.rows[i].seed);
    CHECK(parsed.rows[i].failed == original.rows[i].failed);
  }
  for (const std::string& p : {"hifi", "adfi-3"}) {
    CHECK(parsed.mean_unloaded(p) == doctest::Approx(original.mean_unloaded(p)).epsilon(1e-9));
    CHECK(parsed.mean_rtf(p) == doctest::Approx(original.mean_rtf(p)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(parse_results_csv(""), ConfigError);
  CHECK_THROWS_AS(parse_results_csv("bogus,header\n1,2\n"), ConfigError);
}

TEST_CASE("csv fields preserve doubles exactly") {
  const std::string f = format_csv_field(0.1);
  CHECK(std::stod(f) == 0.1);
  CHECK(format_csv_field(3.0) == "3");
}

TEST_CASE("text files round-trip") {
  const std::string path = "/tmp/adfi_text_roundtrip.txt";
  const std::string content = "line one\nline two\n";
  write_text_file(path, content);
  CHECK(read_text_file(path) == content);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_text_file("/tmp/adfi_missing_text.txt"), ConfigError);
}
