#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adfi/scene.hpp"

namespace adfi {

// Named fidelity presets: inflation margin (m) applied to the robot box.
// "adfi-1" = 1.00, "adfi-2" = 0.50, "adfi-3" = 0.01, "hifi" = no management.
FidelitySettings fidelity_preset(const std::string& name);
std::vector<std::string> fidelity_preset_names();

struct ScenarioFile {
  ScenarioSpec scenario;
  RobotSpec robot;
  WorldConfig world;
};

ScenarioFile load_scenario_file(const std::string& path);
void save_scenario_file(const std::string& path, const ScenarioFile& file);

struct ExperimentConfig {
  ScenarioFile scenario;
  std::vector<std::string> presets = {"hifi", "adfi-1", "adfi-2", "adfi-3"};
  std::uint64_t seed_base = 1;
  int repetitions = 5;
  double episode_sim_time = 120.0;
};

struct ResultRow {
  std::string preset;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  EpisodeMetrics metrics;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  double mean_unloaded(const std::string& preset) const;
  double mean_rtf(const std::string& preset) const;
};

// Runs every preset over the paired seed set seed_base .. seed_base+reps-1.
// Episodes that throw are recorded as failed rows, not dropped.
ExperimentResult run_experiment(const ExperimentConfig& config);

// |mean(candidate) - mean(baseline)| / mean(baseline) * 100.
// Throws ParameterError when the baseline mean is zero.
double percent_error(double candidate_mean, double baseline_mean);

// Deterministic CSV serialization: %.17g numbers, LF line endings.
std::string format_csv_field(double value);
std::string results_csv(const ExperimentResult& result, bool include_wall_columns = true);
ExperimentResult parse_results_csv(const std::string& csv);
std::string rtf_trace_csv(const std::vector<RtfSample>& trace);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace adfi
