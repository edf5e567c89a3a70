#include "adfi/bench.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "adfi/errors.hpp"

namespace adfi {

using nlohmann::json;

FidelitySettings fidelity_preset(const std::string& name) {
  FidelitySettings s;
  if (name == "hifi") {
    s.mode = FidelityMode::HiFi;
    return s;
  }
  s.mode = FidelityMode::AdFi;
  if (name == "adfi-1") {
    s.packet.inflation = 1.00;
  } else if (name == "adfi-2") {
    s.packet.inflation = 0.50;
  } else if (name == "adfi-3") {
    s.packet.inflation = 0.01;
  } else {
    throw ParameterError("unknown fidelity preset: " + name);
  }
  return s;
}

std::vector<std::string> fidelity_preset_names() {
  return {"hifi", "adfi-1", "adfi-2", "adfi-3"};
}

namespace {

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ScenarioFile load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scenario file " + path + ": " + e.what());
  }
  ScenarioFile f;
  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    get_if_present(s, "seed", f.scenario.seed);
    get_if_present(s, "packet_count", f.scenario.packet_count);
    get_if_present(s, "rows", f.scenario.rows);
    get_if_present(s, "columns", f.scenario.columns);
    get_if_present(s, "depth_columns", f.scenario.depth_columns);
    get_if_present(s, "jitter", f.scenario.jitter);
    get_if_present(s, "packet_hx_mean", f.scenario.packet_hx_mean);
    get_if_present(s, "packet_hy_mean", f.scenario.packet_hy_mean);
    get_if_present(s, "packet_size_spread", f.scenario.packet_size_spread);
    get_if_present(s, "packet_mass_min", f.scenario.packet_mass_min);
    get_if_present(s, "packet_mass_max", f.scenario.packet_mass_max);
    get_if_present(s, "packet_friction", f.scenario.packet_friction);
    get_if_present(s, "truck_length", f.scenario.truck_length);
    get_if_present(s, "truck_height", f.scenario.truck_height);
    get_if_present(s, "wall_thickness", f.scenario.wall_thickness);
  }
  if (j.contains("robot")) {
    const json& r = j["robot"];
    get_if_present(r, "base_half_width", f.robot.base_half_width);
    get_if_present(r, "base_half_height", f.robot.base_half_height);
    get_if_present(r, "arm_lift_min", f.robot.arm_lift_min);
    get_if_present(r, "arm_lift_max", f.robot.arm_lift_max);
    get_if_present(r, "plunger_count", f.robot.plunger_count);
    get_if_present(r, "plunger_stroke", f.robot.plunger_stroke);
    get_if_present(r, "nose_length", f.robot.nose_length);
    get_if_present(r, "conveyor_speed", f.robot.conveyor_speed);
    get_if_present(r, "conveyor_friction", f.robot.conveyor_friction);
    get_if_present(r, "drive_speed", f.robot.drive_speed);
  }
  if (j.contains("world")) {
    const json& w = j["world"];
    get_if_present(w, "gravity", f.world.gravity);
    get_if_present(w, "dt", f.world.dt);
    get_if_present(w, "solver_iterations", f.world.solver_iterations);
    get_if_present(w, "penetration_slop", f.world.penetration_slop);
    get_if_present(w, "baumgarte_beta", f.world.baumgarte_beta);
    get_if_present(w, "seed", f.world.seed);
  }
  return f;
}

void save_scenario_file(const std::string& path, const ScenarioFile& f) {
  json j;
  j["scenario"] = {{"seed", f.scenario.seed},
                   {"packet_count", f.scenario.packet_count},
                   {"rows", f.scenario.rows},
                   {"columns", f.scenario.columns},
                   {"depth_columns", f.scenario.depth_columns},
                   {"jitter", f.scenario.jitter},
                   {"packet_hx_mean", f.scenario.packet_hx_mean},
                   {"packet_hy_mean", f.scenario.packet_hy_mean},
                   {"packet_size_spread", f.scenario.packet_size_spread},
                   {"packet_mass_min", f.scenario.packet_mass_min},
                   {"packet_mass_max", f.scenario.packet_mass_max},
                   {"packet_friction", f.scenario.packet_friction},
                   {"truck_length", f.scenario.truck_length},
                   {"truck_height", f.scenario.truck_height},
                   {"wall_thickness", f.scenario.wall_thickness}};
  j["robot"] = {{"base_half_width", f.robot.base_half_width},
                {"base_half_height", f.robot.base_half_height},
                {"arm_lift_min", f.robot.arm_lift_min},
                {"arm_lift_max", f.robot.arm_lift_max},
                {"plunger_count", f.robot.plunger_count},
                {"plunger_stroke", f.robot.plunger_stroke},
                {"nose_length", f.robot.nose_length},
                {"conveyor_speed", f.robot.conveyor_speed},
                {"conveyor_friction", f.robot.conveyor_friction},
                {"drive_speed", f.robot.drive_speed}};
  j["world"] = {{"gravity", f.world.gravity},
                {"dt", f.world.dt},
                {"solver_iterations", f.world.solver_iterations},
                {"penetration_slop", f.world.penetration_slop},
                {"baumgarte_beta", f.world.baumgarte_beta},
                {"seed", f.world.seed}};
  write_text_file(path, j.dump(2) + "\n");
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.repetitions < 1) throw ParameterError("repetitions must be >= 1");
  ExperimentResult result;
  for (const std::string& preset : config.presets) {
    const FidelitySettings fidelity = fidelity_preset(preset);
    for (int r = 0; r < config.repetitions; ++r) {
      ResultRow row;
      row.preset = preset;
      row.seed = config.seed_base + static_cast<std::uint64_t>(r);
      try {
        ScenarioSpec spec = config.scenario.scenario;
        spec.seed = row.seed;
        Scene scene(spec, config.scenario.robot, config.scenario.world, fidelity);
        row.metrics = scene.run_episode(greedy_policy(), config.episode_sim_time);
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

double ExperimentResult::mean_unloaded(const std::string& preset) const {
  double sum = 0.0;
  int n = 0;
  for (const ResultRow& r : rows) {
    if (r.preset != preset) continue;
    sum += r.failed ? 0.0 : r.metrics.unloaded_count;
    ++n;
  }
  if (n == 0) throw LookupError("no rows for preset " + preset);
  return sum / n;
}

double ExperimentResult::mean_rtf(const std::string& preset) const {
  double sum = 0.0;
  int n = 0;
  for (const ResultRow& r : rows) {
    if (r.preset != preset || r.failed) continue;
    sum += r.metrics.real_time_factor;
    ++n;
  }
  if (n == 0) throw LookupError("no successful rows for preset " + preset);
  return sum / n;
}

double percent_error(double candidate_mean, double baseline_mean) {
  if (baseline_mean == 0.0)
    throw ParameterError("percent error is undefined for a zero baseline mean");
  return std::abs(candidate_mean - baseline_mean) / std::abs(baseline_mean) * 100.0;
}

std::string format_csv_field(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string results_csv(const ExperimentResult& result, bool include_wall_columns) {
  std::ostringstream os;
  os << "preset,seed,failed,unloaded,sim_time,unload_rate";
  if (include_wall_columns) os << ",wall_time,rtf";
  os << ",transitions\n";
  for (const ResultRow& r : result.rows) {
    os << r.preset << ',' << r.seed << ',' << (r.failed ? 1 : 0) << ','
       << r.metrics.unloaded_count << ',' << format_csv_field(r.metrics.sim_time) << ','
       << format_csv_field(r.metrics.unload_rate);
    if (include_wall_columns)
      os << ',' << format_csv_field(r.metrics.wall_time) << ','
         << format_csv_field(r.metrics.real_time_factor);
    os << ',' << r.metrics.transitions.transitions << '\n';
  }
  return os.str();
}

ExperimentResult parse_results_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("results csv: empty input");
  std::vector<std::string> columns;
  {
    std::istringstream hs(line);
    std::string field;
    while (std::getline(hs, field, ',')) columns.push_back(field);
  }
  const auto column = [&columns](const std::string& name) {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int c_preset = column("preset");
  const int c_seed = column("seed");
  const int c_failed = column("failed");
  const int c_unloaded = column("unloaded");
  const int c_sim = column("sim_time");
  const int c_rate = column("unload_rate");
  const int c_wall = column("wall_time");
  const int c_rtf = column("rtf");
  const int c_trans = column("transitions");
  if (c_preset < 0 || c_seed < 0 || c_failed < 0 || c_unloaded < 0 || c_sim < 0)
    throw ConfigError("results csv: missing required columns");

  ExperimentResult result;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() < columns.size()) throw ConfigError("results csv: short row");
    ResultRow row;
    row.preset = fields[c_preset];
    row.seed = std::stoull(fields[c_seed]);
    row.failed = fields[c_failed] != "0";
    row.metrics.unloaded_count = std::stoi(fields[c_unloaded]);
    row.metrics.sim_time = std::stod(fields[c_sim]);
    if (c_rate >= 0) row.metrics.unload_rate = std::stod(fields[c_rate]);
    if (c_wall >= 0) row.metrics.wall_time = std::stod(fields[c_wall]);
    if (c_rtf >= 0) row.metrics.real_time_factor = std::stod(fields[c_rtf]);
    if (c_trans >= 0) row.metrics.transitions.transitions = std::stoull(fields[c_trans]);
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::string rtf_trace_csv(const std::vector<RtfSample>& trace) {
  std::ostringstream os;
  os << "sim_time,rtf\n";
  for (const RtfSample& s : trace)
    os << format_csv_field(s.sim_time) << ',' << format_csv_field(s.rtf) << '\n';
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace adfi
