#include "adfi/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "adfi/errors.hpp"

namespace adfi {

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool sequence_less(const std::vector<Action>& a, const std::vector<Action>& b) {
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    const int ka = static_cast<int>(a[i].kind);
    const int kb = static_cast<int>(b[i].kind);
    if (ka != kb) return ka < kb;
    if (a[i].value != b[i].value) return a[i].value < b[i].value;
  }
  return a.size() < b.size();
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::size_t feature_dimension() { return 6; }

std::vector<double> extract_features(const Scene& scene) {
  const Scene::Frontier f = scene.frontier();
  std::vector<double> x(feature_dimension(), 0.0);
  if (!f.any) return x;
  // Column heights in three depth bands behind the pile front.
  const double bands[3][2] = {{0.0, 0.35}, {0.35, 0.75}, {0.75, 1.2}};
  for (const PacketInfo& p : scene.packets()) {
    if (p.unloaded) continue;
    const Aabb box = scene.world().body_aabb(p.body);
    const double depth = f.front_x - scene.world().body(p.body).position.x;
    for (int b = 0; b < 3; ++b)
      if (depth >= bands[b][0] && depth < bands[b][1]) x[b] = std::max(x[b], box.max.y);
  }
  x[3] = static_cast<double>(f.floor_count);
  x[4] = f.pile_depth;
  x[5] = static_cast<double>(scene.remaining_packets());
  return x;
}

Planner::Planner(PlannerConfig config) : config_(config) {
  if (config_.n_particles < 1 || config_.n_actions < 1 || config_.n_iterations < 1 ||
      config_.depth < 1)
    throw ParameterError("planner: counts and depth must be >= 1");
  if (config_.noise < 0.0 || config_.noise >= 1.0)
    throw ParameterError("planner: noise must be in [0, 1)");
}

std::uint64_t Planner::cost_model() const {
  return static_cast<std::uint64_t>(config_.n_iterations) *
         static_cast<std::uint64_t>(config_.n_particles) *
         static_cast<std::uint64_t>(config_.n_actions) *
         static_cast<std::uint64_t>(config_.depth);
}

std::vector<Action> Planner::candidate_actions(const Scene& scene) const {
  const Scene::Frontier f = scene.frontier();
  std::vector<Action> pool;
  if (f.any) {
    const double gap = scene.nose_front_x() - f.front_x;
    if (gap > 0.30) pool.push_back(Action::move_base(-(gap - 0.10)));
    if (f.top_center_y > 0.45) pool.push_back(Action::pick(f.top_center_y));
    pool.push_back(Action::sweep(std::max(0.3, gap + 0.2)));
    pool.push_back(Action::sweep(std::max(0.5, gap + 0.5)));
  } else {
    pool.push_back(Action::sweep(0.3));
  }
  return pool;
}

double Planner::evaluate_sequence(Scene& scene, const std::vector<Action>& sequence,
                                  double* mean_duration) {
  const SceneState entry = scene.save_state();
  double total_unloaded = 0.0;
  double total_duration = 0.0;
  for (int p = 0; p < config_.n_particles; ++p) {
    std::mt19937_64 rng(config_.seed * 0x9e3779b97f4a7c15ull + p + 1);
    // Perturb packet masses and frictions multiplicatively; the restore below
    // brings the originals back.
    for (const PacketInfo& pk : scene.packets()) {
      if (pk.unloaded) continue;
      const RigidBody& b = scene.world().body(pk.body);
      const double fm = 1.0 + config_.noise * (2.0 * uniform01(rng) - 1.0);
      const double ff = 1.0 + config_.noise * (2.0 * uniform01(rng) - 1.0);
      scene.world().set_mass(pk.body, b.mass * fm);
      scene.world().set_friction(pk.body, std::clamp(b.friction * ff, 0.0, 1.5));
    }
    const int unloaded0 = scene.count_unloaded();
    double duration = 0.0;
    try {
      for (const Action& a : sequence) {
        const ActionOutcome out = scene.execute_action(a);
        duration += out.duration;
      }
      total_unloaded += scene.count_unloaded() - unloaded0;
      total_duration += duration;
    } catch (const std::exception&) {
      // Failed rollout scores zero unloaded packets.
      total_duration += duration;
    }
    scene.load_state(entry);
  }
  if (mean_duration) *mean_duration = total_duration / config_.n_particles;
  return total_unloaded / config_.n_particles;
}

PlanResult Planner::search(Scene& scene) {
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult result;
  const SceneState entry = scene.save_state();
  const std::vector<Action> pool = candidate_actions(scene);
  if (pool.empty()) throw PlanningError("no candidate actions for the current scene");

  bool have_best = false;
  bool timed_out = false;
  for (int iter = 0; iter < config_.n_iterations && !timed_out; ++iter) {
    std::mt19937_64 rng(config_.seed + 0x51ed2700ull * (iter + 1));
    for (int cand = 0; cand < config_.n_actions; ++cand) {
      if (config_.timeout_wall > 0.0 && elapsed_seconds(t0) > config_.timeout_wall) {
        timed_out = true;
        break;
      }
      std::vector<Action> seq;
      seq.reserve(config_.depth);
      for (int d = 0; d < config_.depth; ++d)
        seq.push_back(pool[static_cast<std::size_t>(uniform01(rng) * pool.size()) % pool.size()]);
      double duration = 0.0;
      const double unloaded = evaluate_sequence(scene, seq, &duration);
      ++result.sequences_evaluated;
      result.action_executions +=
          static_cast<std::uint64_t>(config_.n_particles) * seq.size();
      const bool better =
          !have_best || unloaded > result.expected_unloaded ||
          (unloaded == result.expected_unloaded && duration < result.expected_duration) ||
          (unloaded == result.expected_unloaded && duration == result.expected_duration &&
           sequence_less(seq, result.best_sequence));
      if (better) {
        result.best_sequence = seq;
        result.expected_unloaded = unloaded;
        result.expected_duration = duration;
        have_best = true;
      }
    }
  }
  scene.load_state(entry);
  if (!have_best)
    throw PlanningError("planning timed out before evaluating any sequence");
  result.wall_time = elapsed_seconds(t0);
  return result;
}

DatasetResult Planner::generate_dataset(Scene& scene, int max_decisions,
                                        double timeout_wall) {
  const auto t0 = std::chrono::steady_clock::now();
  DatasetResult out;
  while (static_cast<int>(out.states.size()) < max_decisions) {
    if (timeout_wall > 0.0 && elapsed_seconds(t0) > timeout_wall) break;
    const Scene::Frontier f = scene.frontier();
    if (!f.any) break;

    // Close the approach gap before scoring pick vs. sweep.
    const double gap = scene.nose_front_x() - f.front_x;
    if (gap > 0.30) {
      scene.execute_action(Action::move_base(-(gap - 0.10)));
      ++out.action_executions;
      continue;
    }

    const std::vector<double> features = extract_features(scene);
    const Action pick = Action::pick(std::max(0.45, f.top_center_y));
    const Action sweep = Action::sweep(std::max(0.3, gap + 0.2));

    const SceneState snap = scene.save_state();
    int pick_gain = 0;
    try {
      pick_gain = scene.execute_action(pick).newly_unloaded;
    } catch (const std::exception&) {
    }
    ++out.action_executions;
    scene.load_state(snap);
    int sweep_gain = 0;
    try {
      sweep_gain = scene.execute_action(sweep).newly_unloaded;
    } catch (const std::exception&) {
    }
    ++out.action_executions;
    scene.load_state(snap);

    // Ties label sweep: it keeps the floor clear for later picks.
    const int label = pick_gain > sweep_gain ? 1 : 0;
    out.states.push_back({features, label});
    scene.execute_action(label == 1 ? pick : sweep);
    ++out.action_executions;
  }
  out.wall_time = elapsed_seconds(t0);
  return out;
}

}  // namespace adfi
