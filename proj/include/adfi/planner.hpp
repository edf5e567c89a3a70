#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adfi/scene.hpp"

namespace adfi {

struct PlannerConfig {
  int n_particles = 4;        // sampled scene perturbations per candidate
  int n_actions = 4;          // candidate actions per decision point
  int n_iterations = 1;       // search restarts / refinement rounds
  int depth = 2;              // lookahead depth (actions per sequence)
  double noise = 0.2;         // fractional mass/friction perturbation per particle
  double timeout_wall = 0.0;  // seconds; 0 = unlimited
  std::uint64_t seed = 1;
};

struct PlanResult {
  std::vector<Action> best_sequence;
  double expected_unloaded = 0.0;
  double expected_duration = 0.0;
  std::uint64_t sequences_evaluated = 0;
  std::uint64_t action_executions = 0;  // execute_action calls during search
  double wall_time = 0.0;
};

struct LabeledState {
  std::vector<double> features;
  int label = 0;  // 1 = pick, 0 = sweep
};

struct DatasetResult {
  std::vector<LabeledState> states;
  std::uint64_t action_executions = 0;
  double wall_time = 0.0;
};

class Planner {
 public:
  explicit Planner(PlannerConfig config);

  // Estimated cost of one full search in execute_action calls.
  std::uint64_t cost_model() const;

  // Searches for the best depth-length action sequence from the scene's
  // current state. The scene is restored to its entry state afterwards.
  PlanResult search(Scene& scene);

  // Evaluates one fixed sequence across the particle set; returns mean
  // unloaded count. Exposed for testing the rollout machinery.
  double evaluate_sequence(Scene& scene, const std::vector<Action>& sequence,
                           double* mean_duration = nullptr);

  // Rolls an episode forward, labeling each decision point with whichever of
  // pick/sweep unloads more under a one-action lookahead (ties label sweep).
  DatasetResult generate_dataset(Scene& scene, int max_decisions,
                                 double timeout_wall = 0.0);

  const PlannerConfig& config() const { return config_; }

 private:
  std::vector<Action> candidate_actions(const Scene& scene) const;

  PlannerConfig config_;
};

// Feature vector for unloading decisions: frontal column heights, floor
// packet count, pile depth, remaining packet count.
std::vector<double> extract_features(const Scene& scene);
std::size_t feature_dimension();

}  // namespace adfi
