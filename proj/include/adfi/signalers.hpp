#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "adfi/fidelity.hpp"
#include "adfi/math.hpp"

namespace adfi {

struct PacketSignalerConfig {
  double inflation = 0.5;        // m
  double refresh_interval = 5.0; // s of sim time
  int settle_steps = 2;
  double velocity_epsilon_linear = 1e-4;   // m/s
  double velocity_epsilon_angular = 1e-4;  // rad/s
};

// Per-step view of one packet, assembled by the scene.
struct PacketView {
  std::uint64_t tree_id = 0;
  Aabb aabb;
  double linear_speed = 0.0;
  double angular_speed = 0.0;
  FidelityStatus current = FidelityStatus::High;
};

struct PacketSignalerState {
  std::vector<std::uint64_t> tree_ids;       // parallel arrays
  std::vector<int> settle_counters;
  double last_refresh_time = 0.0;
  bool refresh_active = false;
  bool action_boundary_pending = true;  // force a refresh on the first tick
};

// True iff the refresh interval elapsed or an action boundary occurred since
// the last refresh.
bool refresh_due(const PacketSignalerState& state, double sim_time,
                 const PacketSignalerConfig& config);

// Computes the desired status for every packet for this step. Called once per
// step, before the manager tick that applies the results. Rules:
//   (a) any packet Inside/Intersecting the inflated robot box -> High;
//   (b) a High packet fully Outside and under the velocity epsilons for
//       settle_steps consecutive steps -> Medium;
//   (c) Medium -> Low only when every High packet is Inside the box;
//   (d) periodic/action-boundary refresh: everything High for one step.
class PacketSignalerHub {
 public:
  explicit PacketSignalerHub(PacketSignalerConfig config) : config_(config) {}

  void note_action_boundary() { state_.action_boundary_pending = true; }

  void update(double sim_time, const Aabb& inflated_robot_box,
              const std::vector<PacketView>& packets);

  FidelityStatus desired(std::uint64_t tree_id) const;
  bool refresh_active() const { return state_.refresh_active; }

  const PacketSignalerConfig& config() const { return config_; }
  const PacketSignalerState& state() const { return state_; }
  void load_state(const PacketSignalerState& s);

 private:
  int counter_slot(std::uint64_t tree_id);
  int find_slot(std::uint64_t tree_id) const;

  PacketSignalerConfig config_;
  PacketSignalerState state_;
  std::unordered_map<std::uint64_t, int> slot_map_;
  std::vector<FidelityStatus> desired_by_slot_;
};

struct PlungerCommandEvent {
  enum class Kind { Extend, Retract };
  Kind kind = Kind::Extend;
  std::uint64_t step_index = 0;
};

// Two-level, command-driven signaler: Extend -> High from that step,
// Retract -> Low from that step, unchanged otherwise.
class PlungerSignaler {
 public:
  void push(PlungerCommandEvent event);
  FidelityStatus desired(std::uint64_t step_index);

  FidelityStatus current() const { return current_; }
  bool extended() const { return extend_seen_; }

  struct State {
    std::vector<PlungerCommandEvent> pending;
    FidelityStatus current = FidelityStatus::Low;
    bool extend_seen = false;
  };
  State save_state() const { return {pending_, current_, extend_seen_}; }
  void load_state(const State& s) {
    pending_ = s.pending;
    current_ = s.current;
    extend_seen_ = s.extend_seen;
  }

 private:
  std::vector<PlungerCommandEvent> pending_;
  FidelityStatus current_ = FidelityStatus::Low;
  bool extend_seen_ = false;
};

}  // namespace adfi
