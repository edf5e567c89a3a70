#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "adfi/errors.hpp"

namespace adfi {

enum class ObjectType { Shape, Joint, Sensor, Script };
enum class JointMode { Active, Passive };
enum class SensorHandling { Automatic, Explicit };

// Totally ordered: High > Medium > Low.
enum class FidelityStatus { Low = 0, Medium = 1, High = 2 };

inline const char* to_string(FidelityStatus s) {
  switch (s) {
    case FidelityStatus::Low: return "Low";
    case FidelityStatus::Medium: return "Medium";
    case FidelityStatus::High: return "High";
  }
  return "?";
}

struct ObjectRef {
  ObjectType type = ObjectType::Shape;
  std::uint64_t id = 0;
  auto operator<=>(const ObjectRef&) const = default;
};

// Per-object fidelity-relevant settings. Which fields are meaningful depends
// on the object type; unused fields stay at their defaults so exact equality
// works uniformly.
struct ObjectFidelityState {
  ObjectType type = ObjectType::Shape;
  // Shape
  bool dynamic = false;
  bool respondable = false;
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
  // Joint
  JointMode mode = JointMode::Active;
  double setpoint = 0.0;
  // Sensor
  SensorHandling handling = SensorHandling::Automatic;
  // Script
  bool enabled = false;

  bool operator==(const ObjectFidelityState&) const = default;
};

// The engine contract the manager works through (R3): capture the current
// fidelity-relevant state of an object, or apply one.
class FidelityBackend {
 public:
  virtual ~FidelityBackend() = default;
  virtual ObjectFidelityState capture(const ObjectRef& ref) const = 0;
  virtual void apply(const ObjectRef& ref, const ObjectFidelityState& state) = 0;
};

struct Tree {
  std::uint64_t id = 0;
  std::vector<ObjectRef> objects;
};

struct SignalResult {
  bool ok = true;
  FidelityStatus status = FidelityStatus::High;
  std::string error;

  static SignalResult of(FidelityStatus s) { return {true, s, {}}; }
  static SignalResult failure(std::string msg) {
    return {false, FidelityStatus::High, std::move(msg)};
  }
};

using Signaler = std::function<SignalResult(std::uint64_t step_index)>;

enum class LevelSet { TwoLevel, ThreeLevel };

using HelperId = std::uint64_t;

struct Transition {
  HelperId helper = 0;
  std::uint64_t tree = 0;
  FidelityStatus from = FidelityStatus::High;
  FidelityStatus to = FidelityStatus::High;
  std::uint64_t step_index = 0;
};

struct SignalerFailure {
  HelperId helper = 0;
  std::uint64_t tree = 0;
  std::string error;
};

struct TickReport {
  std::vector<Transition> transitions;
  std::vector<SignalerFailure> failures;
};

struct TransitionStats {
  std::uint64_t transitions = 0;
  std::uint64_t cache_captures = 0;
  std::uint64_t cache_applies = 0;
};

// Shared below-High profiles, one per object type per level.
struct LowProfiles {
  ObjectFidelityState shape_medium;
  ObjectFidelityState shape_low;
  ObjectFidelityState joint_low;
  ObjectFidelityState sensor_low;
  ObjectFidelityState script_low;

  const ObjectFidelityState& profile(ObjectType type, FidelityStatus level) const;
  static LowProfiles defaults();
};

struct FidelityHelper {
  HelperId id = 0;
  Tree tree;
  LevelSet levels = LevelSet::TwoLevel;
  FidelityStatus current_status = FidelityStatus::High;
  bool active = true;
  // Present only while below High (parallel to tree.objects).
  std::vector<ObjectFidelityState> cached_high_state;
  std::vector<ObjectFidelityState> initial_snapshot;
};

// Serializable manager state (statuses, caches, counters); signalers are
// rebound by helper id on load.
struct ManagerState {
  std::vector<FidelityHelper> helpers;
  TransitionStats stats;
};

class FidelityManager {
 public:
  explicit FidelityManager(FidelityBackend& backend,
                           LowProfiles profiles = LowProfiles::defaults());

  HelperId register_tree(const Tree& tree, LevelSet levels, Signaler signaler);
  void deregister_tree(std::uint64_t tree_id);

  TickReport tick(std::uint64_t step_index);
  void apply_status(HelperId helper, FidelityStatus desired);
  void reset_all();

  TransitionStats transition_stats() const { return stats_; }
  FidelityStatus status(HelperId helper) const;
  FidelityStatus status_of_tree(std::uint64_t tree_id) const;
  std::size_t helper_count() const { return helpers_.size(); }
  const std::vector<FidelityHelper>& helpers() const { return helpers_; }

  ManagerState save_state() const;
  void load_state(const ManagerState& state);

 private:
  FidelityHelper& helper_mut(HelperId id);

  FidelityBackend& backend_;
  LowProfiles profiles_;
  std::vector<FidelityHelper> helpers_;
  std::vector<Signaler> signalers_;  // parallel to helpers_
  std::map<ObjectRef, std::uint64_t> owner_;
  std::unordered_map<std::uint64_t, std::size_t> helper_by_tree_;
  TransitionStats stats_;
  HelperId next_id_ = 1;
};

}  // namespace adfi
