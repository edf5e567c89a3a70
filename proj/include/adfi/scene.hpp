#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adfi/fidelity.hpp"
#include "adfi/signalers.hpp"
#include "adfi/world.hpp"

namespace adfi {

struct ScenarioSpec {
  std::uint64_t seed = 1;
  int packet_count = 60;
  int rows = 4;            // stacked layers per column
  int columns = 5;         // lateral columns (collapsed into depth in 2D)
  int depth_columns = 3;   // columns along the truck
  double jitter = 0.003;   // m, horizontal placement noise
  double packet_hx_mean = 0.15;
  double packet_hy_mean = 0.12;
  double packet_size_spread = 0.15;  // fractional
  double packet_mass_min = 0.5;      // kg
  double packet_mass_max = 15.0;     // kg
  double packet_friction = 0.5;
  double truck_length = 6.0;
  double truck_height = 2.5;
  double wall_thickness = 0.2;
};

struct RobotSpec {
  double base_half_width = 0.5;
  double base_half_height = 0.5;
  double arm_lift_min = 0.3;
  double arm_lift_max = 2.2;
  int plunger_count = 9;
  double plunger_stroke = 0.3;
  double nose_length = 0.8;
  double nose_angle = 0.0;
  double conveyor_speed = 0.5;  // m/s
  double conveyor_friction = 0.8;
  double drive_speed = 0.5;  // m/s
};

enum class FidelityMode { HiFi, AdFi };

struct FidelitySettings {
  FidelityMode mode = FidelityMode::HiFi;
  PacketSignalerConfig packet;
};

struct Action {
  enum class Kind { MoveBase, Pick, Sweep, Retract };
  Kind kind = Kind::MoveBase;
  double value = 0.0;  // MoveBase: dx (m); Pick: height (m); Sweep: depth (m)

  static Action move_base(double dx) { return {Kind::MoveBase, dx}; }
  static Action pick(double height) { return {Kind::Pick, height}; }
  static Action sweep(double depth) { return {Kind::Sweep, depth}; }
  static Action retract() { return {Kind::Retract, 0.0}; }

  bool operator==(const Action&) const = default;
};

std::string to_string(const Action& action);

struct ActionOutcome {
  double duration = 0.0;  // sim seconds
  int newly_unloaded = 0;
};

struct RtfSample {
  double sim_time = 0.0;
  double rtf = 0.0;
};

struct EpisodeMetrics {
  int unloaded_count = 0;
  double sim_time = 0.0;
  double wall_time = 0.0;
  double real_time_factor = 0.0;  // sim_time / wall_time
  double unload_rate = 0.0;       // packets/hr of sim time
  std::vector<RtfSample> rtf_trace;
  // Mean instantaneous RTF over interval classes (adaptive-mode trace shape).
  double mean_rtf_plunger_high = 0.0;
  double mean_rtf_all_low = 0.0;
  std::uint64_t steps_plunger_high = 0;
  std::uint64_t steps_all_low = 0;
  TransitionStats transitions;
};

// Transition log entry kept for demotion-soundness auditing.
struct TransitionLogEntry {
  std::uint64_t step_index = 0;
  std::uint64_t tree_id = 0;
  FidelityStatus from = FidelityStatus::High;
  FidelityStatus to = FidelityStatus::High;
  // Consecutive pre-transition steps with sub-epsilon speed while fully
  // outside the robot box (tracked independently of the signaler).
  int settled_outside_streak = 0;
};

struct PacketInfo {
  BodyId body = 0;
  std::uint64_t tree_id = 0;
  bool unloaded = false;
};

struct SceneState {
  WorldState world;
  bool has_manager = false;
  ManagerState manager;
  PacketSignalerState hub;
  PlungerSignaler::State plunger;
  std::uint64_t step_index = 0;
  int unloaded_count = 0;
  std::vector<bool> packet_unloaded;
  bool pick_done = false;
  bool engage_active = false;
  double base_x = 0.0;
  double nose_y = 0.0;
  Vec2 arm_pos;
  std::vector<double> plunger_extension;
  std::vector<double> plunger_setpoint;
  std::vector<JointMode> plunger_mode;
  std::vector<SensorHandling> sensor_handling;
  std::vector<bool> sensor_fired;
  std::vector<bool> script_enabled;
};

class Scene;
using Policy = std::function<std::optional<Action>(Scene&)>;

class Scene : public FidelityBackend {
 public:
  Scene(const ScenarioSpec& spec, const RobotSpec& robot, const WorldConfig& world_config,
        const FidelitySettings& fidelity);

  // --- task operations ---
  Aabb robot_bounding_box(double inflation) const;
  ActionOutcome execute_action(const Action& action);
  EpisodeMetrics run_episode(const Policy& policy, double max_sim_time);
  int count_unloaded() const { return unloaded_count_; }
  int remaining_packets() const;

  // Runs one simulation step (fidelity tick, kinematics, physics, accounting).
  void step_once();

  // --- introspection ---
  World& world() { return world_; }
  const World& world() const { return world_; }
  const ScenarioSpec& scenario_spec() const { return spec_; }
  const RobotSpec& robot_spec() const { return robot_; }
  const FidelitySettings& fidelity_settings() const { return fidelity_; }
  FidelityManager* manager() { return manager_ ? manager_.get() : nullptr; }
  const std::vector<PacketInfo>& packets() const { return packets_; }
  const std::vector<BodyId>& plunger_links() const { return plunger_links_; }
  double unload_plane_x() const { return unload_plane_x_; }
  double base_x() const { return base_x_; }
  std::uint64_t step_index() const { return step_index_; }
  bool pick_done() const { return pick_done_; }
  std::string trajectory_hash() const;

  const std::vector<TransitionLogEntry>& transition_log() const { return transition_log_; }
  std::uint64_t boundary_violations() const { return boundary_violations_; }
  void set_boundary_check(bool on) { boundary_check_ = on; }

  // Episode accounting access (accumulated since last reset_metrics()).
  void reset_metrics();
  double accumulated_wall() const { return wall_accum_; }
  double accumulated_sim() const { return sim_accum_; }

  // Packet status as seen by the fidelity layer (High when unmanaged).
  FidelityStatus packet_status(std::size_t packet_index) const;

  // Scene geometry summary used by the classifier features and policies.
  struct Frontier {
    bool any = false;
    double front_x = 0.0;       // max x over remaining packet AABBs
    double top_y = 0.0;         // top of the frontmost column
    double top_center_y = 0.0;  // center height of the frontmost top packet
    int floor_count = 0;        // packets resting near the floor in front
    double pile_depth = 0.0;    // front_x - min x over remaining packets
  };
  Frontier frontier() const;
  double nose_front_x() const;

  // --- snapshot/restore for planning and dataset generation ---
  SceneState save_state() const;
  void load_state(const SceneState& state);

  // --- FidelityBackend contract (shapes live in the world; plunger joints,
  // sensors and scripts are scene-level objects) ---
  ObjectFidelityState capture(const ObjectRef& ref) const override;
  void apply(const ObjectRef& ref, const ObjectFidelityState& state) override;

 private:
  struct PlungerJoint {
    JointMode mode = JointMode::Active;
    double setpoint = 0.0;
    double extension = 0.0;
  };
  struct PlungerSensor {
    SensorHandling handling = SensorHandling::Automatic;
    bool fired = false;
  };
  struct PlungerScript {
    bool enabled = true;
  };
  struct Carry {
    std::uint64_t attachment = 0;
    BodyId packet = 0;
    Vec2 target;  // current waypoint in world coordinates
    int phase = 0;  // 0 rise, 1 translate, 2 done
  };

  void build_world();
  void settle_initial_pile();
  void install_fidelity();
  void apply_robot_kinematics();
  void update_carries();
  void poll_sensors();
  void check_unloads();
  void validate_boundary();
  std::vector<PacketView> packet_views() const;
  void note_action_boundary();
  std::uint64_t steps_for(double sim_seconds) const;
  void run_for(double sim_seconds);
  double move_arm_towards(const Vec2& target);  // returns remaining distance
  int do_pick(double height);
  int do_sweep(double depth);
  Vec2 arm_home() const;

  ScenarioSpec spec_;
  RobotSpec robot_;
  FidelitySettings fidelity_;
  World world_;

  BodyId floor_ = 0;
  BodyId back_wall_ = 0;
  BodyId conveyor_ = 0;
  BodyId base_ = 0;
  BodyId nose_ = 0;
  BodyId arm_ = 0;
  std::vector<BodyId> plunger_links_;
  std::vector<PlungerJoint> plunger_joints_;
  std::vector<PlungerSensor> plunger_sensors_;
  std::vector<PlungerScript> plunger_scripts_;
  std::vector<PacketInfo> packets_;

  std::unique_ptr<FidelityManager> manager_;
  PacketSignalerHub hub_;
  PlungerSignaler plunger_signaler_;

  double unload_plane_x_ = 0.0;
  double drop_x_ = 0.0;
  double drop_y_ = 0.0;

  // Kinematic program state.
  double base_x_ = 0.0;
  double nose_y_raised_ = 0.0;
  double nose_y_ = 0.0;
  Vec2 arm_pos_;
  bool engage_active_ = false;
  bool scoop_active_ = false;
  bool pick_done_ = false;
  double deadline_sim_ = 0.0;  // absolute limit on sim_accum_; +inf when unset
  std::vector<std::uint64_t> pick_attachments_;
  std::vector<Carry> carries_;
  std::uint64_t step_index_ = 0;
  int unloaded_count_ = 0;
  int parked_ = 0;

  // Previous robot poses for kinematic velocity computation.
  std::vector<std::pair<BodyId, Vec2>> prev_pose_;
  std::vector<double> prev_angle_;

  // Metrics accumulation.
  double wall_accum_ = 0.0;
  double sim_accum_ = 0.0;
  double window_wall_ = 0.0;
  double window_sim_ = 0.0;
  std::vector<RtfSample> rtf_trace_;
  double rtf_sum_plunger_high_ = 0.0;
  std::uint64_t rtf_n_plunger_high_ = 0;
  double rtf_sum_all_low_ = 0.0;
  std::uint64_t rtf_n_all_low_ = 0;

  // Auditing.
  std::vector<TransitionLogEntry> transition_log_;
  std::vector<int> settled_outside_streak_;
  bool boundary_check_ = false;
  std::uint64_t boundary_violations_ = 0;
};

std::unique_ptr<Scene> generate_scenario(const ScenarioSpec& spec,
                                         const RobotSpec& robot = {},
                                         const WorldConfig& world_config = {},
                                         const FidelitySettings& fidelity = {});

// Built-in unloading policy: approach, pick stacked packets, sweep the floor.
Policy greedy_policy();

}  // namespace adfi
