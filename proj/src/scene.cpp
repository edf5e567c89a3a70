#include "adfi/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "adfi/errors.hpp"

namespace adfi {

namespace {

constexpr double kArmSpeed = 0.8;      // m/s
constexpr double kPlungerSpeed = 0.6;  // m/s
constexpr double kCarrySpeed = 1.0;    // m/s
constexpr double kNoseSpeed = 0.3;     // m/s
constexpr double kCarryHeight = 1.45;  // m, clears the robot base
constexpr double kSenseRange = 0.06;   // m, plunger proximity reach
constexpr std::uint64_t kPlungerTreeBase = 1u << 20;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::string to_string(const Action& action) {
  switch (action.kind) {
    case Action::Kind::MoveBase: return "MoveBase(" + std::to_string(action.value) + ")";
    case Action::Kind::Pick: return "Pick(" + std::to_string(action.value) + ")";
    case Action::Kind::Sweep: return "Sweep(" + std::to_string(action.value) + ")";
    case Action::Kind::Retract: return "Retract";
  }
  return "?";
}

Scene::Scene(const ScenarioSpec& spec, const RobotSpec& robot,
             const WorldConfig& world_config, const FidelitySettings& fidelity)
    : spec_(spec),
      robot_(robot),
      fidelity_(fidelity),
      world_(world_config),
      hub_(fidelity.packet),
      deadline_sim_(std::numeric_limits<double>::infinity()) {
  if (spec_.packet_count < 0) throw ConfigError("scenario: packet_count must be >= 0");
  if (robot_.plunger_count < 1) throw ConfigError("robot: plunger_count must be >= 1");
  build_world();
  settle_initial_pile();
  install_fidelity();
  reset_metrics();
}

void Scene::build_world() {
  const double L = spec_.truck_length;

  BodySpec floor;
  floor.dynamic = false;
  floor.respondable = true;
  floor.half_extents = {(L + 8.0) / 2.0, 0.1};
  floor.position = {(L + 8.0) / 2.0 - 2.0, -0.1};
  floor.friction = 0.6;
  floor.mass = 1.0;
  floor_ = world_.add_body(floor);

  BodySpec wall;
  wall.dynamic = false;
  wall.respondable = true;
  wall.half_extents = {spec_.wall_thickness / 2.0, spec_.truck_height / 2.0};
  wall.position = {-spec_.wall_thickness / 2.0, spec_.truck_height / 2.0};
  wall.friction = 0.4;
  back_wall_ = world_.add_body(wall);

  // Warehouse conveyor behind the robot; its surface carries packets toward
  // +x and across the unload plane.
  unload_plane_x_ = L + 2.8;
  BodySpec conv;
  conv.dynamic = false;
  conv.respondable = true;
  conv.half_extents = {2.25, 0.05};
  conv.position = {L + 1.95, 0.20};
  conv.friction = robot_.conveyor_friction;
  conv.surface_velocity = robot_.conveyor_speed;
  conveyor_ = world_.add_body(conv);

  // Packet pile: stacked columns from the deep wall outward.
  std::mt19937_64 rng(spec_.seed);
  const double hx_max = spec_.packet_hx_mean * (1.0 + spec_.packet_size_spread);
  const double pitch = 2.0 * hx_max + 0.04;
  const int rows = std::max(1, spec_.rows);
  const int n_columns = (spec_.packet_count + rows - 1) / rows;

  int placed = 0;
  for (int c = 0; c < n_columns && placed < spec_.packet_count; ++c) {
    const double cx = 0.08 + hx_max + c * pitch;
    if (cx + hx_max + spec_.jitter > L - 0.5)
      throw LayoutError("packet columns do not fit inside the truck");
    double y_cursor = 0.0;
    for (int r = 0; r < rows && placed < spec_.packet_count; ++r) {
      const double hx =
          spec_.packet_hx_mean * (1.0 + spec_.packet_size_spread * (2.0 * uniform01(rng) - 1.0));
      const double hy =
          spec_.packet_hy_mean * (1.0 + spec_.packet_size_spread * (2.0 * uniform01(rng) - 1.0));
      BodySpec p;
      p.half_extents = {hx, hy};
      p.position = {cx + spec_.jitter * (2.0 * uniform01(rng) - 1.0), y_cursor + hy + 0.0005};
      p.mass = spec_.packet_mass_min +
               (spec_.packet_mass_max - spec_.packet_mass_min) * uniform01(rng);
      p.friction = spec_.packet_friction;
      p.restitution = 0.0;
      p.dynamic = true;
      p.respondable = true;
      y_cursor += 2.0 * hy + 0.001;
      if (y_cursor > spec_.truck_height)
        throw LayoutError("packet stack exceeds truck height");
      const BodyId id = world_.add_body(p);
      packets_.push_back({id, id, false});
      ++placed;
    }
  }

  // Robot bodies (kinematic).
  base_x_ = L + 1.2;
  BodySpec base;
  base.dynamic = false;
  base.respondable = true;
  base.half_extents = {robot_.base_half_width, robot_.base_half_height};
  base.position = {base_x_, robot_.base_half_height};
  base.friction = 0.3;
  base_ = world_.add_body(base);

  nose_y_raised_ = 0.18;
  nose_y_ = nose_y_raised_;
  BodySpec nose;
  nose.dynamic = false;
  nose.respondable = true;
  nose.half_extents = {robot_.nose_length / 2.0, 0.06};
  nose.position = {base_x_ - robot_.base_half_width - robot_.nose_length / 2.0, nose_y_};
  nose.friction = robot_.conveyor_friction;
  nose.surface_velocity = robot_.conveyor_speed;
  nose_ = world_.add_body(nose);

  arm_pos_ = arm_home();
  BodySpec arm;
  arm.dynamic = false;
  arm.respondable = true;
  arm.half_extents = {0.1, 0.25};
  arm.position = arm_pos_;
  arm.friction = 0.3;
  arm_ = world_.add_body(arm);

  const int n = robot_.plunger_count;
  for (int i = 0; i < n; ++i) {
    const double off = n == 1 ? 0.0 : -0.18 + 0.36 * i / (n - 1);
    BodySpec link;
    link.dynamic = false;
    link.respondable = true;
    link.half_extents = {0.05, 0.02};
    link.position = {arm_pos_.x, arm_pos_.y + off};
    link.friction = 0.6;
    plunger_links_.push_back(world_.add_body(link));
    plunger_joints_.push_back({});
    plunger_sensors_.push_back({});
    plunger_scripts_.push_back({});
  }

  drop_x_ = L + 2.1;
  drop_y_ = kCarryHeight;

  settled_outside_streak_.assign(packets_.size(), 0);

  prev_pose_.clear();
  prev_angle_.clear();
  const auto track = [this](BodyId id) {
    prev_pose_.emplace_back(id, world_.body(id).position);
    prev_angle_.push_back(world_.body(id).angle);
  };
  track(base_);
  track(nose_);
  track(arm_);
  for (BodyId id : plunger_links_) track(id);
}

Vec2 Scene::arm_home() const { return {base_x_, robot_.arm_lift_max * 0.8}; }

double Scene::nose_front_x() const {
  return base_x_ - robot_.base_half_width - robot_.nose_length;
}

void Scene::settle_initial_pile() {
  // Let the stacks come to rest: run until every packet has been quiet for 50
  // consecutive steps (piles can slump for a while before settling).
  int quiet = 0;
  for (int i = 0; i < 20000 && quiet < 100; ++i) {
    world_.step();
    bool all_quiet = true;
    for (const PacketInfo& p : packets_) {
      const RigidBody& b = world_.body(p.body);
      if (length(b.velocity) > 1e-3 || std::abs(b.omega) > 1e-3) {
        all_quiet = false;
        break;
      }
    }
    quiet = all_quiet ? quiet + 1 : 0;
  }
  // Verify the pile stays put; slow creep gets a few more settle rounds.
  double worst = 0.0;
  for (int attempt = 0; attempt < 5; ++attempt) {
    std::vector<Vec2> rest;
    rest.reserve(packets_.size());
    for (const PacketInfo& p : packets_) rest.push_back(world_.body(p.body).position);
    for (int i = 0; i < 100; ++i) world_.step();
    worst = 0.0;
    for (std::size_t i = 0; i < packets_.size(); ++i) {
      const Vec2 d = world_.body(packets_[i].body).position - rest[i];
      worst = std::max(worst, length(d));
    }
    if (worst <= 0.01) {
      world_.reset_sim_time();
      return;
    }
    for (int i = 0; i < 500; ++i) world_.step();
  }
  throw LayoutError("initial pile failed the settle check (packet moved " +
                    std::to_string(worst) + " m)");
}

void Scene::install_fidelity() {
  if (fidelity_.mode != FidelityMode::AdFi) return;
  manager_ = std::make_unique<FidelityManager>(*this);
  for (const PacketInfo& p : packets_) {
    Tree tree;
    tree.id = p.tree_id;
    tree.objects = {{ObjectType::Shape, p.body}};
    const std::uint64_t tid = p.tree_id;
    manager_->register_tree(tree, LevelSet::ThreeLevel, [this, tid](std::uint64_t) {
      return SignalResult::of(hub_.desired(tid));
    });
  }
  for (std::size_t i = 0; i < plunger_links_.size(); ++i) {
    Tree tree;
    tree.id = kPlungerTreeBase + i;
    tree.objects = {{ObjectType::Shape, plunger_links_[i]},
                    {ObjectType::Joint, i},
                    {ObjectType::Sensor, i},
                    {ObjectType::Script, i}};
    manager_->register_tree(tree, LevelSet::TwoLevel, [this](std::uint64_t step) {
      return SignalResult::of(plunger_signaler_.desired(step));
    });
  }
}

ObjectFidelityState Scene::capture(const ObjectRef& ref) const {
  ObjectFidelityState s;
  s.type = ref.type;
  switch (ref.type) {
    case ObjectType::Shape: {
      const RigidBody& b = world_.body(ref.id);
      s.dynamic = b.dynamic;
      s.respondable = b.respondable;
      s.vx = b.velocity.x;
      s.vy = b.velocity.y;
      s.omega = b.omega;
      break;
    }
    case ObjectType::Joint:
      s.mode = plunger_joints_.at(ref.id).mode;
      s.setpoint = plunger_joints_.at(ref.id).setpoint;
      break;
    case ObjectType::Sensor:
      s.handling = plunger_sensors_.at(ref.id).handling;
      break;
    case ObjectType::Script:
      s.enabled = plunger_scripts_.at(ref.id).enabled;
      break;
  }
  return s;
}

void Scene::apply(const ObjectRef& ref, const ObjectFidelityState& state) {
  switch (ref.type) {
    case ObjectType::Shape:
      world_.set_body_flags(ref.id, state.dynamic, state.respondable);
      world_.set_velocity(ref.id, {state.vx, state.vy}, state.omega);
      break;
    case ObjectType::Joint:
      plunger_joints_.at(ref.id).mode = state.mode;
      plunger_joints_.at(ref.id).setpoint = state.setpoint;
      break;
    case ObjectType::Sensor:
      plunger_sensors_.at(ref.id).handling = state.handling;
      break;
    case ObjectType::Script:
      plunger_scripts_.at(ref.id).enabled = state.enabled;
      break;
  }
}

Aabb Scene::robot_bounding_box(double inflation) const {
  if (inflation < 0.0) throw ParameterError("inflation must be >= 0");
  Aabb box = world_.body_aabb(base_);
  box.merge(world_.body_aabb(nose_));
  box.merge(world_.body_aabb(arm_));
  for (BodyId id : plunger_links_) box.merge(world_.body_aabb(id));
  // Packets currently held by the robot count as robot bodies.
  for (const Attachment& a : world_.attachments()) box.merge(world_.body_aabb(a.child));
  return box.inflated(inflation);
}

FidelityStatus Scene::packet_status(std::size_t packet_index) const {
  if (!manager_) return FidelityStatus::High;
  return manager_->status_of_tree(packets_[packet_index].tree_id);
}

std::vector<PacketView> Scene::packet_views() const {
  std::vector<PacketView> views;
  views.reserve(packets_.size());
  for (std::size_t i = 0; i < packets_.size(); ++i) {
    const PacketInfo& p = packets_[i];
    if (p.unloaded) continue;
    const RigidBody& b = world_.body(p.body);
    PacketView v;
    v.tree_id = p.tree_id;
    v.aabb = world_.body_aabb(p.body);
    v.linear_speed = length(b.velocity);
    v.angular_speed = b.omega;
    v.current = packet_status(i);
    views.push_back(v);
  }
  return views;
}

void Scene::apply_robot_kinematics() {
  // Plunger scripts drive their prismatic joints toward the setpoint.
  const double dt = world_.config().dt;
  for (std::size_t i = 0; i < plunger_joints_.size(); ++i) {
    PlungerJoint& j = plunger_joints_[i];
    if (!plunger_scripts_[i].enabled || j.mode != JointMode::Active) continue;
    const double delta = std::clamp(j.setpoint - j.extension, -kPlungerSpeed * dt,
                                    kPlungerSpeed * dt);
    j.extension += delta;
  }

  std::vector<Vec2> targets;
  targets.reserve(prev_pose_.size());
  targets.push_back({base_x_, robot_.base_half_height});
  targets.push_back({base_x_ - robot_.base_half_width - robot_.nose_length / 2.0, nose_y_});
  targets.push_back(arm_pos_);
  const int n = robot_.plunger_count;
  for (int i = 0; i < n; ++i) {
    const double off = n == 1 ? 0.0 : -0.18 + 0.36 * i / (n - 1);
    targets.push_back({arm_pos_.x - plunger_joints_[i].extension, arm_pos_.y + off});
  }

  for (std::size_t i = 0; i < prev_pose_.size(); ++i) {
    const BodyId id = prev_pose_[i].first;
    const Vec2 vel = (targets[i] - prev_pose_[i].second) * (1.0 / dt);
    world_.set_pose(id, targets[i], 0.0);
    world_.set_velocity(id, vel, 0.0);
    prev_pose_[i].second = targets[i];
  }
}

void Scene::update_carries() {
  const double dt = world_.config().dt;
  const Vec2 base_pos = world_.body(base_).position;
  for (std::size_t i = 0; i < carries_.size();) {
    Carry& c = carries_[i];
    bool done = false;
    if (c.phase == 0) {
      c.target.y += kCarrySpeed * dt;
      if (c.target.y >= kCarryHeight) {
        c.target.y = kCarryHeight;
        c.phase = 1;
      }
    } else {
      const double dx = drop_x_ - c.target.x;
      const double step = kCarrySpeed * dt;
      if (std::abs(dx) <= step) {
        c.target.x = drop_x_;
        done = true;
      } else {
        c.target.x += dx > 0 ? step : -step;
      }
    }
    if (done) {
      world_.detach(c.attachment);
      carries_.erase(carries_.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      world_.set_attachment_offset(c.attachment, c.target - base_pos, 0.0);
      ++i;
    }
  }
}

void Scene::poll_sensors() {
  // Plunger proximity sensors: fire during pick engagement when a packet face
  // is within range ahead of the extended plunger tip.
  if (engage_active_) {
    for (std::size_t i = 0; i < plunger_links_.size(); ++i) {
      PlungerSensor& sensor = plunger_sensors_[i];
      if (sensor.handling != SensorHandling::Automatic) continue;
      if (plunger_joints_[i].extension < 0.01) continue;
      const RigidBody& link = world_.body(plunger_links_[i]);
      const double tip = link.position.x - link.half_extents.x;
      const Aabb sense{{tip - kSenseRange, link.position.y - 0.025},
                       {tip + 0.01, link.position.y + 0.025}};
      sensor.fired = false;
      for (const PacketInfo& p : packets_) {
        if (p.unloaded || world_.is_attached(p.body)) continue;
        if (!sense.overlaps(world_.body_aabb(p.body))) continue;
        sensor.fired = true;
        const RigidBody& packet = world_.body(p.body);
        const RigidBody& arm = world_.body(arm_);
        pick_attachments_.push_back(
            world_.attach(arm_, p.body, packet.position - arm.position, packet.angle));
        break;
      }
    }
  }

  // Nose scoop: low packets overlapping the nose during a sweep drive get
  // attached and carried to the drop point over the warehouse conveyor.
  if (scoop_active_) {
    Aabb zone = world_.body_aabb(nose_).inflated(0.02);
    zone.min.y = 0.0;
    zone.max.y = 0.50;
    for (const PacketInfo& p : packets_) {
      if (p.unloaded || world_.is_attached(p.body)) continue;
      const Aabb pb = world_.body_aabb(p.body);
      if (!zone.overlaps(pb)) continue;
      const RigidBody& packet = world_.body(p.body);
      const RigidBody& base = world_.body(base_);
      const std::uint64_t att =
          world_.attach(base_, p.body, packet.position - base.position, packet.angle);
      carries_.push_back({att, p.body, packet.position, 0});
    }
  }
}

void Scene::check_unloads() {
  for (std::size_t i = 0; i < packets_.size(); ++i) {
    PacketInfo& p = packets_[i];
    if (p.unloaded) continue;
    if (world_.body_aabb(p.body).min.x <= unload_plane_x_) continue;

    for (std::size_t k = 0; k < pick_attachments_.size();) {
      bool hit = false;
      for (const Attachment& a : world_.attachments())
        if (a.id == pick_attachments_[k] && a.child == p.body) hit = true;
      if (hit) {
        world_.detach(pick_attachments_[k]);
        pick_attachments_.erase(pick_attachments_.begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        ++k;
      }
    }
    for (std::size_t k = 0; k < carries_.size();) {
      if (carries_[k].packet == p.body) {
        world_.detach(carries_[k].attachment);
        carries_.erase(carries_.begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        ++k;
      }
    }

    world_.set_body_flags(p.body, false, false);
    world_.set_velocity(p.body, {0.0, 0.0}, 0.0);
    world_.set_pose(p.body, {600.0 + 3.0 * parked_, -30.0}, 0.0);
    ++parked_;
    p.unloaded = true;
    ++unloaded_count_;
    if (manager_) manager_->deregister_tree(p.tree_id);
  }
}

void Scene::validate_boundary() {
  const double slop = world_.config().penetration_slop;
  std::vector<Aabb> dynamic_boxes;
  for (const RigidBody& b : world_.bodies())
    if (b.dynamic && b.respondable) dynamic_boxes.push_back(world_.body_aabb(b.id));
  for (std::size_t i = 0; i < packets_.size(); ++i) {
    if (packets_[i].unloaded) continue;
    if (packet_status(i) != FidelityStatus::Low) continue;
    const Aabb pb = world_.body_aabb(packets_[i].body);
    for (const Aabb& db : dynamic_boxes) {
      const double ox = std::min(pb.max.x, db.max.x) - std::max(pb.min.x, db.min.x);
      const double oy = std::min(pb.max.y, db.max.y) - std::max(pb.min.y, db.min.y);
      if (ox > slop && oy > slop && std::min(ox, oy) > slop) ++boundary_violations_;
    }
  }
}

void Scene::step_once() {
  ++step_index_;
  const double dt = world_.config().dt;

  if (manager_) {
    const std::vector<PacketView> views = packet_views();
    const Aabb box = robot_bounding_box(fidelity_.packet.inflation);

    // Independent settled-outside streak accounting (demotion audit).
    for (std::size_t i = 0, vi = 0; i < packets_.size(); ++i) {
      if (packets_[i].unloaded) continue;
      const PacketView& v = views[vi++];
      const bool cond = classify(v.aabb, box) == Containment::Outside &&
                        v.linear_speed <= fidelity_.packet.velocity_epsilon_linear &&
                        std::abs(v.angular_speed) <= fidelity_.packet.velocity_epsilon_angular;
      settled_outside_streak_[i] = cond ? settled_outside_streak_[i] + 1 : 0;
    }

    hub_.update(world_.sim_time(), box, views);
    const TickReport report = manager_->tick(step_index_);
    for (const Transition& t : report.transitions) {
      TransitionLogEntry e;
      e.step_index = t.step_index;
      e.tree_id = t.tree;
      e.from = t.from;
      e.to = t.to;
      if (t.from == FidelityStatus::High && t.to != FidelityStatus::High &&
          t.tree < kPlungerTreeBase) {
        for (std::size_t i = 0; i < packets_.size(); ++i)
          if (packets_[i].tree_id == t.tree) e.settled_outside_streak = settled_outside_streak_[i];
      }
      transition_log_.push_back(e);
    }
  }

  apply_robot_kinematics();
  update_carries();
  poll_sensors();

  const StepMetrics m = world_.step();
  wall_accum_ += m.wall_time;
  sim_accum_ += m.sim_time_advanced;
  window_wall_ += m.wall_time;
  window_sim_ += m.sim_time_advanced;
  if (window_sim_ >= 1.0) {
    rtf_trace_.push_back({sim_accum_, window_wall_ > 0 ? window_sim_ / window_wall_ : 0.0});
    window_sim_ = 0.0;
    window_wall_ = 0.0;
  }

  if (manager_ && m.wall_time > 0.0) {
    const double inst_rtf = dt / m.wall_time;
    bool plunger_high = false;
    for (std::size_t i = 0; i < plunger_links_.size(); ++i)
      if (manager_->status_of_tree(kPlungerTreeBase + i) == FidelityStatus::High)
        plunger_high = true;
    if (plunger_high) {
      rtf_sum_plunger_high_ += inst_rtf;
      ++rtf_n_plunger_high_;
    }
    bool all_low = false;
    int live = 0;
    int low = 0;
    for (std::size_t i = 0; i < packets_.size(); ++i) {
      if (packets_[i].unloaded) continue;
      ++live;
      if (packet_status(i) == FidelityStatus::Low) ++low;
    }
    all_low = live > 0 && low == live;
    if (all_low && !plunger_high) {
      rtf_sum_all_low_ += inst_rtf;
      ++rtf_n_all_low_;
    }
  }

  check_unloads();
  if (boundary_check_) validate_boundary();
}

void Scene::note_action_boundary() { hub_.note_action_boundary(); }

std::uint64_t Scene::steps_for(double sim_seconds) const {
  return static_cast<std::uint64_t>(std::llround(sim_seconds / world_.config().dt));
}

void Scene::run_for(double sim_seconds) {
  // Step-count based so replays from restored snapshots stay bitwise exact
  // regardless of the accumulated-sim-time float base.
  const std::uint64_t until = step_index_ + steps_for(sim_seconds);
  while (step_index_ < until && sim_accum_ < deadline_sim_) step_once();
}

double Scene::move_arm_towards(const Vec2& target) {
  const double dt = world_.config().dt;
  const Vec2 delta = target - arm_pos_;
  const double dist = length(delta);
  const double step = kArmSpeed * dt;
  if (dist <= step) {
    arm_pos_ = target;
  } else {
    arm_pos_ += delta * (step / dist);
  }
  step_once();
  return length(target - arm_pos_);
}

int Scene::do_pick(double height) {
  const double h = std::clamp(height, robot_.arm_lift_min, robot_.arm_lift_max);
  const double pick_x = base_x_ - robot_.base_half_width - 0.55;

  // Approach the pick pose.
  while (move_arm_towards({pick_x, h}) > 0.0 && sim_accum_ < deadline_sim_) {
  }

  // Extend the plungers; the command event drives the plunger signaler. Let
  // the promotion step run before touching the setpoints so the restored
  // joint state does not overwrite them.
  plunger_signaler_.push({PlungerCommandEvent::Kind::Extend, step_index_ + 1});
  engage_active_ = true;
  step_once();
  for (PlungerJoint& j : plunger_joints_) j.setpoint = robot_.plunger_stroke;
  const std::uint64_t extend_deadline = step_index_ + steps_for(3.0);
  while (step_index_ < extend_deadline && sim_accum_ < deadline_sim_) {
    bool all_extended = true;
    for (const PlungerJoint& j : plunger_joints_)
      if (j.extension < robot_.plunger_stroke - 1e-9) all_extended = false;
    if (all_extended) break;
    step_once();
  }
  run_for(0.2);
  engage_active_ = false;

  // Lift clear and transfer to the drop point over the conveyor.
  while (move_arm_towards({pick_x, std::max(h + 0.35, kCarryHeight)}) > 0.0 &&
         sim_accum_ < deadline_sim_) {
  }
  while (move_arm_towards({drop_x_, kCarryHeight}) > 0.0 && sim_accum_ < deadline_sim_) {
  }

  // Release.
  for (const std::uint64_t att : pick_attachments_) world_.detach(att);
  const int released = static_cast<int>(pick_attachments_.size());
  pick_attachments_.clear();

  // Retract while still in high fidelity, then signal the plungers down.
  for (PlungerJoint& j : plunger_joints_) j.setpoint = 0.0;
  const std::uint64_t retract_deadline = step_index_ + steps_for(3.0);
  while (step_index_ < retract_deadline && sim_accum_ < deadline_sim_) {
    bool all_retracted = true;
    for (const PlungerJoint& j : plunger_joints_)
      if (j.extension > 1e-9) all_retracted = false;
    if (all_retracted) break;
    step_once();
  }
  // Signal the plungers down only once fully retracted. A deadline-truncated
  // pick leaves them extended and High so the scripts keep driving them home,
  // matching an unmanaged run step for step.
  bool fully_retracted = true;
  for (const PlungerJoint& j : plunger_joints_)
    if (j.extension > 1e-9) fully_retracted = false;
  if (fully_retracted)
    plunger_signaler_.push({PlungerCommandEvent::Kind::Retract, step_index_ + 1});

  // Let the conveyor finish the transfer, then go home.
  run_for(3.0);
  while (move_arm_towards(arm_home()) > 0.0 && sim_accum_ < deadline_sim_) {
  }
  pick_done_ = true;
  return released;
}

int Scene::do_sweep(double depth) {
  if (!(depth > 0.0)) throw ActionError("sweep depth must be > 0");
  const double dt = world_.config().dt;

  // Lower the nose.
  while (nose_y_ > 0.07 && sim_accum_ < deadline_sim_) {
    nose_y_ = std::max(0.07, nose_y_ - kNoseSpeed * dt);
    step_once();
  }

  // Drive in, scooping floor packets.
  scoop_active_ = true;
  double remaining = depth;
  while (remaining > 0.0 && sim_accum_ < deadline_sim_) {
    const double step = std::min(remaining, robot_.drive_speed * dt);
    base_x_ -= step;
    arm_pos_.x -= step;
    remaining -= step;
    step_once();
  }
  scoop_active_ = false;

  // Back out.
  double back = depth;
  while (back > 0.0 && sim_accum_ < deadline_sim_) {
    const double step = std::min(back, robot_.drive_speed * dt);
    base_x_ += step;
    arm_pos_.x += step;
    back -= step;
    step_once();
  }

  // Raise the nose and let carries and conveyor transfers finish.
  while (nose_y_ < nose_y_raised_ && sim_accum_ < deadline_sim_) {
    nose_y_ = std::min(nose_y_raised_, nose_y_ + kNoseSpeed * dt);
    step_once();
  }
  const std::uint64_t carry_deadline = step_index_ + steps_for(10.0);
  while (!carries_.empty() && step_index_ < carry_deadline && sim_accum_ < deadline_sim_)
    step_once();
  run_for(2.0);
  return 0;
}

ActionOutcome Scene::execute_action(const Action& action) {
  const std::uint64_t step0 = step_index_;
  const int unloaded0 = unloaded_count_;
  note_action_boundary();

  switch (action.kind) {
    case Action::Kind::MoveBase: {
      const double dt = world_.config().dt;
      double remaining = std::abs(action.value);
      const double sign = action.value >= 0.0 ? 1.0 : -1.0;
      while (remaining > 0.0 && sim_accum_ < deadline_sim_) {
        const double step = std::min(remaining, robot_.drive_speed * dt);
        base_x_ += sign * step;
        arm_pos_.x += sign * step;
        remaining -= step;
        step_once();
      }
      break;
    }
    case Action::Kind::Pick:
      do_pick(action.value);
      break;
    case Action::Kind::Sweep:
      do_sweep(action.value);
      break;
    case Action::Kind::Retract: {
      if (!pick_done_) throw ActionError("Retract is only valid after a Pick");
      for (PlungerJoint& j : plunger_joints_) j.setpoint = 0.0;
      run_for(0.1);
      break;
    }
  }
  note_action_boundary();

  ActionOutcome outcome;
  outcome.duration = static_cast<double>(step_index_ - step0) * world_.config().dt;
  outcome.newly_unloaded = unloaded_count_ - unloaded0;
  return outcome;
}

int Scene::remaining_packets() const {
  int n = 0;
  for (const PacketInfo& p : packets_)
    if (!p.unloaded) ++n;
  return n;
}

Scene::Frontier Scene::frontier() const {
  Frontier f;
  double min_x = std::numeric_limits<double>::infinity();
  for (const PacketInfo& p : packets_) {
    if (p.unloaded) continue;
    const Aabb box = world_.body_aabb(p.body);
    if (!f.any || box.max.x > f.front_x) f.front_x = box.max.x;
    min_x = std::min(min_x, box.min.x);
    f.any = true;
  }
  if (!f.any) return f;
  f.pile_depth = f.front_x - min_x;
  for (const PacketInfo& p : packets_) {
    if (p.unloaded) continue;
    const Aabb box = world_.body_aabb(p.body);
    if (box.max.x >= f.front_x - 0.30) {
      if (box.max.y > f.top_y) {
        f.top_y = box.max.y;
        f.top_center_y = world_.body(p.body).position.y;
      }
    }
    if (box.min.y < 0.05 && box.max.x >= f.front_x - 1.0) ++f.floor_count;
  }
  return f;
}

EpisodeMetrics Scene::run_episode(const Policy& policy, double max_sim_time) {
  reset_metrics();
  const int unloaded0 = unloaded_count_;
  deadline_sim_ = sim_accum_ + max_sim_time;
  while (sim_accum_ < deadline_sim_) {
    const std::optional<Action> action = policy(*this);
    if (!action) break;
    execute_action(*action);
  }
  deadline_sim_ = std::numeric_limits<double>::infinity();

  EpisodeMetrics m;
  m.unloaded_count = unloaded_count_ - unloaded0;
  m.sim_time = sim_accum_;
  m.wall_time = wall_accum_;
  m.real_time_factor = wall_accum_ > 0.0 ? sim_accum_ / wall_accum_ : 0.0;
  m.unload_rate = sim_accum_ > 0.0 ? m.unloaded_count * 3600.0 / sim_accum_ : 0.0;
  m.rtf_trace = rtf_trace_;
  m.mean_rtf_plunger_high =
      rtf_n_plunger_high_ > 0 ? rtf_sum_plunger_high_ / rtf_n_plunger_high_ : 0.0;
  m.mean_rtf_all_low = rtf_n_all_low_ > 0 ? rtf_sum_all_low_ / rtf_n_all_low_ : 0.0;
  m.steps_plunger_high = rtf_n_plunger_high_;
  m.steps_all_low = rtf_n_all_low_;
  if (manager_) m.transitions = manager_->transition_stats();
  return m;
}

void Scene::reset_metrics() {
  wall_accum_ = 0.0;
  sim_accum_ = 0.0;
  window_wall_ = 0.0;
  window_sim_ = 0.0;
  rtf_trace_.clear();
  rtf_sum_plunger_high_ = 0.0;
  rtf_n_plunger_high_ = 0;
  rtf_sum_all_low_ = 0.0;
  rtf_n_all_low_ = 0;
}

std::string Scene::trajectory_hash() const { return trajectory_fingerprint(world_); }

SceneState Scene::save_state() const {
  SceneState s;
  s.world = world_.snapshot();
  if (manager_) {
    s.has_manager = true;
    s.manager = manager_->save_state();
  }
  s.hub = hub_.state();
  s.plunger = plunger_signaler_.save_state();
  s.step_index = step_index_;
  s.unloaded_count = unloaded_count_;
  s.packet_unloaded.reserve(packets_.size());
  for (const PacketInfo& p : packets_) s.packet_unloaded.push_back(p.unloaded);
  s.pick_done = pick_done_;
  s.engage_active = engage_active_;
  s.base_x = base_x_;
  s.nose_y = nose_y_;
  s.arm_pos = arm_pos_;
  for (const PlungerJoint& j : plunger_joints_) {
    s.plunger_extension.push_back(j.extension);
    s.plunger_setpoint.push_back(j.setpoint);
    s.plunger_mode.push_back(j.mode);
  }
  for (const PlungerSensor& sensor : plunger_sensors_) {
    s.sensor_handling.push_back(sensor.handling);
    s.sensor_fired.push_back(sensor.fired);
  }
  for (const PlungerScript& script : plunger_scripts_) s.script_enabled.push_back(script.enabled);
  return s;
}

void Scene::load_state(const SceneState& s) {
  if (s.packet_unloaded.size() != packets_.size())
    throw RestoreError("scene load_state: packet count mismatch");
  world_.restore(s.world);
  if (manager_) {
    if (!s.has_manager) throw RestoreError("scene load_state: manager state missing");
    manager_->load_state(s.manager);
  }
  hub_.load_state(s.hub);
  plunger_signaler_.load_state(s.plunger);
  step_index_ = s.step_index;
  unloaded_count_ = s.unloaded_count;
  parked_ = 0;
  for (std::size_t i = 0; i < packets_.size(); ++i) {
    packets_[i].unloaded = s.packet_unloaded[i];
    if (packets_[i].unloaded) ++parked_;
  }
  pick_done_ = s.pick_done;
  engage_active_ = s.engage_active;
  scoop_active_ = false;
  base_x_ = s.base_x;
  nose_y_ = s.nose_y;
  arm_pos_ = s.arm_pos;
  if (s.plunger_mode.size() != plunger_joints_.size() ||
      s.sensor_handling.size() != plunger_sensors_.size() ||
      s.script_enabled.size() != plunger_scripts_.size())
    throw RestoreError("scene load_state: plunger state size mismatch");
  for (std::size_t i = 0; i < plunger_joints_.size(); ++i) {
    plunger_joints_[i].extension = s.plunger_extension[i];
    plunger_joints_[i].setpoint = s.plunger_setpoint[i];
    plunger_joints_[i].mode = s.plunger_mode[i];
  }
  for (std::size_t i = 0; i < plunger_sensors_.size(); ++i) {
    plunger_sensors_[i].handling = s.sensor_handling[i];
    plunger_sensors_[i].fired = s.sensor_fired[i];
  }
  for (std::size_t i = 0; i < plunger_scripts_.size(); ++i)
    plunger_scripts_[i].enabled = s.script_enabled[i];
  pick_attachments_.clear();
  carries_.clear();
  std::fill(settled_outside_streak_.begin(), settled_outside_streak_.end(), 0);
  for (auto& [id, pos] : prev_pose_) pos = world_.body(id).position;
}

std::unique_ptr<Scene> generate_scenario(const ScenarioSpec& spec, const RobotSpec& robot,
                                         const WorldConfig& world_config,
                                         const FidelitySettings& fidelity) {
  return std::make_unique<Scene>(spec, robot, world_config, fidelity);
}

Policy greedy_policy() {
  // A failed action can leave the scene unchanged, so remember the last
  // choice and rotate to a different one instead of looping on it.
  struct Memory {
    int last_kind = -1;  // 0 = move, 1 = pick, 2 = sweep
    int unloaded = -1;
    int fails = 0;
  };
  auto mem = std::make_shared<Memory>();
  return [mem](Scene& scene) -> std::optional<Action> {
    const Scene::Frontier f = scene.frontier();
    if (!f.any) return std::nullopt;
    const int unloaded = scene.count_unloaded();
    const bool progressed = mem->unloaded < 0 || unloaded > mem->unloaded;
    mem->fails = progressed ? 0 : mem->fails + 1;
    mem->unloaded = unloaded;

    const double gap = scene.nose_front_x() - f.front_x;
    int kind;
    if (gap > 0.30) kind = 0;
    else if (f.top_center_y > 0.45) kind = 1;
    else kind = 2;
    if (!progressed && kind == mem->last_kind && kind != 0)
      kind = mem->fails % 2 == 1 ? 3 - kind : 0;
    mem->last_kind = kind;
    switch (kind) {
      case 0: return Action::move_base(gap > 0.30 ? -(gap - 0.10) : -0.10);
      case 1: return Action::pick(f.top_center_y);
      default: return Action::sweep(std::max(0.3, gap + 0.2));
    }
  };
}

}  // namespace adfi
