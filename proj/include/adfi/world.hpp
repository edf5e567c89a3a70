#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adfi/math.hpp"

namespace adfi {

using BodyId = std::uint64_t;

struct WorldConfig {
  double gravity = 9.81;  // magnitude, acts along -y
  double dt = 0.01;
  int solver_iterations = 8;
  double penetration_slop = 0.005;
  double baumgarte_beta = 0.2;
  std::uint64_t seed = 0;
};

struct RigidBody {
  BodyId id = 0;
  Vec2 position;
  double angle = 0.0;
  Vec2 velocity;
  double omega = 0.0;
  Vec2 half_extents{0.5, 0.5};
  double mass = 1.0;
  double inertia = 1.0;
  double friction = 0.5;
  double restitution = 0.0;
  bool dynamic = true;
  bool respondable = true;
  // Tangential surface speed along the body's local +x axis, for conveyors.
  double surface_velocity = 0.0;
};

// Body description without an id; the world assigns one on insertion.
struct BodySpec {
  Vec2 position;
  double angle = 0.0;
  Vec2 velocity;
  double omega = 0.0;
  Vec2 half_extents{0.5, 0.5};
  double mass = 1.0;
  double inertia = 0.0;  // <= 0 means "derive from mass and extents"
  double friction = 0.5;
  double restitution = 0.0;
  bool dynamic = true;
  bool respondable = true;
  double surface_velocity = 0.0;
};

struct Contact {
  BodyId body_a = 0;
  BodyId body_b = 0;
  Vec2 points[2];
  double separations[2] = {0.0, 0.0};  // negative when penetrating
  std::uint32_t features[2] = {0, 0};  // clip-edge ids, stable across steps
  int point_count = 0;
  Vec2 normal;  // unit, from body_a to body_b
  double penetration = 0.0;  // max over points
};

// Accumulated contact impulses carried across steps (warm starting).
struct StoredImpulse {
  BodyId body_a = 0;
  BodyId body_b = 0;
  std::uint32_t feature = 0;
  double p_n = 0.0;
  double p_t = 0.0;
};

struct StepMetrics {
  double wall_time = 0.0;
  double sim_time_advanced = 0.0;
  int active_body_count = 0;
  int contact_count = 0;
};

// Rigid follow constraint: child tracks parent_pose * (local_offset, local_angle).
struct Attachment {
  std::uint64_t id = 0;
  BodyId parent = 0;
  BodyId child = 0;
  Vec2 local_offset;
  double local_angle = 0.0;
};

struct WorldState {
  double sim_time = 0.0;
  std::uint64_t next_body_id = 1;
  std::uint64_t next_attachment_id = 1;
  std::vector<RigidBody> bodies;
  std::vector<Attachment> attachments;
  std::vector<StoredImpulse> warm_impulses;
};

class World {
 public:
  explicit World(const WorldConfig& config);

  BodyId add_body(const BodySpec& spec);

  // Returns the previous (dynamic, respondable) pair. Velocity is preserved;
  // zeroing is the caller's policy.
  std::pair<bool, bool> set_body_flags(BodyId id, bool dynamic, bool respondable);

  const RigidBody& body(BodyId id) const;
  void set_pose(BodyId id, const Vec2& position, double angle);
  void set_velocity(BodyId id, const Vec2& velocity, double omega);
  void set_mass(BodyId id, double mass);
  void set_friction(BodyId id, double friction);

  std::uint64_t attach(BodyId parent, BodyId child, const Vec2& local_offset,
                       double local_angle);
  void set_attachment_offset(std::uint64_t attachment_id, const Vec2& local_offset,
                             double local_angle);
  void detach(std::uint64_t attachment_id);
  bool is_attached(BodyId child) const;

  StepMetrics step();

  std::vector<Contact> detect_contacts() const;
  std::vector<std::pair<BodyId, Containment>> query_aabb(const Aabb& box) const;
  Aabb body_aabb(BodyId id) const;

  WorldState snapshot() const;
  void restore(const WorldState& state);

  double sim_time() const { return sim_time_; }
  void reset_sim_time() { sim_time_ = 0.0; }
  const WorldConfig& config() const { return config_; }
  const std::vector<RigidBody>& bodies() const { return bodies_; }
  const std::vector<Attachment>& attachments() const { return attachments_; }

  // Instrumentation: number of set_body_flags calls since construction/reset.
  std::uint64_t flag_call_count() const { return flag_calls_; }
  void reset_flag_call_count() { flag_calls_ = 0; }

 private:
  RigidBody& body_mut(BodyId id);
  std::size_t index_of(BodyId id) const;
  void collect_contacts(std::vector<Contact>& out) const;

  WorldConfig config_;
  double sim_time_ = 0.0;
  std::uint64_t next_body_id_ = 1;
  std::uint64_t next_attachment_id_ = 1;
  std::vector<RigidBody> bodies_;
  std::vector<Attachment> attachments_;
  std::vector<std::size_t> index_by_id_;  // id -> index into bodies_
  std::vector<StoredImpulse> warm_impulses_;  // sorted by (body_a, body_b, feature)
  std::uint64_t flag_calls_ = 0;
};

// Serializes the dynamic trajectory state (sim time, poses, velocities) to a
// byte-exact string. Used for determinism and replay-equivalence checks.
std::string trajectory_fingerprint(const World& world);

}  // namespace adfi
