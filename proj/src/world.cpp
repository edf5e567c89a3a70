#include "adfi/world.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>

#include "adfi/errors.hpp"

namespace adfi {

namespace {

// --- Oriented-box narrowphase (separating axes + reference-face clipping) ---

// Contact points are identified by the pair of box edges producing them, so
// accumulated impulses can be matched across steps.
enum Edge : std::uint8_t { kNoEdge = 0, kEdge1, kEdge2, kEdge3, kEdge4 };

union FeaturePair {
  struct {
    std::uint8_t in_edge1;
    std::uint8_t out_edge1;
    std::uint8_t in_edge2;
    std::uint8_t out_edge2;
  } e;
  std::uint32_t value;
};

void flip_feature(FeaturePair& fp) {
  std::swap(fp.e.in_edge1, fp.e.in_edge2);
  std::swap(fp.e.out_edge1, fp.e.out_edge2);
}

struct ClipVertex {
  Vec2 v;
  FeaturePair fp{{0, 0, 0, 0}};
};

int clip_segment_to_line(ClipVertex out[2], const ClipVertex in[2], const Vec2& normal,
                         double offset, std::uint8_t clip_edge) {
  int num_out = 0;
  const double d0 = dot(normal, in[0].v) - offset;
  const double d1 = dot(normal, in[1].v) - offset;
  if (d0 <= 0.0) out[num_out++] = in[0];
  if (d1 <= 0.0) out[num_out++] = in[1];
  if (d0 * d1 < 0.0) {
    const double t = d0 / (d0 - d1);
    out[num_out].v = in[0].v + t * (in[1].v - in[0].v);
    if (d0 > 0.0) {
      out[num_out].fp = in[0].fp;
      out[num_out].fp.e.in_edge1 = clip_edge;
      out[num_out].fp.e.in_edge2 = kNoEdge;
    } else {
      out[num_out].fp = in[1].fp;
      out[num_out].fp.e.out_edge1 = clip_edge;
      out[num_out].fp.e.out_edge2 = kNoEdge;
    }
    ++num_out;
  }
  return num_out;
}

void compute_incident_edge(ClipVertex c[2], const Vec2& h, const Vec2& pos,
                           const Mat22& rot, const Vec2& normal) {
  const Mat22 rot_t = rot.transpose();
  const Vec2 n = -(rot_t * normal);
  const Vec2 n_abs = abs(n);

  if (n_abs.x > n_abs.y) {
    if (n.x > 0.0) {
      c[0].v = {h.x, -h.y};
      c[0].fp.e.in_edge2 = kEdge3;
      c[0].fp.e.out_edge2 = kEdge4;
      c[1].v = {h.x, h.y};
      c[1].fp.e.in_edge2 = kEdge4;
      c[1].fp.e.out_edge2 = kEdge1;
    } else {
      c[0].v = {-h.x, h.y};
      c[0].fp.e.in_edge2 = kEdge1;
      c[0].fp.e.out_edge2 = kEdge2;
      c[1].v = {-h.x, -h.y};
      c[1].fp.e.in_edge2 = kEdge2;
      c[1].fp.e.out_edge2 = kEdge3;
    }
  } else {
    if (n.y > 0.0) {
      c[0].v = {h.x, h.y};
      c[0].fp.e.in_edge2 = kEdge4;
      c[0].fp.e.out_edge2 = kEdge1;
      c[1].v = {-h.x, h.y};
      c[1].fp.e.in_edge2 = kEdge1;
      c[1].fp.e.out_edge2 = kEdge2;
    } else {
      c[0].v = {-h.x, -h.y};
      c[0].fp.e.in_edge2 = kEdge2;
      c[0].fp.e.out_edge2 = kEdge3;
      c[1].v = {h.x, -h.y};
      c[1].fp.e.in_edge2 = kEdge3;
      c[1].fp.e.out_edge2 = kEdge4;
    }
  }
  c[0].v = pos + rot * c[0].v;
  c[1].v = pos + rot * c[1].v;
}

enum class Axis { FaceAX, FaceAY, FaceBX, FaceBY };

// Returns up to 2 contact points; normal points from A to B.
int collide_boxes(const RigidBody& a, const RigidBody& b, Contact& contact) {
  const Vec2 ha = a.half_extents;
  const Vec2 hb = b.half_extents;
  const Vec2 pos_a = a.position;
  const Vec2 pos_b = b.position;

  const Mat22 rot_a(a.angle);
  const Mat22 rot_b(b.angle);
  const Mat22 rot_at = rot_a.transpose();
  const Mat22 rot_bt = rot_b.transpose();

  const Vec2 dp = pos_b - pos_a;
  const Vec2 da = rot_at * dp;
  const Vec2 db = rot_bt * dp;

  const Mat22 c = rot_at * rot_b;
  const Mat22 abs_c = abs(c);
  const Mat22 abs_ct = abs_c.transpose();

  const Vec2 face_a = abs(da) - ha - abs_c * hb;
  if (face_a.x > 0.0 || face_a.y > 0.0) return 0;
  const Vec2 face_b = abs(db) - hb - abs_ct * ha;
  if (face_b.x > 0.0 || face_b.y > 0.0) return 0;

  Axis axis = Axis::FaceAX;
  double separation = face_a.x;
  Vec2 normal = da.x > 0.0 ? rot_a.col1 : -rot_a.col1;

  constexpr double kRelTol = 0.95;
  constexpr double kAbsTol = 0.01;

  if (face_a.y > kRelTol * separation + kAbsTol * ha.y) {
    axis = Axis::FaceAY;
    separation = face_a.y;
    normal = da.y > 0.0 ? rot_a.col2 : -rot_a.col2;
  }
  if (face_b.x > kRelTol * separation + kAbsTol * hb.x) {
    axis = Axis::FaceBX;
    separation = face_b.x;
    normal = db.x > 0.0 ? rot_b.col1 : -rot_b.col1;
  }
  if (face_b.y > kRelTol * separation + kAbsTol * hb.y) {
    axis = Axis::FaceBY;
    separation = face_b.y;
    normal = db.y > 0.0 ? rot_b.col2 : -rot_b.col2;
  }

  Vec2 front_normal;
  Vec2 side_normal;
  ClipVertex incident_edge[2];
  double front = 0.0;
  double neg_side = 0.0;
  double pos_side = 0.0;
  std::uint8_t neg_edge = kNoEdge;
  std::uint8_t pos_edge = kNoEdge;

  switch (axis) {
    case Axis::FaceAX: {
      front_normal = normal;
      front = dot(pos_a, front_normal) + ha.x;
      side_normal = rot_a.col2;
      const double side = dot(pos_a, side_normal);
      neg_side = -side + ha.y;
      pos_side = side + ha.y;
      neg_edge = kEdge3;
      pos_edge = kEdge1;
      compute_incident_edge(incident_edge, hb, pos_b, rot_b, front_normal);
      break;
    }
    case Axis::FaceAY: {
      front_normal = normal;
      front = dot(pos_a, front_normal) + ha.y;
      side_normal = rot_a.col1;
      const double side = dot(pos_a, side_normal);
      neg_side = -side + ha.x;
      pos_side = side + ha.x;
      neg_edge = kEdge2;
      pos_edge = kEdge4;
      compute_incident_edge(incident_edge, hb, pos_b, rot_b, front_normal);
      break;
    }
    case Axis::FaceBX: {
      front_normal = -normal;
      front = dot(pos_b, front_normal) + hb.x;
      side_normal = rot_b.col2;
      const double side = dot(pos_b, side_normal);
      neg_side = -side + hb.y;
      pos_side = side + hb.y;
      neg_edge = kEdge3;
      pos_edge = kEdge1;
      compute_incident_edge(incident_edge, ha, pos_a, rot_a, front_normal);
      break;
    }
    case Axis::FaceBY: {
      front_normal = -normal;
      front = dot(pos_b, front_normal) + hb.y;
      side_normal = rot_b.col1;
      const double side = dot(pos_b, side_normal);
      neg_side = -side + hb.x;
      pos_side = side + hb.x;
      neg_edge = kEdge2;
      pos_edge = kEdge4;
      compute_incident_edge(incident_edge, ha, pos_a, rot_a, front_normal);
      break;
    }
  }

  ClipVertex clip1[2];
  ClipVertex clip2[2];
  if (clip_segment_to_line(clip1, incident_edge, -side_normal, neg_side, neg_edge) < 2)
    return 0;
  if (clip_segment_to_line(clip2, clip1, side_normal, pos_side, pos_edge) < 2) return 0;

  contact.normal = normal;
  contact.point_count = 0;
  contact.penetration = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double sep = dot(front_normal, clip2[i].v) - front;
    if (sep <= 0.0) {
      contact.points[contact.point_count] = clip2[i].v - sep * front_normal;
      contact.separations[contact.point_count] = sep;
      FeaturePair fp = clip2[i].fp;
      if (axis == Axis::FaceBX || axis == Axis::FaceBY) flip_feature(fp);
      contact.features[contact.point_count] = fp.value;
      contact.penetration = std::max(contact.penetration, -sep);
      ++contact.point_count;
    }
  }
  return contact.point_count;
}

struct SolverPoint {
  Vec2 r_a;
  Vec2 r_b;
  double separation = 0.0;  // negative when penetrating
  double mass_normal = 0.0;
  double mass_tangent = 0.0;
  double bias = 0.0;
  double velocity_bias = 0.0;  // restitution
  double p_n = 0.0;
  double p_t = 0.0;
};

struct SolverContact {
  std::size_t ia = 0;
  std::size_t ib = 0;
  BodyId id_a = 0;
  BodyId id_b = 0;
  Vec2 normal;
  Vec2 tangent;
  double friction = 0.0;
  double surface_speed = 0.0;  // target relative tangential speed (conveyors)
  int point_count = 0;
  std::uint32_t features[2] = {0, 0};
  SolverPoint points[2];
};

constexpr double kRestitutionThreshold = 1.0;  // m/s

}  // namespace

World::World(const WorldConfig& config) : config_(config) {
  if (!(config.dt > 0.0)) throw ConfigError("world config: dt must be > 0");
  if (config.solver_iterations < 1)
    throw ConfigError("world config: solver_iterations must be >= 1");
  if (!(config.baumgarte_beta > 0.0) || config.baumgarte_beta > 1.0)
    throw ConfigError("world config: baumgarte_beta must be in (0, 1]");
  if (config.penetration_slop < 0.0)
    throw ConfigError("world config: penetration_slop must be >= 0");
}

BodyId World::add_body(const BodySpec& spec) {
  if (!(spec.half_extents.x > 0.0) || !(spec.half_extents.y > 0.0))
    throw InvalidBodyError("body: half extents must be > 0");
  if (spec.dynamic && !(spec.mass > 0.0))
    throw InvalidBodyError("body: dynamic body requires mass > 0");

  RigidBody body;
  body.id = next_body_id_++;
  body.position = spec.position;
  body.angle = spec.angle;
  body.velocity = spec.velocity;
  body.omega = spec.omega;
  body.half_extents = spec.half_extents;
  body.mass = spec.mass;
  body.inertia = spec.inertia > 0.0
                     ? spec.inertia
                     : spec.mass *
                           (spec.half_extents.x * spec.half_extents.x +
                            spec.half_extents.y * spec.half_extents.y) /
                           3.0;
  if (spec.dynamic && !(body.inertia > 0.0))
    throw InvalidBodyError("body: dynamic body requires inertia > 0");
  body.friction = spec.friction;
  body.restitution = spec.restitution;
  body.dynamic = spec.dynamic;
  body.respondable = spec.respondable;
  body.surface_velocity = spec.surface_velocity;
  index_by_id_.resize(static_cast<std::size_t>(body.id) + 1, SIZE_MAX);
  index_by_id_[static_cast<std::size_t>(body.id)] = bodies_.size();
  bodies_.push_back(body);
  return body.id;
}

std::size_t World::index_of(BodyId id) const {
  const auto key = static_cast<std::size_t>(id);
  if (key < index_by_id_.size() && index_by_id_[key] != SIZE_MAX)
    return index_by_id_[key];
  throw LookupError("unknown body id " + std::to_string(id));
}

RigidBody& World::body_mut(BodyId id) { return bodies_[index_of(id)]; }

const RigidBody& World::body(BodyId id) const { return bodies_[index_of(id)]; }

std::pair<bool, bool> World::set_body_flags(BodyId id, bool dynamic, bool respondable) {
  RigidBody& b = body_mut(id);
  const std::pair<bool, bool> prev{b.dynamic, b.respondable};
  b.dynamic = dynamic;
  b.respondable = respondable;
  ++flag_calls_;
  return prev;
}

void World::set_pose(BodyId id, const Vec2& position, double angle) {
  RigidBody& b = body_mut(id);
  b.position = position;
  b.angle = angle;
}

void World::set_velocity(BodyId id, const Vec2& velocity, double omega) {
  RigidBody& b = body_mut(id);
  b.velocity = velocity;
  b.omega = omega;
}

void World::set_mass(BodyId id, double mass) {
  if (!(mass > 0.0)) throw InvalidBodyError("mass must be > 0");
  RigidBody& b = body_mut(id);
  b.inertia *= mass / b.mass;
  b.mass = mass;
}

void World::set_friction(BodyId id, double friction) {
  if (friction < 0.0) throw InvalidBodyError("friction must be >= 0");
  body_mut(id).friction = friction;
}

std::uint64_t World::attach(BodyId parent, BodyId child, const Vec2& local_offset,
                            double local_angle) {
  index_of(parent);
  if (is_attached(child)) throw ActionError("body already attached");
  Attachment a;
  a.id = next_attachment_id_++;
  a.parent = parent;
  a.child = child;
  a.local_offset = local_offset;
  a.local_angle = local_angle;
  index_of(child);
  attachments_.push_back(a);
  return a.id;
}

void World::set_attachment_offset(std::uint64_t attachment_id, const Vec2& local_offset,
                                  double local_angle) {
  for (Attachment& a : attachments_) {
    if (a.id == attachment_id) {
      a.local_offset = local_offset;
      a.local_angle = local_angle;
      return;
    }
  }
  throw LookupError("unknown attachment id");
}

void World::detach(std::uint64_t attachment_id) {
  for (std::size_t i = 0; i < attachments_.size(); ++i) {
    if (attachments_[i].id == attachment_id) {
      attachments_.erase(attachments_.begin() + static_cast<std::ptrdiff_t>(i));
      return;
    }
  }
  throw LookupError("unknown attachment id");
}

bool World::is_attached(BodyId child) const {
  for (const Attachment& a : attachments_)
    if (a.child == child) return true;
  return false;
}

Aabb World::body_aabb(BodyId id) const {
  const RigidBody& b = body(id);
  const Mat22 rot(b.angle);
  const Vec2 ext = abs(rot) * b.half_extents;
  return {b.position - ext, b.position + ext};
}

std::vector<std::pair<BodyId, Containment>> World::query_aabb(const Aabb& box) const {
  if (!box.well_formed()) throw QueryError("query box: min must be <= max per axis");
  std::vector<std::pair<BodyId, Containment>> out;
  out.reserve(bodies_.size());
  for (const RigidBody& b : bodies_) {
    const Mat22 rot(b.angle);
    const Vec2 ext = abs(rot) * b.half_extents;
    const Aabb ab{b.position - ext, b.position + ext};
    out.emplace_back(b.id, classify(ab, box));
  }
  return out;
}

void World::collect_contacts(std::vector<Contact>& out) const {
  // Sweep-and-prune over x for respondable bodies; a pair needs at least one
  // dynamic member.
  struct Entry {
    std::size_t index;
    Aabb box;
  };
  std::vector<Entry> entries;
  entries.reserve(bodies_.size());
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    const RigidBody& b = bodies_[i];
    if (!b.respondable) continue;
    const Mat22 rot(b.angle);
    const Vec2 ext = abs(rot) * b.half_extents;
    entries.push_back({i, {b.position - ext, b.position + ext}});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.box.min.x != b.box.min.x) return a.box.min.x < b.box.min.x;
    return a.index < b.index;
  });

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (std::size_t j = i + 1; j < entries.size(); ++j) {
      if (entries[j].box.min.x > entries[i].box.max.x) break;
      if (entries[i].box.min.y > entries[j].box.max.y ||
          entries[j].box.min.y > entries[i].box.max.y)
        continue;
      const RigidBody& a = bodies_[entries[i].index];
      const RigidBody& b = bodies_[entries[j].index];
      if (!a.dynamic && !b.dynamic) continue;
      pairs.emplace_back(std::min(entries[i].index, entries[j].index),
                         std::max(entries[i].index, entries[j].index));
    }
  }
  std::sort(pairs.begin(), pairs.end());

  for (const auto& [ia, ib] : pairs) {
    Contact contact;
    if (collide_boxes(bodies_[ia], bodies_[ib], contact) > 0) {
      contact.body_a = bodies_[ia].id;
      contact.body_b = bodies_[ib].id;
      out.push_back(contact);
    }
  }
}

std::vector<Contact> World::detect_contacts() const {
  std::vector<Contact> out;
  collect_contacts(out);
  return out;
}

StepMetrics World::step() {
  const auto t0 = std::chrono::steady_clock::now();
  const double dt = config_.dt;
  const double inv_dt = 1.0 / dt;

  // Attached children follow their parent kinematically this step: their
  // velocity is set so that integration lands them on the target pose, and
  // they are treated as infinite-mass by the solver.
  std::vector<bool> attached(bodies_.size(), false);
  for (const Attachment& a : attachments_) {
    const std::size_t ic = index_of(a.child);
    const RigidBody& parent = body(a.parent);
    RigidBody& child = bodies_[ic];
    const Mat22 rot(parent.angle);
    const Vec2 target_pos = parent.position + rot * a.local_offset;
    const double target_angle = parent.angle + a.local_angle;
    child.velocity = (target_pos - child.position) * inv_dt;
    child.omega = (target_angle - child.angle) * inv_dt;
    attached[ic] = true;
  }

  // Gravity (semi-implicit: velocities first).
  int active = 0;
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    RigidBody& b = bodies_[i];
    if (!b.dynamic) continue;
    ++active;
    if (attached[i]) continue;
    b.velocity.y -= config_.gravity * dt;
  }

  // Contacts.
  std::vector<Contact> contacts;
  collect_contacts(contacts);

  std::vector<SolverContact> sc;
  sc.reserve(contacts.size());
  for (const Contact& c : contacts) {
    const std::size_t ia = index_of(c.body_a);
    const std::size_t ib = index_of(c.body_b);
    const RigidBody& a = bodies_[ia];
    const RigidBody& b = bodies_[ib];

    SolverContact s;
    s.ia = ia;
    s.ib = ib;
    s.id_a = c.body_a;
    s.id_b = c.body_b;
    s.normal = c.normal;
    s.tangent = cross(c.normal, 1.0);
    s.friction = std::min(a.friction, b.friction);
    const double restitution = std::max(a.restitution, b.restitution);

    const double inv_mass_a = (a.dynamic && !attached[ia]) ? 1.0 / a.mass : 0.0;
    const double inv_i_a = (a.dynamic && !attached[ia]) ? 1.0 / a.inertia : 0.0;
    const double inv_mass_b = (b.dynamic && !attached[ib]) ? 1.0 / b.mass : 0.0;
    const double inv_i_b = (b.dynamic && !attached[ib]) ? 1.0 / b.inertia : 0.0;

    // Conveyor surfaces: the belt material moves at surface_velocity along the
    // body's local +x axis; friction drives the relative tangential velocity
    // toward that of the belt surface.
    // Friction drives the relative contact velocity toward the difference of
    // the two surface-material velocities.
    const Vec2 belt_a = Mat22(a.angle).col1 * a.surface_velocity;
    const Vec2 belt_b = Mat22(b.angle).col1 * b.surface_velocity;
    s.surface_speed = dot(belt_a - belt_b, s.tangent);

    s.point_count = c.point_count;
    for (int k = 0; k < c.point_count; ++k) {
      SolverPoint& p = s.points[k];
      s.features[k] = c.features[k];
      p.r_a = c.points[k] - a.position;
      p.r_b = c.points[k] - b.position;

      const double rn_a = cross(p.r_a, s.normal);
      const double rn_b = cross(p.r_b, s.normal);
      double kn = inv_mass_a + inv_mass_b + inv_i_a * rn_a * rn_a + inv_i_b * rn_b * rn_b;
      p.mass_normal = kn > 0.0 ? 1.0 / kn : 0.0;

      const double rt_a = cross(p.r_a, s.tangent);
      const double rt_b = cross(p.r_b, s.tangent);
      double kt = inv_mass_a + inv_mass_b + inv_i_a * rt_a * rt_a + inv_i_b * rt_b * rt_b;
      p.mass_tangent = kt > 0.0 ? 1.0 / kt : 0.0;

      p.separation = c.separations[k];
      p.bias = config_.baumgarte_beta * inv_dt *
               std::max(0.0, -p.separation - config_.penetration_slop);

      const Vec2 dv = b.velocity + cross(b.omega, p.r_b) - a.velocity - cross(a.omega, p.r_a);
      const double vn = dot(dv, s.normal);
      p.velocity_bias = (restitution > 0.0 && vn < -kRestitutionThreshold)
                            ? -restitution * vn
                            : 0.0;
    }
    sc.push_back(s);
  }

  // Warm starting: reapply last step's accumulated impulses for contact points
  // that persist (matched by body pair + clip feature).
  {
    std::size_t cursor = 0;
    for (SolverContact& s : sc) {
      RigidBody& a = bodies_[s.ia];
      RigidBody& b = bodies_[s.ib];
      const double inv_mass_a = (a.dynamic && !attached[s.ia]) ? 1.0 / a.mass : 0.0;
      const double inv_i_a = (a.dynamic && !attached[s.ia]) ? 1.0 / a.inertia : 0.0;
      const double inv_mass_b = (b.dynamic && !attached[s.ib]) ? 1.0 / b.mass : 0.0;
      const double inv_i_b = (b.dynamic && !attached[s.ib]) ? 1.0 / b.inertia : 0.0;
      while (cursor < warm_impulses_.size() &&
             std::tie(warm_impulses_[cursor].body_a, warm_impulses_[cursor].body_b) <
                 std::tie(s.id_a, s.id_b))
        ++cursor;
      for (int k = 0; k < s.point_count; ++k) {
        for (std::size_t w = cursor; w < warm_impulses_.size(); ++w) {
          const StoredImpulse& si = warm_impulses_[w];
          if (si.body_a != s.id_a || si.body_b != s.id_b) break;
          if (si.feature != s.features[k]) continue;
          SolverPoint& p = s.points[k];
          p.p_n = si.p_n;
          p.p_t = si.p_t;
          const Vec2 impulse = p.p_n * s.normal + p.p_t * s.tangent;
          a.velocity -= inv_mass_a * impulse;
          a.omega -= inv_i_a * cross(p.r_a, impulse);
          b.velocity += inv_mass_b * impulse;
          b.omega += inv_i_b * cross(p.r_b, impulse);
          break;
        }
      }
    }
  }

  // Sequential impulses with accumulated clamping.
  for (int iter = 0; iter < config_.solver_iterations; ++iter) {
    for (SolverContact& s : sc) {
      RigidBody& a = bodies_[s.ia];
      RigidBody& b = bodies_[s.ib];
      const double inv_mass_a = (a.dynamic && !attached[s.ia]) ? 1.0 / a.mass : 0.0;
      const double inv_i_a = (a.dynamic && !attached[s.ia]) ? 1.0 / a.inertia : 0.0;
      const double inv_mass_b = (b.dynamic && !attached[s.ib]) ? 1.0 / b.mass : 0.0;
      const double inv_i_b = (b.dynamic && !attached[s.ib]) ? 1.0 / b.inertia : 0.0;

      for (int k = 0; k < s.point_count; ++k) {
        SolverPoint& p = s.points[k];

        Vec2 dv = b.velocity + cross(b.omega, p.r_b) - a.velocity - cross(a.omega, p.r_a);
        const double vn = dot(dv, s.normal);
        double d_pn = p.mass_normal * (-vn + p.bias + p.velocity_bias);
        const double pn0 = p.p_n;
        p.p_n = std::max(pn0 + d_pn, 0.0);
        d_pn = p.p_n - pn0;

        const Vec2 impulse_n = d_pn * s.normal;
        a.velocity -= inv_mass_a * impulse_n;
        a.omega -= inv_i_a * cross(p.r_a, impulse_n);
        b.velocity += inv_mass_b * impulse_n;
        b.omega += inv_i_b * cross(p.r_b, impulse_n);

        dv = b.velocity + cross(b.omega, p.r_b) - a.velocity - cross(a.omega, p.r_a);
        const double vt = dot(dv, s.tangent) - s.surface_speed;
        double d_pt = p.mass_tangent * (-vt);
        const double max_pt = s.friction * p.p_n;
        const double pt0 = p.p_t;
        p.p_t = std::clamp(pt0 + d_pt, -max_pt, max_pt);
        d_pt = p.p_t - pt0;

        const Vec2 impulse_t = d_pt * s.tangent;
        a.velocity -= inv_mass_a * impulse_t;
        a.omega -= inv_i_a * cross(p.r_a, impulse_t);
        b.velocity += inv_mass_b * impulse_t;
        b.omega += inv_i_b * cross(p.r_b, impulse_t);
      }
    }
  }

  // Integrate positions (dynamic bodies only).
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    RigidBody& b = bodies_[i];
    if (!b.dynamic) continue;
    b.position += b.velocity * dt;
    b.angle += b.omega * dt;
    if (!std::isfinite(b.position.x) || !std::isfinite(b.position.y) ||
        !std::isfinite(b.angle) || !std::isfinite(b.velocity.x) ||
        !std::isfinite(b.velocity.y) || !std::isfinite(b.omega)) {
      throw SimulationDiverged("non-finite state in body " + std::to_string(b.id));
    }
  }

  // Persist accumulated impulses for next step's warm start; sc is already in
  // sorted (body_a, body_b) order from the broadphase. Pairs skipped this step
  // because both bodies are non-dynamic keep their stored impulses while the
  // bodies stay in contact range, so reactivating a resting stack does not
  // restart it on cold contacts.
  std::vector<StoredImpulse> fresh;
  for (const SolverContact& s : sc)
    for (int k = 0; k < s.point_count; ++k)
      fresh.push_back({s.id_a, s.id_b, s.features[k], s.points[k].p_n, s.points[k].p_t});
  const auto keep_frozen = [this](const StoredImpulse& si) {
    const auto key_a = static_cast<std::size_t>(si.body_a);
    const auto key_b = static_cast<std::size_t>(si.body_b);
    if (key_a >= index_by_id_.size() || index_by_id_[key_a] == SIZE_MAX) return false;
    if (key_b >= index_by_id_.size() || index_by_id_[key_b] == SIZE_MAX) return false;
    const RigidBody& a = bodies_[index_by_id_[key_a]];
    const RigidBody& b = bodies_[index_by_id_[key_b]];
    if (a.dynamic || b.dynamic) return false;  // an active pair is re-solved or separated
    return body_aabb(a.id).inflated(config_.penetration_slop).overlaps(body_aabb(b.id));
  };
  std::vector<StoredImpulse> merged;
  merged.reserve(fresh.size() + warm_impulses_.size());
  std::size_t fi = 0;
  std::size_t oi = 0;
  const auto pair_of = [](const StoredImpulse& s) { return std::make_pair(s.body_a, s.body_b); };
  while (fi < fresh.size() || oi < warm_impulses_.size()) {
    if (fi < fresh.size() &&
        (oi >= warm_impulses_.size() || pair_of(fresh[fi]) <= pair_of(warm_impulses_[oi]))) {
      // A freshly solved pair supersedes any stored entries for the same pair.
      const auto p = pair_of(fresh[fi]);
      while (fi < fresh.size() && pair_of(fresh[fi]) == p) merged.push_back(fresh[fi++]);
      while (oi < warm_impulses_.size() && pair_of(warm_impulses_[oi]) == p) ++oi;
    } else {
      const auto p = pair_of(warm_impulses_[oi]);
      while (oi < warm_impulses_.size() && pair_of(warm_impulses_[oi]) == p) {
        if (keep_frozen(warm_impulses_[oi])) merged.push_back(warm_impulses_[oi]);
        ++oi;
      }
    }
  }
  warm_impulses_ = std::move(merged);

  sim_time_ += dt;

  StepMetrics metrics;
  metrics.sim_time_advanced = dt;
  metrics.active_body_count = active;
  metrics.contact_count = static_cast<int>(contacts.size());
  metrics.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return metrics;
}

WorldState World::snapshot() const {
  WorldState state;
  state.sim_time = sim_time_;
  state.next_body_id = next_body_id_;
  state.next_attachment_id = next_attachment_id_;
  state.bodies = bodies_;
  state.attachments = attachments_;
  state.warm_impulses = warm_impulses_;
  return state;
}

void World::restore(const WorldState& state) {
  if (state.bodies.size() != bodies_.size())
    throw RestoreError("restore: body count mismatch");
  for (std::size_t i = 0; i < bodies_.size(); ++i) {
    if (state.bodies[i].id != bodies_[i].id)
      throw RestoreError("restore: body id mismatch");
  }
  sim_time_ = state.sim_time;
  next_body_id_ = state.next_body_id;
  next_attachment_id_ = state.next_attachment_id;
  bodies_ = state.bodies;
  attachments_ = state.attachments;
  warm_impulses_ = state.warm_impulses;
}

std::string trajectory_fingerprint(const World& world) {
  std::string out;
  const auto append = [&out](double v) {
    char buf[sizeof(double)];
    std::memcpy(buf, &v, sizeof(double));
    out.append(buf, sizeof(double));
  };
  append(world.sim_time());
  for (const RigidBody& b : world.bodies()) {
    append(static_cast<double>(b.id));
    append(b.position.x);
    append(b.position.y);
    append(b.angle);
    append(b.velocity.x);
    append(b.velocity.y);
    append(b.omega);
  }
  return out;
}

}  // namespace adfi
