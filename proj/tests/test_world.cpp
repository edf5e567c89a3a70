#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adfi/errors.hpp"
#include "adfi/world.hpp"

using namespace adfi;

namespace {

BodyId add_floor(World& w, double half_width = 10.0) {
  BodySpec floor;
  floor.dynamic = false;
  floor.respondable = true;
  floor.half_extents = {half_width, 0.1};
  floor.position = {0.0, -0.1};
  floor.friction = 0.6;
  return w.add_body(floor);
}

BodySpec box_at(double x, double y, double hx = 0.15, double hy = 0.12,
                double mass = 2.0) {
  BodySpec s;
  s.half_extents = {hx, hy};
  s.position = {x, y};
  s.mass = mass;
  s.friction = 0.5;
  return s;
}

}  // namespace

TEST_CASE("config validation") {
  WorldConfig bad;
  bad.dt = 0.0;
  CHECK_THROWS_AS(World{bad}, ConfigError);
  bad = {};
  bad.solver_iterations = 0;
  CHECK_THROWS_AS(World{bad}, ConfigError);
  bad = {};
  bad.baumgarte_beta = 1.5;
  CHECK_THROWS_AS(World{bad}, ConfigError);
  bad = {};
  bad.penetration_slop = -1.0;
  CHECK_THROWS_AS(World{bad}, ConfigError);
}

TEST_CASE("body validation") {
  World w{WorldConfig{}};
  BodySpec s = box_at(0, 1);
  s.half_extents = {0.0, 0.1};
  CHECK_THROWS_AS(w.add_body(s), InvalidBodyError);
  s = box_at(0, 1);
  s.mass = 0.0;
  CHECK_THROWS_AS(w.add_body(s), InvalidBodyError);
  CHECK_THROWS_AS(w.body(42), LookupError);
}

TEST_CASE("free fall single step matches hand computation") {
  // Semi-implicit Euler: v' = v - g dt, y' = y + v' dt.
  WorldConfig cfg;
  World w{cfg};
  BodySpec s = box_at(0.0, 5.0);
  const BodyId id = w.add_body(s);
  w.step();
  const RigidBody& b = w.body(id);
  const double vy = -cfg.gravity * cfg.dt;
  CHECK(b.velocity.y == vy);                // exactly -0.0981
  CHECK(b.position.y == 5.0 + vy * cfg.dt); // exactly 5 - 0.000981
  CHECK(b.velocity.x == 0.0);
  CHECK(w.sim_time() == cfg.dt);
}

TEST_CASE("derived inertia of a box") {
  World w{WorldConfig{}};
  BodySpec s = box_at(0, 1, 0.3, 0.2, 6.0);
  const BodyId id = w.add_body(s);
  // Solid rectangle: I = m (w^2 + h^2) / 12 with full extents = m(hx^2+hy^2)/3.
  CHECK(w.body(id).inertia == doctest::Approx(6.0 * (0.09 + 0.04) / 3.0));
}

TEST_CASE("dropped box comes to rest on the floor") {
  World w{WorldConfig{}};
  add_floor(w);
  const BodyId id = w.add_body(box_at(0.0, 1.0));
  for (int i = 0; i < 500; ++i) w.step();
  const RigidBody& b = w.body(id);
  CHECK(std::abs(b.velocity.x) < 1e-6);
  CHECK(std::abs(b.velocity.y) < 1e-6);
  CHECK(std::abs(b.omega) < 1e-6);
  // Resting height: floor top at 0, allow solver slop.
  CHECK(b.position.y == doctest::Approx(0.12).epsilon(0.05));
}

TEST_CASE("resting stack stays put") {
  WorldConfig cfg;
  World w{cfg};
  add_floor(w);
  std::vector<BodyId> ids;
  for (int i = 0; i < 5; ++i) ids.push_back(w.add_body(box_at(0.0, 0.1205 + 0.241 * i)));
  for (int i = 0; i < 300; ++i) w.step();  // settle
  std::vector<Vec2> rest;
  for (BodyId id : ids) rest.push_back(w.body(id).position);
  for (int i = 0; i < 1000; ++i) w.step();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Vec2 d = w.body(ids[i]).position - rest[i];
    CHECK(length(d) <= 2.0 * cfg.penetration_slop);
  }
}

TEST_CASE("conveyor reaches terminal speed equal to belt speed") {
  World w{WorldConfig{}};
  BodySpec belt;
  belt.dynamic = false;
  belt.respondable = true;
  belt.half_extents = {5.0, 0.05};
  belt.position = {0.0, 0.2};
  belt.friction = 0.8;
  belt.surface_velocity = 0.5;
  w.add_body(belt);
  const BodyId id = w.add_body(box_at(-3.0, 0.38));
  for (int i = 0; i < 400; ++i) w.step();
  CHECK(std::abs(w.body(id).velocity.x - 0.5) <= 0.01);
}

TEST_CASE("conveyor direction follows body orientation") {
  World w{WorldConfig{}};
  BodySpec belt;
  belt.dynamic = false;
  belt.respondable = true;
  belt.half_extents = {5.0, 0.05};
  belt.position = {0.0, 0.2};
  belt.friction = 0.8;
  belt.surface_velocity = -0.4;
  w.add_body(belt);
  const BodyId id = w.add_body(box_at(3.0, 0.38));
  for (int i = 0; i < 400; ++i) w.step();
  CHECK(std::abs(w.body(id).velocity.x + 0.4) <= 0.01);
}

TEST_CASE("head-on collision of equal boxes conserves momentum") {
  WorldConfig cfg;
  cfg.gravity = 0.0;
  World w{cfg};
  BodySpec a = box_at(-1.0, 0.0);
  a.velocity = {1.0, 0.0};
  BodySpec b = box_at(1.0, 0.0);
  b.velocity = {-1.0, 0.0};
  const BodyId ia = w.add_body(a);
  const BodyId ib = w.add_body(b);
  for (int i = 0; i < 200; ++i) w.step();
  const double px = w.body(ia).velocity.x * 2.0 + w.body(ib).velocity.x * 2.0;
  CHECK(std::abs(px) < 1e-9);
}

TEST_CASE("restitution separates bodies above the threshold") {
  WorldConfig cfg;
  cfg.gravity = 0.0;
  World w{cfg};
  BodySpec a = box_at(-1.0, 0.0);
  a.velocity = {2.0, 0.0};
  a.restitution = 0.8;
  BodySpec b = box_at(1.0, 0.0, 0.15, 0.12, 2.0);
  b.velocity = {-2.0, 0.0};
  const BodyId ia = w.add_body(a);
  const BodyId ib = w.add_body(b);
  for (int i = 0; i < 300; ++i) w.step();
  // Equal masses, e = 0.8: expect roughly reversed velocities.
  CHECK(w.body(ia).velocity.x < -1.0);
  CHECK(w.body(ib).velocity.x > 1.0);
}

TEST_CASE("non-respondable bodies generate no contacts") {
  World w{WorldConfig{}};
  add_floor(w);
  BodySpec s = box_at(0.0, 1.0);
  s.respondable = false;
  const BodyId id = w.add_body(s);
  for (int i = 0; i < 200; ++i) w.step();
  CHECK(w.body(id).position.y < -0.5);  // fell through the floor
}

TEST_CASE("non-dynamic bodies do not integrate") {
  World w{WorldConfig{}};
  BodySpec s = box_at(0.0, 1.0);
  s.dynamic = false;
  const BodyId id = w.add_body(s);
  for (int i = 0; i < 100; ++i) w.step();
  CHECK(w.body(id).position.y == 1.0);
}

TEST_CASE("set_body_flags returns previous values and counts calls") {
  World w{WorldConfig{}};
  const BodyId id = w.add_body(box_at(0, 1));
  w.reset_flag_call_count();
  const auto prev = w.set_body_flags(id, false, false);
  CHECK(prev.first == true);
  CHECK(prev.second == true);
  CHECK(w.flag_call_count() == 1);
}

TEST_CASE("determinism: identical runs produce bitwise-identical trajectories") {
  auto run = [] {
    World w{WorldConfig{}};
    add_floor(w);
    for (int i = 0; i < 10; ++i) w.add_body(box_at(0.05 * i, 0.3 + 0.25 * i));
    for (int i = 0; i < 500; ++i) w.step();
    return trajectory_fingerprint(w);
  };
  CHECK(run() == run());
}

TEST_CASE("snapshot/restore replays bitwise-identically") {
  World w{WorldConfig{}};
  add_floor(w);
  for (int i = 0; i < 6; ++i) w.add_body(box_at(0.02 * i, 0.3 + 0.25 * i));
  for (int i = 0; i < 120; ++i) w.step();
  const WorldState snap = w.snapshot();
  for (int i = 0; i < 200; ++i) w.step();
  const std::string first = trajectory_fingerprint(w);
  w.restore(snap);
  for (int i = 0; i < 200; ++i) w.step();
  CHECK(trajectory_fingerprint(w) == first);
}

TEST_CASE("restore validates topology") {
  World a{WorldConfig{}};
  a.add_body(box_at(0, 1));
  const WorldState snap = a.snapshot();
  World b{WorldConfig{}};
  CHECK_THROWS_AS(b.restore(snap), RestoreError);
}

TEST_CASE("attachments follow the parent and push others") {
  World w{WorldConfig{}};
  add_floor(w);
  BodySpec parent = box_at(0.0, 2.0);
  parent.dynamic = false;
  const BodyId ip = w.add_body(parent);
  const BodyId ic = w.add_body(box_at(0.5, 2.0));
  const std::uint64_t att = w.attach(ip, ic, {0.5, 0.0}, 0.0);
  CHECK(w.is_attached(ic));
  // Move the parent; the child must land exactly on the target pose.
  w.set_pose(ip, {1.0, 2.0}, 0.0);
  w.step();
  CHECK(w.body(ic).position.x == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(w.body(ic).position.y == doctest::Approx(2.0).epsilon(1e-12));
  // Attached children are unaffected by gravity while attached.
  w.step();
  CHECK(w.body(ic).position.y == doctest::Approx(2.0).epsilon(1e-12));
  w.detach(att);
  CHECK(!w.is_attached(ic));
  CHECK_THROWS_AS(w.detach(att), LookupError);
  CHECK_THROWS_AS(w.attach(ip, 999, {0, 0}, 0.0), LookupError);
}

TEST_CASE("query_aabb classifies containment") {
  World w{WorldConfig{}};
  const BodyId inside = w.add_body(box_at(0.0, 0.0, 0.1, 0.1));
  const BodyId outside = w.add_body(box_at(5.0, 0.0, 0.1, 0.1));
  const BodyId crossing = w.add_body(box_at(0.95, 0.0, 0.1, 0.1));
  const Aabb box{{-1.0, -1.0}, {1.0, 1.0}};
  const auto result = w.query_aabb(box);
  REQUIRE(result.size() == 3);
  for (const auto& [id, c] : result) {
    if (id == inside) CHECK(c == Containment::Inside);
    if (id == outside) CHECK(c == Containment::Outside);
    if (id == crossing) CHECK(c == Containment::Intersecting);
  }
  CHECK_THROWS_AS(w.query_aabb(Aabb{{1.0, 0.0}, {0.0, 1.0}}), QueryError);
}

TEST_CASE("rotated body AABB covers its corners") {
  World w{WorldConfig{}};
  BodySpec s = box_at(0.0, 0.0, 0.2, 0.1);
  s.angle = 0.5;
  const BodyId id = w.add_body(s);
  const Aabb box = w.body_aabb(id);
  const double c = std::cos(0.5), si = std::sin(0.5);
  const double ex = 0.2 * std::abs(c) + 0.1 * std::abs(si);
  const double ey = 0.2 * std::abs(si) + 0.1 * std::abs(c);
  CHECK(box.max.x == doctest::Approx(ex));
  CHECK(box.max.y == doctest::Approx(ey));
}

TEST_CASE("divergence raises") {
  WorldConfig cfg;
  World w{cfg};
  const BodyId id = w.add_body(box_at(0, 0));
  w.set_velocity(id, {std::numeric_limits<double>::quiet_NaN(), 0.0}, 0.0);
  CHECK_THROWS_AS(w.step(), SimulationDiverged);
}

TEST_CASE("contact detection reports penetration along the normal") {
  World w{WorldConfig{}};
  add_floor(w);
  const BodyId id = w.add_body(box_at(0.0, 0.11));  // 0.01 into the floor
  const auto contacts = w.detect_contacts();
  REQUIRE(contacts.size() == 1);
  CHECK(contacts[0].point_count == 2);
  CHECK(contacts[0].penetration == doctest::Approx(0.01).epsilon(1e-9));
  // Normal from a (floor, lower id) to b (box): +y.
  CHECK(contacts[0].normal.y == doctest::Approx(1.0));
}
