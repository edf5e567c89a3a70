#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "adfi/bench.hpp"
#include "adfi/errors.hpp"
#include "adfi/scene.hpp"

using namespace adfi;

namespace {

ScenarioSpec small_spec(std::uint64_t seed = 3, int packets = 24) {
  ScenarioSpec s;
  s.packet_count = packets;
  s.rows = 4;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("scenario generation is deterministic per seed") {
  Scene a(small_spec(5), {}, {}, {});
  Scene b(small_spec(5), {}, {}, {});
  CHECK(a.trajectory_hash() == b.trajectory_hash());
  Scene c(small_spec(6), {}, {}, {});
  CHECK(a.trajectory_hash() != c.trajectory_hash());
}

TEST_CASE("layout rejects impossible packing") {
  ScenarioSpec s = small_spec();
  s.packet_count = 5000;
  s.rows = 4;
  CHECK_THROWS_AS(Scene(s, {}, {}, {}), LayoutError);
}

TEST_CASE("initial pile rests inside the truck") {
  ScenarioSpec spec = small_spec();
  Scene scene(spec, {}, {}, {});
  for (const PacketInfo& p : scene.packets()) {
    const Aabb box = scene.world().body_aabb(p.body);
    CHECK(box.min.x > -0.01);
    CHECK(box.max.x < spec.truck_length);
    CHECK(box.min.y > -0.01);
    CHECK(box.max.y < spec.truck_height);
  }
  CHECK(scene.world().sim_time() == 0.0);
}

TEST_CASE("robot bounding box covers all robot bodies and validates inflation") {
  Scene scene(small_spec(), {}, {}, {});
  const Aabb tight = scene.robot_bounding_box(0.0);
  const Aabb grown = scene.robot_bounding_box(0.5);
  CHECK(grown.min.x == doctest::Approx(tight.min.x - 0.5));
  CHECK(grown.max.y == doctest::Approx(tight.max.y + 0.5));
  for (BodyId id : scene.plunger_links()) {
    const Aabb b = scene.world().body_aabb(id);
    CHECK(tight.min.x <= b.min.x);
    CHECK(tight.max.x >= b.max.x);
  }
  CHECK_THROWS_AS(scene.robot_bounding_box(-0.1), ParameterError);
}

TEST_CASE("pick unloads stacked packets, sweep unloads floor packets") {
  Scene scene(small_spec(), {}, {}, {});
  const Scene::Frontier f0 = scene.frontier();
  REQUIRE(f0.any);
  scene.execute_action(Action::move_base(-(scene.nose_front_x() - f0.front_x - 0.10)));
  const ActionOutcome pick = scene.execute_action(Action::pick(f0.top_center_y));
  CHECK(pick.newly_unloaded > 0);
  CHECK(pick.duration > 0.0);
  const ActionOutcome sweep = scene.execute_action(Action::sweep(0.35));
  CHECK(sweep.newly_unloaded > 0);
  CHECK(scene.count_unloaded() == pick.newly_unloaded + sweep.newly_unloaded);
  CHECK(scene.remaining_packets() ==
        static_cast<int>(scene.packets().size()) - scene.count_unloaded());
}

TEST_CASE("unloaded packets cross the rear plane before being counted") {
  Scene scene(small_spec(), {}, {}, {});
  const Scene::Frontier f0 = scene.frontier();
  scene.execute_action(Action::move_base(-(scene.nose_front_x() - f0.front_x - 0.10)));
  scene.execute_action(Action::pick(f0.top_center_y));
  int flagged = 0;
  for (const PacketInfo& p : scene.packets())
    if (p.unloaded) ++flagged;
  CHECK(flagged == scene.count_unloaded());
}

TEST_CASE("retract before any pick is an error; sweep depth must be positive") {
  Scene scene(small_spec(), {}, {}, {});
  CHECK_THROWS_AS(scene.execute_action(Action::retract()), ActionError);
  CHECK_THROWS_AS(scene.execute_action(Action::sweep(0.0)), ActionError);
}

TEST_CASE("episode respects the sim-time budget") {
  Scene scene(small_spec(), {}, {}, {});
  const EpisodeMetrics m = scene.run_episode(greedy_policy(), 10.0);
  CHECK(m.sim_time >= 10.0);
  CHECK(m.sim_time < 40.0);  // at most one trailing action program
}

TEST_CASE("full greedy episode empties a small truck under every preset") {
  for (const char* preset : {"hifi", "adfi-1", "adfi-2", "adfi-3"}) {
    Scene scene(small_spec(3), {}, {}, fidelity_preset(preset));
    const EpisodeMetrics m = scene.run_episode(greedy_policy(), 300.0);
    CHECK(m.unloaded_count == 24);
    CHECK(m.unload_rate > 0.0);
  }
}

TEST_CASE("adaptive mode transitions occur and unmanaged mode has none") {
  Scene hifi(small_spec(), {}, {}, fidelity_preset("hifi"));
  const EpisodeMetrics mh = hifi.run_episode(greedy_policy(), 60.0);
  CHECK(mh.transitions.transitions == 0);
  Scene adfi(small_spec(), {}, {}, fidelity_preset("adfi-2"));
  const EpisodeMetrics ma = adfi.run_episode(greedy_policy(), 60.0);
  CHECK(ma.transitions.transitions > 0);
  CHECK(ma.transitions.cache_captures > 0);
}

TEST_CASE("packet statuses are consistent with manager bookkeeping") {
  Scene scene(small_spec(), {}, {}, fidelity_preset("adfi-2"));
  scene.run_episode(greedy_policy(), 20.0);
  REQUIRE(scene.manager() != nullptr);
  for (std::size_t i = 0; i < scene.packets().size(); ++i) {
    if (scene.packets()[i].unloaded) continue;
    const FidelityStatus s = scene.packet_status(i);
    const RigidBody& b = scene.world().body(scene.packets()[i].body);
    if (s == FidelityStatus::High) CHECK(b.dynamic);
    if (s == FidelityStatus::Medium) {
      CHECK(!b.dynamic);
      CHECK(b.respondable);
    }
    if (s == FidelityStatus::Low) {
      CHECK(!b.dynamic);
      CHECK(!b.respondable);
    }
  }
}

TEST_CASE("scene state round-trips bitwise through save/load") {
  Scene scene(small_spec(), {}, {}, fidelity_preset("adfi-2"));
  scene.run_episode(greedy_policy(), 15.0);
  const SceneState snap = scene.save_state();
  const std::string hash0 = scene.trajectory_hash();

  // Diverge, then restore.
  scene.execute_action(Action::sweep(0.4));
  scene.load_state(snap);
  CHECK(scene.trajectory_hash() == hash0);

  // Replays after restore are bitwise identical.
  scene.execute_action(Action::sweep(0.4));
  const std::string replay1 = scene.trajectory_hash();
  const int unloaded1 = scene.count_unloaded();
  scene.load_state(snap);
  scene.execute_action(Action::sweep(0.4));
  CHECK(scene.trajectory_hash() == replay1);
  CHECK(scene.count_unloaded() == unloaded1);
}

TEST_CASE("demotion log entries satisfy the settle precondition") {
  Scene scene(small_spec(), {}, {}, fidelity_preset("adfi-2"));
  scene.run_episode(greedy_policy(), 60.0);
  int demotions = 0;
  for (const TransitionLogEntry& e : scene.transition_log()) {
    if (e.from == FidelityStatus::High && e.to != FidelityStatus::High &&
        e.tree_id < (1u << 20)) {
      ++demotions;
      CHECK(e.settled_outside_streak >= 2);
    }
  }
  CHECK(demotions > 0);
}

TEST_CASE("no deep penetration between low packets and respondable dynamic bodies") {
  Scene scene(small_spec(), {}, {}, fidelity_preset("adfi-3"));
  scene.set_boundary_check(true);
  scene.run_episode(greedy_policy(), 60.0);
  CHECK(scene.boundary_violations() == 0);
}
