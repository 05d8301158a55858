#include <cmath>

#include "cpad/generator.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cpad;

namespace {
constexpr double kPi = 3.14159265358979323846;

bool states_bit_equal(const AgentState& a, const AgentState& b) {
  return a.position.x == b.position.x && a.position.y == b.position.y &&
         a.velocity.x == b.velocity.x && a.velocity.y == b.velocity.y &&
         a.heading.x == b.heading.x && a.heading.y == b.heading.y;
}
}  // namespace

TEST_CASE("step_unicycle: straight advance, rotation oracle, speed clamp") {
  AgentState s;
  s.position = {0, 0};
  s.heading = {1, 0};
  s.velocity = {10, 0};

  const AgentState fwd = step_unicycle(s, 0.0, 0.0, 0.1);
  CHECK(fwd.position.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fwd.position.y == 0.0);

  // pi/2 per second for 2 seconds rotates the heading by pi
  AgentState r = s;
  for (int i = 0; i < 20; ++i) r = step_unicycle(r, 0.0, kPi / 2.0, 0.1);
  CHECK(std::abs(r.heading.x - (-1.0)) < 1e-6);
  CHECK(std::abs(r.heading.y - 0.0) < 1e-6);

  AgentState slow = s;
  slow.velocity = {1, 0};
  const AgentState stopped = step_unicycle(slow, -20.0, 0.0, 0.1);
  CHECK(stopped.speed() == 0.0);
  CHECK(stopped.position.x == slow.position.x);

  CHECK_THROWS_AS(step_unicycle(s, 0, 0, 0.0), std::invalid_argument);
}

TEST_CASE("script_controls: normal stays within the yaw bound") {
  BehaviorScript normal;
  normal.kind = BehaviorKind::Normal;
  normal.target_speed = 10.0;
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const Controls c = script_controls(normal, t, 10.0, 0.1, rng);
    CHECK(std::abs(c.yaw_rate) <= 0.05);
    CHECK(std::abs(c.accel) <= 1.0);
  }
}

TEST_CASE("simulate_scenario: determinism is bitwise") {
  GenConfig cfg;
  cfg.seed = 9;
  const Scenario a = simulate_scenario(cfg, 3);
  const Scenario b = simulate_scenario(cfg, 3);
  REQUIRE(a.agents.size() == b.agents.size());
  for (size_t i = 0; i < a.agents.size(); ++i) {
    for (int t = 0; t < a.timesteps(); ++t) {
      CHECK(states_bit_equal(a.agents[i].states[t], b.agents[i].states[t]));
      CHECK(a.agents[i].sensors[t].lidar == b.agents[i].sensors[t].lidar);
      CHECK(a.agents[i].sensors[t].lane == b.agents[i].sensors[t].lane);
      CHECK(a.agents[i].sensors[t].side == b.agents[i].sensors[t].side);
    }
    CHECK(a.agents[i].lane_cross_flags == b.agents[i].lane_cross_flags);
    CHECK(a.agents[i].label == b.agents[i].label);
  }
}

TEST_CASE("simulate_scenario: anomaly_fraction 0 scripts everyone Normal") {
  GenConfig cfg;
  cfg.anomaly_fraction = 0.0;
  cfg.seed = 4;
  for (int i = 0; i < 10; ++i) {
    const auto scripted = simulate_scenario_scripted(cfg, i, LabelerConfig{});
    for (const auto& sc : scripted.scripts) CHECK(sc.kind == BehaviorKind::Normal);
    for (const auto& agent : scripted.scenario.agents) {
      REQUIRE(agent.label.has_value());
      CHECK_FALSE(agent.label->is_anomalous);
    }
  }
}

TEST_CASE("simulate_scenario: labeled anomalous share tracks the configured fraction") {
  GenConfig cfg;
  cfg.seed = 31;
  size_t total = 0, anomalous = 0;
  for (int i = 0; i < 400; ++i) {
    const Scenario s = simulate_scenario(cfg, i);
    for (const auto& agent : s.agents) {
      ++total;
      anomalous += agent.label->is_anomalous;
    }
  }
  const double share = static_cast<double>(anomalous) / total;
  CHECK(share == doctest::Approx(0.25).epsilon(0.12));  // 0.25 +/- 0.03
}

TEST_CASE("raycast_sensors: lone agent sees max range everywhere") {
  GenConfig cfg;
  const RoadGeometry road = make_straight_road(cfg, -500, 500);
  AgentState s;
  s.position = {0, 5.25};
  s.heading = {1, 0};
  s.velocity = {10, 0};
  const SensorFrame f = raycast_sensors({s}, 0, road, cfg.max_range);
  for (double d : f.lidar) CHECK(d == cfg.max_range);
}

TEST_CASE("raycast_sensors: vehicle 10 m dead ahead returns 7.75 on the forward ray") {
  GenConfig cfg;
  const RoadGeometry road = make_straight_road(cfg, -500, 500);
  AgentState ego, lead;
  ego.position = {0, 5.25};
  ego.heading = {1, 0};
  lead.position = {10, 5.25};
  lead.heading = {1, 0};
  const SensorFrame f = raycast_sensors({ego, lead}, 0, road, cfg.max_range);
  CHECK(f.lidar[0] == doctest::Approx(10.0 - 4.5 / 2).epsilon(1e-6));
}

TEST_CASE("raycast_sensors: pure lateral side rays see the road edges") {
  GenConfig cfg;
  cfg.n_lanes = 1;  // road edges at 0 and 3.5
  const RoadGeometry road = make_straight_road(cfg, -500, 500);
  AgentState s;
  s.position = {0, 1.75};
  s.heading = {1, 0};
  const SensorFrame f = raycast_sensors({s}, 0, road, cfg.max_range);
  // side rays 2 (left, +90) and 8 (right, -90) are the pure lateral pair
  CHECK(f.side[2] == doctest::Approx(1.75).epsilon(1e-9));
  CHECK(f.side[8] == doctest::Approx(1.75).epsilon(1e-9));
}

TEST_CASE("raycast_sensors: mirroring the scene mirrors the lidar fan") {
  GenConfig cfg;
  const double axis = cfg.road_width() / 2.0;
  const RoadGeometry road = make_straight_road(cfg, -500, 500);
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<AgentState> scene;
    const int n = 2 + rng.uniform_int(0, 3);
    for (int i = 0; i < n; ++i) {
      AgentState s;
      s.position = {rng.uniform(-40.0, 40.0), rng.uniform(0.5, 10.0)};
      const double phi = rng.uniform(0.0, 2 * kPi);
      s.heading = {std::cos(phi), std::sin(phi)};
      s.velocity = s.heading * 10.0;
      scene.push_back(s);
    }
    std::vector<AgentState> mirrored = scene;
    for (auto& s : mirrored) {
      s.position.y = 2 * axis - s.position.y;
      s.heading.y = -s.heading.y;
      s.velocity.y = -s.velocity.y;
    }
    const SensorFrame a = raycast_sensors(scene, 0, road, cfg.max_range);
    const SensorFrame b = raycast_sensors(mirrored, 0, road, cfg.max_range);
    for (int j = 0; j < kLidarRays; ++j) {
      const int jm = (kLidarRays - j) % kLidarRays;
      CHECK(std::abs(a.lidar[j] - b.lidar[jm]) < 1e-9);
    }
  }
}

TEST_CASE("generated scenarios keep sensor frames in range and headings unit") {
  GenConfig cfg;
  cfg.seed = 8;
  for (int i = 0; i < 5; ++i) {
    const Scenario s = simulate_scenario(cfg, i);
    for (const auto& agent : s.agents)
      for (int t = 0; t < s.timesteps(); ++t) {
        CHECK(std::abs(agent.states[t].heading.norm() - 1.0) < 1e-9);
        CHECK(agent.states[t].heading.finite());
        CHECK(agent.states[t].position.finite());
        for (double d : agent.sensors[t].lidar) {
          CHECK(d >= 0.0);
          CHECK(d <= cfg.max_range);
        }
        for (double d : agent.sensors[t].lane) {
          CHECK(d >= 0.0);
          CHECK(d <= cfg.max_range);
        }
        for (double d : agent.sensors[t].side) {
          CHECK(d >= 0.0);
          CHECK(d <= cfg.max_range);
        }
      }
  }
}
