#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cpad/kvconfig.hpp"
#include "cpad/labeler.hpp"
#include "cpad/rng.hpp"
#include "cpad/types.hpp"

namespace cpad {

struct GenConfig {
  int n_agents = 6;
  int T = 100;
  double dt = 0.1;           // s
  int n_lanes = 3;
  double lane_width = 3.5;   // m
  double max_range = 50.0;   // m, sensor clamp
  double anomaly_fraction = 0.25;
  // Zigzag, SuddenBraking, SuddenTurn, LaneWeaving, Tailgating
  std::array<double, 5> anomaly_type_weights = {0.2, 0.2, 0.2, 0.2, 0.2};
  uint64_t seed = 0;

  double road_width() const { return n_lanes * lane_width; }
  void validate() const;
  static GenConfig from_kv(const KeyValueConfig& kv);
};

enum class BehaviorKind : int {
  Normal = 0,
  Zigzag,
  SuddenBraking,
  SuddenTurn,
  LaneWeaving,
  Tailgating,
};

const char* to_string(BehaviorKind k);

// Kind-specific open-loop control plan; parameters are fixed at spawn time so
// script_controls stays a pure function of (script, t).
struct BehaviorScript {
  BehaviorKind kind = BehaviorKind::Normal;
  int onset = 0;           // step index where the anomalous phase begins
  double target_speed = 10.0;
  double noise_accel = 0.3;     // Normal accel noise amplitude, m/s^2
  double amplitude = 0.0;       // Zigzag/LaneWeaving heading amplitude, rad
  double omega = 0.0;           // Zigzag/LaneWeaving angular frequency, rad/s
  double phase = 0.0;           // Zigzag phase offset
  int duration = 0;             // SuddenBraking/SuddenTurn phase length, steps
  double turn_rate = 0.0;       // SuddenTurn yaw magnitude, rad/s
  double direction = 1.0;       // SuddenTurn sign
  int lead_index = -1;          // Tailgating lead agent
  double lead_speed = 0.0;      // Tailgating matched speed, m/s
  int approach_steps = 0;       // Tailgating approach phase length
};

struct Controls {
  double accel = 0.0;     // m/s^2
  double yaw_rate = 0.0;  // rad/s
};

// Kinematic unicycle step: speed' = max(0, speed + accel*dt), heading rotated
// by yaw_rate*dt and renormalized, position advanced by speed'*heading'*dt.
AgentState step_unicycle(const AgentState& state, double accel, double yaw_rate,
                         double dt);

Controls script_controls(const BehaviorScript& script, int t, double current_speed,
                         double dt, Rng& rng);

// Road description used by the ray caster. `boundaries` holds every lane
// boundary polyline ordered by lateral offset; the first and last are the
// road edges.
struct RoadGeometry {
  std::vector<std::vector<Vec2>> boundaries;
};

RoadGeometry make_straight_road(const GenConfig& cfg, double x_min, double x_max);

// Vehicle footprint used for lidar ray casting, heading-aligned.
inline constexpr double kVehicleWidth = 2.0;   // m
inline constexpr double kVehicleLength = 4.5;  // m

// Casts the 240/12/12 ray fans from the agent's position at timestep t.
// Lidar rays hit other agents' bounding rectangles; lane rays hit any lane
// boundary; side rays hit the road edges. Everything is clamped to
// [0, max_range].
SensorFrame raycast_sensors(const std::vector<AgentState>& states_at_t,
                            int agent_index, const RoadGeometry& road,
                            double max_range);

struct ScriptedScenario {
  Scenario scenario;
  std::vector<BehaviorScript> scripts;  // per agent
};

// Deterministic multi-agent episode synthesis. Labels are produced by the
// rule labeler on the generated trajectories.
ScriptedScenario simulate_scenario_scripted(const GenConfig& cfg,
                                            uint64_t scenario_seed,
                                            const LabelerConfig& labeler_cfg);

Scenario simulate_scenario(const GenConfig& cfg, uint64_t scenario_seed);

}  // namespace cpad
