#include "cpad/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cpad {

namespace {

constexpr double kPi = 3.14159265358979323846;

// spawn layout
constexpr double kSlotSpacing = 27.0;     // m between consecutive spawn slots
constexpr double kSlotJitter = 3.0;       // m
constexpr double kSpeedMin = 8.0;         // m/s
constexpr double kSpeedMax = 15.0;        // m/s
constexpr double kNoiseAccel = 0.3;       // m/s^2
constexpr double kSpeedGain = 0.5;        // 1/s speed tracking gain

// script shapes (validated against the rule labeler's acceptance gates)
constexpr double kZigzagAmpLo = 0.10, kZigzagAmpHi = 0.15;       // rad
constexpr double kZigzagPeriodLo = 1.22, kZigzagPeriodHi = 1.32; // s
constexpr double kBrakeAccel = -6.0;      // m/s^2 (1.5x default threshold)
constexpr int kBrakeSteps = 10;           // 1 s at dt = 0.1
constexpr double kBrakeRecover = 2.0;     // m/s^2
constexpr double kTurnAlatFactor = 1.2;   // target |a_lat| = 1.2 * tau
constexpr double kWeaveAmp = 0.7;         // m lateral amplitude about the line
constexpr double kWeaveOmegaLo = 2.6, kWeaveOmegaHi = 2.9;  // rad/s
constexpr double kTailGap = 14.0;         // m initial center gap to the lead
constexpr double kTailApproach = 2.5;     // m/s closing speed
constexpr int kTailApproachSteps = 24;    // then decelerate for 1 s

double segment_hit(const Vec2& origin, const Vec2& dir, const Vec2& a, const Vec2& b) {
  // Returns ray parameter t >= 0 of the intersection with segment ab, or +inf.
  const Vec2 seg = b - a;
  const double denom = dir.cross(seg);
  if (std::abs(denom) < 1e-15) return std::numeric_limits<double>::infinity();
  const Vec2 ao = a - origin;
  const double t = ao.cross(seg) / denom;
  const double u = ao.cross(dir) / denom;
  if (t >= 0.0 && u >= 0.0 && u <= 1.0) return t;
  return std::numeric_limits<double>::infinity();
}

double polyline_hit(const Vec2& origin, const Vec2& dir, const std::vector<Vec2>& poly) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < poly.size(); ++i)
    best = std::min(best, segment_hit(origin, dir, poly[i], poly[i + 1]));
  return best;
}

double box_hit(const Vec2& origin, const Vec2& dir, const AgentState& target) {
  const Vec2 fwd = target.heading;
  const Vec2 left{-fwd.y, fwd.x};
  const Vec2 dl = fwd * (kVehicleLength / 2.0);
  const Vec2 dw = left * (kVehicleWidth / 2.0);
  const Vec2 c = target.position;
  const std::array<Vec2, 4> corners = {c + dl + dw, c + dl - dw, c - dl - dw,
                                       c - dl + dw};
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i)
    best = std::min(best, segment_hit(origin, dir, corners[i], corners[(i + 1) % 4]));
  return best;
}

int pick_weighted(const std::array<double, 5>& weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.uniform() * total;
  for (int i = 0; i < 5; ++i) {
    u -= weights[i];
    if (u < 0.0) return i;
  }
  return 4;
}

}  // namespace

void GenConfig::validate() const {
  if (n_agents < 1) throw std::invalid_argument("n_agents must be >= 1");
  if (T < 2) throw std::invalid_argument("T must be >= 2");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (n_lanes < 1) throw std::invalid_argument("n_lanes must be >= 1");
  if (!(lane_width > 0.0)) throw std::invalid_argument("lane_width must be > 0");
  if (!(max_range > 0.0)) throw std::invalid_argument("max_range must be > 0");
  if (anomaly_fraction < 0.0 || anomaly_fraction > 1.0)
    throw std::invalid_argument("anomaly_fraction must be in [0, 1]");
  double total = 0.0;
  for (double w : anomaly_type_weights) {
    if (w < 0.0) throw std::invalid_argument("anomaly_type_weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("anomaly_type_weights must sum to 1");
}

GenConfig GenConfig::from_kv(const KeyValueConfig& kv) {
  GenConfig c;
  c.n_agents = kv.get_int("n_agents", c.n_agents);
  c.T = kv.get_int("T", c.T);
  c.dt = kv.get_double("dt", c.dt);
  c.n_lanes = kv.get_int("n_lanes", c.n_lanes);
  c.lane_width = kv.get_double("lane_width", c.lane_width);
  c.max_range = kv.get_double("max_range", c.max_range);
  c.anomaly_fraction = kv.get_double("anomaly_fraction", c.anomaly_fraction);
  for (size_t i = 0; i < kAllAnomalyTypes.size(); ++i) {
    const std::string key = std::string("weight_") + to_string(kAllAnomalyTypes[i]);
    c.anomaly_type_weights[i] = kv.get_double(key, c.anomaly_type_weights[i]);
  }
  c.seed = kv.get_uint64("seed", c.seed);
  c.validate();
  return c;
}

const char* to_string(BehaviorKind k) {
  switch (k) {
    case BehaviorKind::Normal: return "Normal";
    case BehaviorKind::Zigzag: return "Zigzag";
    case BehaviorKind::SuddenBraking: return "SuddenBraking";
    case BehaviorKind::SuddenTurn: return "SuddenTurn";
    case BehaviorKind::LaneWeaving: return "LaneWeaving";
    case BehaviorKind::Tailgating: return "Tailgating";
  }
  throw std::logic_error("unknown BehaviorKind");
}

AgentState step_unicycle(const AgentState& state, double accel, double yaw_rate,
                         double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_unicycle: dt must be > 0");
  AgentState next;
  const double speed = std::max(0.0, state.speed() + accel * dt);
  next.heading = state.heading.rotated(yaw_rate * dt).normalized();
  next.velocity = next.heading * speed;
  next.position = state.position + next.velocity * dt;
  return next;
}

Controls script_controls(const BehaviorScript& script, int t, double current_speed,
                         double dt, Rng& rng) {
  Controls c;
  const double track = kSpeedGain * (script.target_speed - current_speed);
  switch (script.kind) {
    case BehaviorKind::Normal:
      c.accel = track + rng.uniform(-script.noise_accel, script.noise_accel);
      c.yaw_rate = 0.0;
      break;
    case BehaviorKind::Zigzag: {
      c.accel = track;
      if (t >= script.onset) {
        const double u = (t - script.onset) * dt;
        c.yaw_rate = script.amplitude * script.omega *
                     std::cos(script.omega * u + script.phase);
      }
      break;
    }
    case BehaviorKind::SuddenBraking:
      if (t >= script.onset && t < script.onset + script.duration)
        c.accel = kBrakeAccel;
      else if (t >= script.onset + script.duration && current_speed < script.target_speed)
        c.accel = kBrakeRecover;
      else
        c.accel = track + rng.uniform(-script.noise_accel, script.noise_accel);
      break;
    case BehaviorKind::SuddenTurn:
      c.accel = track;
      if (t >= script.onset && t < script.onset + script.duration)
        c.yaw_rate = script.direction * script.turn_rate;
      else if (t >= script.onset + script.duration &&
               t < script.onset + 2 * script.duration)
        c.yaw_rate = -script.direction * script.turn_rate;
      break;
    case BehaviorKind::LaneWeaving:
      c.accel = track;
      if (t >= script.onset) {
        const double u = (t - script.onset) * dt;
        c.yaw_rate = script.amplitude * script.omega * std::cos(script.omega * u);
      }
      break;
    case BehaviorKind::Tailgating:
      // Open-loop encounter plan: close at constant speed, then bleed off the
      // speed difference over 1 s and hold the lead's speed.
      if (t < script.approach_steps)
        c.accel = 0.0;
      else if (t < script.approach_steps + static_cast<int>(kTailApproach / (2.5 * dt)))
        c.accel = -2.5;
      else
        c.accel = kSpeedGain * (script.lead_speed - current_speed);
      break;
  }
  return c;
}

RoadGeometry make_straight_road(const GenConfig& cfg, double x_min, double x_max) {
  RoadGeometry road;
  for (int b = 0; b <= cfg.n_lanes; ++b) {
    const double y = b * cfg.lane_width;
    road.boundaries.push_back({{x_min, y}, {x_max, y}});
  }
  return road;
}

SensorFrame raycast_sensors(const std::vector<AgentState>& states_at_t,
                            int agent_index, const RoadGeometry& road,
                            double max_range) {
  if (agent_index < 0 || agent_index >= static_cast<int>(states_at_t.size()))
    throw std::invalid_argument("raycast_sensors: agent index out of range");
  if (road.boundaries.size() < 2)
    throw std::invalid_argument("raycast_sensors: road needs >= 2 boundary polylines");
  const AgentState& self = states_at_t[agent_index];
  const Vec2 origin = self.position;
  const double base = std::atan2(self.heading.y, self.heading.x);
  SensorFrame frame;

  auto clamp_range = [&](double d) { return std::clamp(d, 0.0, max_range); };

  for (int j = 0; j < kLidarRays; ++j) {
    const double ang = base + 2.0 * kPi * j / kLidarRays;
    const Vec2 dir{std::cos(ang), std::sin(ang)};
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < static_cast<int>(states_at_t.size()); ++a) {
      if (a == agent_index) continue;
      best = std::min(best, box_hit(origin, dir, states_at_t[a]));
    }
    frame.lidar[j] = clamp_range(std::isfinite(best) ? best : max_range);
  }

  // 12 lane rays spanning [-60, +60] degrees forward, any lane boundary.
  for (int j = 0; j < kLaneRays; ++j) {
    const double deg = -60.0 + 120.0 * j / (kLaneRays - 1);
    const double ang = base + deg * kPi / 180.0;
    const Vec2 dir{std::cos(ang), std::sin(ang)};
    double best = std::numeric_limits<double>::infinity();
    for (const auto& poly : road.boundaries)
      best = std::min(best, polyline_hit(origin, dir, poly));
    frame.lane[j] = clamp_range(std::isfinite(best) ? best : max_range);
  }

  // 12 side rays: 6 per side at 90 +/- {36,18,0,-18,-36,-54} degrees offsets,
  // including the two pure-lateral rays; road edges only.
  const std::array<double, 6> side_offsets = {-36.0, -18.0, 0.0, 18.0, 36.0, 54.0};
  const std::array<const std::vector<Vec2>*, 2> edges = {&road.boundaries.front(),
                                                         &road.boundaries.back()};
  for (int side = 0; side < 2; ++side) {
    const double center = side == 0 ? 90.0 : -90.0;
    for (int j = 0; j < 6; ++j) {
      const double deg = center + (side == 0 ? side_offsets[j] : -side_offsets[j]);
      const double ang = base + deg * kPi / 180.0;
      const Vec2 dir{std::cos(ang), std::sin(ang)};
      double best = std::numeric_limits<double>::infinity();
      for (const auto* poly : edges)
        best = std::min(best, polyline_hit(origin, dir, *poly));
      frame.side[side * 6 + j] = clamp_range(std::isfinite(best) ? best : max_range);
    }
  }
  return frame;
}

namespace {

struct SpawnPlan {
  std::vector<BehaviorScript> scripts;
  std::vector<AgentState> initial;
};

SpawnPlan plan_spawn(const GenConfig& cfg, Rng& rng) {
  const int n = cfg.n_agents;
  SpawnPlan plan;
  plan.scripts.resize(n);
  plan.initial.resize(n);

  // 1. behavior kinds
  std::vector<BehaviorKind> kinds(n, BehaviorKind::Normal);
  for (int i = 0; i < n; ++i)
    if (rng.bernoulli(cfg.anomaly_fraction)) {
      const int w = pick_weighted(cfg.anomaly_type_weights, rng);
      kinds[i] = static_cast<BehaviorKind>(w + 1);
    }

  // Tailgating needs a Normal lead; excess tailgaters fall back to Normal.
  std::vector<int> normals, tailgaters;
  for (int i = 0; i < n; ++i) {
    if (kinds[i] == BehaviorKind::Normal) normals.push_back(i);
    if (kinds[i] == BehaviorKind::Tailgating) tailgaters.push_back(i);
  }
  std::vector<std::pair<int, int>> tail_pairs;  // (follower, lead)
  for (size_t j = 0; j < tailgaters.size(); ++j) {
    if (j < normals.size())
      tail_pairs.push_back({tailgaters[j], normals[j]});
    else
      kinds[tailgaters[j]] = BehaviorKind::Normal;
  }

  // 2. slots: ascending x, round-robin lanes, speeds sorted ascending with x
  //    so nobody overtakes anybody by accident.
  std::vector<double> slot_x(n), speeds(n);
  for (int i = 0; i < n; ++i) {
    slot_x[i] = i * kSlotSpacing + rng.uniform(-kSlotJitter, kSlotJitter);
    speeds[i] = rng.uniform(kSpeedMin, kSpeedMax);
  }
  std::sort(speeds.begin(), speeds.end());

  for (int i = 0; i < n; ++i) {
    const int lane = i % cfg.n_lanes;
    const double lane_center = (lane + 0.5) * cfg.lane_width;
    AgentState st;
    st.position = {slot_x[i], lane_center};
    st.heading = {1.0, 0.0};
    st.velocity = st.heading * speeds[i];
    plan.initial[i] = st;

    BehaviorScript sc;
    sc.kind = kinds[i];
    sc.target_speed = speeds[i];
    sc.noise_accel = kNoiseAccel;
    switch (kinds[i]) {
      case BehaviorKind::Normal:
        break;
      case BehaviorKind::Zigzag: {
        sc.onset = rng.uniform_int(0, 9);
        sc.amplitude = rng.uniform(kZigzagAmpLo, kZigzagAmpHi);
        const double period = rng.uniform(kZigzagPeriodLo, kZigzagPeriodHi);
        sc.omega = 2.0 * kPi / period;
        sc.phase = rng.uniform(0.0, 2.0 * kPi);
        break;
      }
      case BehaviorKind::SuddenBraking:
        sc.onset = rng.uniform_int(5, std::max(5, cfg.T / 2 + 5));
        sc.duration = kBrakeSteps;
        break;
      case BehaviorKind::SuddenTurn:
        sc.onset = rng.uniform_int(10, std::max(10, cfg.T - 20));
        sc.duration = rng.uniform_int(4, 7);
        sc.turn_rate = kTurnAlatFactor * 0.8 / (cfg.dt * sc.target_speed);
        sc.direction = rng.bernoulli(0.5) ? 1.0 : -1.0;
        break;
      case BehaviorKind::LaneWeaving: {
        sc.onset = rng.uniform_int(0, 19);
        sc.omega = rng.uniform(kWeaveOmegaLo, kWeaveOmegaHi);
        sc.amplitude = kWeaveAmp * sc.omega / sc.target_speed;
        // spawn against a lane line so the sweep straddles it
        double boundary;
        if (lane == 0)
          boundary = cfg.lane_width;
        else if (lane == cfg.n_lanes - 1)
          boundary = (cfg.n_lanes - 1) * cfg.lane_width;
        else
          boundary = (lane + (rng.bernoulli(0.5) ? 1 : 0)) * cfg.lane_width;
        if (cfg.n_lanes == 1) boundary = lane_center;  // no interior line to weave over
        plan.initial[i].position.y = boundary - kWeaveAmp;
        break;
      }
      case BehaviorKind::Tailgating:
        break;  // filled below once all slots exist
    }
    plan.scripts[i] = sc;
  }

  // 3. tailgating placement: follower sits kTailGap behind its lead in the
  //    lead's lane, closing at kTailApproach until the planned deceleration.
  for (const auto& [f, lead] : tail_pairs) {
    BehaviorScript& sc = plan.scripts[f];
    sc.kind = BehaviorKind::Tailgating;
    sc.lead_index = lead;
    sc.lead_speed = plan.scripts[lead].target_speed;
    sc.target_speed = sc.lead_speed + kTailApproach;
    sc.approach_steps = kTailApproachSteps;
    AgentState& st = plan.initial[f];
    st.position = plan.initial[lead].position - Vec2{kTailGap, 0.0};
    st.velocity = st.heading * sc.target_speed;
  }
  return plan;
}

}  // namespace

ScriptedScenario simulate_scenario_scripted(const GenConfig& cfg,
                                            uint64_t scenario_seed,
                                            const LabelerConfig& labeler_cfg) {
  cfg.validate();
  labeler_cfg.validate();
  Rng rng(mix_seed(cfg.seed, scenario_seed));
  SpawnPlan plan = plan_spawn(cfg, rng);
  const int n = cfg.n_agents;

  // per-agent control noise streams keep agents independent of each other
  std::vector<Rng> agent_rng;
  agent_rng.reserve(n);
  for (int i = 0; i < n; ++i)
    agent_rng.emplace_back(mix_seed(mix_seed(cfg.seed, scenario_seed), 1000 + i));

  std::vector<std::vector<AgentState>> states(n);
  for (int i = 0; i < n; ++i) {
    states[i].reserve(cfg.T);
    states[i].push_back(plan.initial[i]);
  }
  for (int t = 0; t + 1 < cfg.T; ++t) {
    for (int i = 0; i < n; ++i) {
      const Controls c = script_controls(plan.scripts[i], t, states[i][t].speed(),
                                         cfg.dt, agent_rng[i]);
      states[i].push_back(step_unicycle(states[i][t], c.accel, c.yaw_rate, cfg.dt));
    }
  }

  // geometry long enough to cover every trajectory with margin
  double x_lo = 0.0, x_hi = 0.0;
  for (int i = 0; i < n; ++i)
    for (const auto& st : states[i]) {
      x_lo = std::min(x_lo, st.position.x);
      x_hi = std::max(x_hi, st.position.x);
    }
  const RoadGeometry road =
      make_straight_road(cfg, x_lo - 2.0 * cfg.max_range, x_hi + 2.0 * cfg.max_range);

  Scenario s;
  s.scenario_id = "scn" + std::to_string(scenario_seed);
  s.dt = cfg.dt;
  s.lanes = road.boundaries;
  s.agents.resize(n);

  std::vector<AgentState> frame(n);
  for (int i = 0; i < n; ++i) {
    AgentTrajectory& traj = s.agents[i];
    traj.agent_id = "a" + std::to_string(i);
    traj.states = states[i];
    traj.sensors.resize(cfg.T);
    traj.lane_cross_flags.resize(cfg.T);
  }
  for (int t = 0; t < cfg.T; ++t) {
    for (int i = 0; i < n; ++i) frame[i] = states[i][t];
    for (int i = 0; i < n; ++i) {
      s.agents[i].sensors[t] = raycast_sensors(frame, i, road, cfg.max_range);
      // sustained lane-line flag: true while the footprint straddles an
      // interior boundary
      const AgentState& st = frame[i];
      const double phi = std::atan2(st.heading.y, st.heading.x);
      const double extent = kVehicleWidth / 2.0 * std::abs(std::cos(phi)) +
                            kVehicleLength / 2.0 * std::abs(std::sin(phi));
      bool straddle = false;
      for (int b = 1; b < cfg.n_lanes; ++b)
        if (std::abs(st.position.y - b * cfg.lane_width) <= extent) straddle = true;
      s.agents[i].lane_cross_flags[t] = straddle ? 1 : 0;
    }
  }

  for (int i = 0; i < n; ++i)
    s.agents[i].label = label_trajectory(s.agents[i], labeler_cfg, cfg.dt);

  return {std::move(s), std::move(plan.scripts)};
}

Scenario simulate_scenario(const GenConfig& cfg, uint64_t scenario_seed) {
  return simulate_scenario_scripted(cfg, scenario_seed, LabelerConfig{}).scenario;
}

}  // namespace cpad
