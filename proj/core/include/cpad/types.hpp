#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpad {

inline constexpr int kLidarRays = 240;
inline constexpr int kLaneRays = 12;
inline constexpr int kSideRays = 12;
inline constexpr int kSensorDim = kLidarRays + kLaneRays + kSideRays;  // 264

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }

  Vec2 normalized() const {
    const double n = norm();
    if (n == 0.0) throw std::invalid_argument("Vec2: cannot normalize zero vector");
    return {x / n, y / n};
  }

  // Counterclockwise rotation by angle radians.
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }

  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

struct AgentState {
  Vec2 position;  // m
  Vec2 velocity;  // m/s
  Vec2 heading;   // unit vector

  double speed() const { return velocity.norm(); }
};

// One per-agent per-timestep perception vector: 240 lidar + 12 lane + 12 side
// ray distances, each clamped to [0, max_range].
struct SensorFrame {
  std::vector<double> lidar;  // size 240
  std::vector<double> lane;   // size 12
  std::vector<double> side;   // size 12

  SensorFrame()
      : lidar(kLidarRays, 0.0), lane(kLaneRays, 0.0), side(kSideRays, 0.0) {}

  bool sized_correctly() const {
    return lidar.size() == kLidarRays && lane.size() == kLaneRays &&
           side.size() == kSideRays;
  }
};

enum class AnomalyType { Zigzag, SuddenBraking, SuddenTurn, LaneWeaving, Tailgating };

inline const char* to_string(AnomalyType t) {
  switch (t) {
    case AnomalyType::Zigzag: return "Zigzag";
    case AnomalyType::SuddenBraking: return "SuddenBraking";
    case AnomalyType::SuddenTurn: return "SuddenTurn";
    case AnomalyType::LaneWeaving: return "LaneWeaving";
    case AnomalyType::Tailgating: return "Tailgating";
  }
  throw std::logic_error("unknown AnomalyType");
}

inline AnomalyType anomaly_type_from_string(const std::string& s) {
  if (s == "Zigzag") return AnomalyType::Zigzag;
  if (s == "SuddenBraking") return AnomalyType::SuddenBraking;
  if (s == "SuddenTurn") return AnomalyType::SuddenTurn;
  if (s == "LaneWeaving") return AnomalyType::LaneWeaving;
  if (s == "Tailgating") return AnomalyType::Tailgating;
  throw std::invalid_argument("unknown anomaly type: " + s);
}

inline constexpr std::array<AnomalyType, 5> kAllAnomalyTypes = {
    AnomalyType::Zigzag, AnomalyType::SuddenBraking, AnomalyType::SuddenTurn,
    AnomalyType::LaneWeaving, AnomalyType::Tailgating};

// Inclusive [start, end] index range.
struct IndexInterval {
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  bool operator==(const IndexInterval&) const = default;
};

struct AnomalyReport {
  bool is_anomalous = false;
  // Only types with nonempty interval lists appear as keys.
  std::map<AnomalyType, std::vector<IndexInterval>> intervals;

  std::vector<AnomalyType> types() const {
    std::vector<AnomalyType> out;
    for (const auto& [t, iv] : intervals)
      if (!iv.empty()) out.push_back(t);
    return out;
  }

  bool consistent() const {
    bool any = false;
    for (const auto& [t, iv] : intervals)
      if (!iv.empty()) any = true;
    return is_anomalous == any;
  }

  bool operator==(const AnomalyReport&) const = default;
};

struct AgentTrajectory {
  std::string agent_id;
  std::vector<AgentState> states;
  std::vector<SensorFrame> sensors;
  std::vector<char> lane_cross_flags;  // 0/1, true while straddling a lane line
  std::optional<AnomalyReport> label;

  int length() const { return static_cast<int>(states.size()); }

  bool lengths_consistent() const {
    return states.size() == sensors.size() &&
           states.size() == lane_cross_flags.size() && states.size() >= 2;
  }
};

struct Scenario {
  std::string scenario_id;
  double dt = 0.1;
  // Lane boundary polylines ordered by lateral offset; the first and last are
  // the road edges.
  std::vector<std::vector<Vec2>> lanes;
  std::vector<AgentTrajectory> agents;

  int timesteps() const { return agents.empty() ? 0 : agents.front().length(); }

  int agent_index(const std::string& agent_id) const {
    for (size_t i = 0; i < agents.size(); ++i)
      if (agents[i].agent_id == agent_id) return static_cast<int>(i);
    throw std::invalid_argument("scenario " + scenario_id + ": no agent " + agent_id);
  }
};

// (scenario_id, ego agent_id) keying one classification sample.
struct SampleRef {
  std::string scenario_id;
  std::string agent_id;

  bool operator==(const SampleRef&) const = default;
};

struct DatasetSplit {
  std::vector<SampleRef> train;
  std::vector<SampleRef> val;
  std::vector<SampleRef> test;
};

}  // namespace cpad
