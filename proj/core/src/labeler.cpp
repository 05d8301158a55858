#include "cpad/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpad {

namespace {

void require_odd_window(int w, const char* name) {
  if (w < 3 || w % 2 == 0)
    throw std::invalid_argument(std::string(name) + " must be odd and >= 3, got " +
                                std::to_string(w));
}

std::vector<IndexInterval> intervals_where(const std::vector<double>& series,
                                           auto&& pred) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(series.size()); ++i)
    if (pred(series[i])) idx.push_back(i);
  return contiguous_intervals(idx);
}

}  // namespace

void LabelerConfig::validate() const {
  // zigzag_window is a stencil width (stride = window/2), not a moving-average
  // window, so it has no parity constraint.
  if (zigzag_window < 4) throw std::invalid_argument("zigzag_window must be >= 4");
  require_odd_window(braking_window, "braking_window");
  require_odd_window(lane_ma_window, "lane_ma_window");
  if (!(braking_threshold < 0.0))
    throw std::invalid_argument("braking_threshold must be negative");
  if (!(turn_threshold > 0.0))
    throw std::invalid_argument("turn_threshold must be positive");
  if (!(zigzag_k_threshold > 0.0))
    throw std::invalid_argument("zigzag_k_threshold must be positive");
  if (lane_interval_threshold < 0)
    throw std::invalid_argument("lane_interval_threshold must be >= 0");
  if (!(tail_distance > 0.0)) throw std::invalid_argument("tail_distance must be positive");
  if (tail_min_duration < 1)
    throw std::invalid_argument("tail_min_duration must be >= 1");
}

LabelerConfig LabelerConfig::from_kv(const KeyValueConfig& kv) {
  LabelerConfig c;
  c.zigzag_window = kv.get_int("zigzag_window", c.zigzag_window);
  c.zigzag_k_threshold = kv.get_double("zigzag_k_threshold", c.zigzag_k_threshold);
  c.braking_window = kv.get_int("braking_window", c.braking_window);
  c.braking_threshold = kv.get_double("braking_threshold", c.braking_threshold);
  c.turn_threshold = kv.get_double("turn_threshold", c.turn_threshold);
  c.lane_ma_window = kv.get_int("lane_ma_window", c.lane_ma_window);
  c.lane_interval_threshold =
      kv.get_int("lane_interval_threshold", c.lane_interval_threshold);
  c.tail_distance = kv.get_double("tail_distance", c.tail_distance);
  c.tail_min_duration = kv.get_int("tail_min_duration", c.tail_min_duration);
  c.validate();
  return c;
}

std::vector<double> curvature_series(const std::vector<Vec2>& headings, int window,
                                     double dt) {
  const int T = static_cast<int>(headings.size());
  if (T < window + 2)
    throw std::invalid_argument("curvature_series: series of length " +
                                std::to_string(T) + " shorter than stencil (window " +
                                std::to_string(window) + " + 2)");
  if (!(dt > 0.0)) throw std::invalid_argument("curvature_series: dt must be > 0");
  const int s = window / 2;
  const double span = 2.0 * s * dt;

  std::vector<double> d1x(T, 0.0), d1y(T, 0.0);
  for (int i = s; i < T - s; ++i) {
    d1x[i] = (headings[i + s].x - headings[i - s].x) / span;
    d1y[i] = (headings[i + s].y - headings[i - s].y) / span;
  }
  std::vector<double> k(T, 0.0);
  for (int i = 2 * s; i < T - 2 * s; ++i) {
    const double d2x = (d1x[i + s] - d1x[i - s]) / span;
    const double d2y = (d1y[i + s] - d1y[i - s]) / span;
    const double num = std::abs(d1x[i] * d2y - d1y[i] * d2x);
    const double den =
        std::max(std::pow(d1x[i] * d1x[i] + d1y[i] * d1y[i], 1.5), 1e-12);
    k[i] = num / den;
  }
  return k;
}

std::vector<double> smoothed_acceleration(std::span<const AgentState> states, int w,
                                          double dt) {
  require_odd_window(w, "braking window w");
  const int T = static_cast<int>(states.size());
  if (T < 2 * w)
    throw std::invalid_argument("smoothed_acceleration: need length >= 2w");
  const int h = (w - 1) / 2;
  std::vector<double> speed(T);
  for (int i = 0; i < T; ++i) speed[i] = states[i].speed();

  std::vector<double> accel(T, 0.0);
  for (int i = h; i < T - h; ++i)
    accel[i] = (speed[i + h] - speed[i - h]) / (2.0 * h * dt);

  std::vector<double> sa(T, 0.0);
  for (int i = 2 * h; i < T - 2 * h; ++i) {
    double sum = 0.0;
    for (int j = -h; j <= h; ++j) sum += accel[i + j];
    sa[i] = sum / w;
  }
  return sa;
}

std::vector<double> angular_change_series(const std::vector<Vec2>& headings) {
  const int T = static_cast<int>(headings.size());
  if (T < 2) throw std::invalid_argument("angular_change_series: need length >= 2");
  std::vector<double> out(T, 0.0);
  for (int i = 1; i < T; ++i) {
    const Vec2 a = headings[i - 1].normalized();
    const Vec2 b = headings[i].normalized();
    const double dot = std::clamp(a.dot(b), -1.0, 1.0);
    out[i] = std::acos(dot);
  }
  return out;
}

std::vector<double> moving_average(const std::vector<double>& data, int w) {
  require_odd_window(w, "moving_average window");
  const int T = static_cast<int>(data.size());
  if (w > T) throw std::invalid_argument("moving_average: window exceeds series length");
  const int h = w / 2;
  std::vector<double> out(T, 0.0);
  for (int i = 0; i < T; ++i) {
    double sum = 0.0;
    const int lo = std::max(0, i - h), hi = std::min(T - 1, i + h);
    for (int j = lo; j <= hi; ++j) sum += data[j];
    out[i] = sum / w;  // zero padding outside the series
  }
  return out;
}

std::vector<IndexInterval> contiguous_intervals(const std::vector<int>& indices) {
  std::vector<IndexInterval> out;
  for (size_t i = 0; i < indices.size(); ++i) {
    if (i > 0 && indices[i] <= indices[i - 1])
      throw std::invalid_argument("contiguous_intervals: indices not strictly ascending");
    if (!out.empty() && indices[i] == out.back().end + 1)
      out.back().end = indices[i];
    else
      out.push_back({indices[i], indices[i]});
  }
  return out;
}

std::vector<IndexInterval> detect_zigzag(const AgentTrajectory& traj,
                                         const LabelerConfig& cfg, double dt) {
  std::vector<Vec2> headings;
  headings.reserve(traj.states.size());
  for (const auto& s : traj.states) headings.push_back(s.heading);
  const auto k = curvature_series(headings, cfg.zigzag_window, dt);
  return intervals_where(k, [&](double v) { return v > cfg.zigzag_k_threshold; });
}

std::vector<IndexInterval> detect_sudden_braking(const AgentTrajectory& traj,
                                                 const LabelerConfig& cfg, double dt) {
  const auto sa = smoothed_acceleration(traj.states, cfg.braking_window, dt);
  return intervals_where(sa, [&](double v) { return v < cfg.braking_threshold; });
}

std::vector<IndexInterval> detect_sudden_turns(const AgentTrajectory& traj,
                                               const LabelerConfig& cfg) {
  std::vector<Vec2> headings;
  headings.reserve(traj.states.size());
  for (const auto& s : traj.states) headings.push_back(s.heading);
  const auto dtheta = angular_change_series(headings);
  const int T = traj.length();
  std::vector<double> a_lat(T, 0.0);
  for (int i = 1; i + 1 < T; ++i) a_lat[i] = dtheta[i] * traj.states[i + 1].speed();
  return intervals_where(a_lat,
                         [&](double v) { return std::abs(v) > cfg.turn_threshold; });
}

std::vector<IndexInterval> detect_lane_weaving(const AgentTrajectory& traj,
                                               const LabelerConfig& cfg) {
  std::vector<double> flags(traj.lane_cross_flags.begin(), traj.lane_cross_flags.end());
  const auto m = moving_average(flags, cfg.lane_ma_window);
  auto candidates = intervals_where(m, [](double v) { return v > 0.5; });
  std::vector<IndexInterval> out;
  for (const auto& iv : candidates)
    if (iv.length() > cfg.lane_interval_threshold) out.push_back(iv);
  return out;
}

std::vector<IndexInterval> detect_tailgating(const AgentTrajectory& traj,
                                             const LabelerConfig& cfg) {
  // Proximity detector: minimum over the forward 60-degree lidar cone.
  // Ray j points at angle j * (360/240) degrees relative to the heading.
  const int T = traj.length();
  std::vector<int> candidates;
  for (int t = 0; t < T; ++t) {
    const auto& lidar = traj.sensors[t].lidar;
    if (lidar.size() != kLidarRays)
      throw std::invalid_argument("detect_tailgating: malformed lidar frame");
    double prox = std::numeric_limits<double>::infinity();
    for (int j = 0; j < kLidarRays; ++j) {
      const double deg = j * (360.0 / kLidarRays);
      const double rel = deg <= 180.0 ? deg : 360.0 - deg;
      if (rel <= 30.0) prox = std::min(prox, lidar[j]);
    }
    if (prox < cfg.tail_distance) candidates.push_back(t);
  }
  auto runs = contiguous_intervals(candidates);
  std::vector<IndexInterval> out;
  for (const auto& iv : runs)
    if (iv.length() >= cfg.tail_min_duration) out.push_back(iv);
  return out;
}

AnomalyReport label_trajectory(const AgentTrajectory& traj, const LabelerConfig& cfg,
                               double dt) {
  AnomalyReport r;
  auto put = [&](AnomalyType t, std::vector<IndexInterval> iv) {
    if (!iv.empty()) {
      r.intervals[t] = std::move(iv);
      r.is_anomalous = true;
    }
  };
  put(AnomalyType::Zigzag, detect_zigzag(traj, cfg, dt));
  put(AnomalyType::SuddenBraking, detect_sudden_braking(traj, cfg, dt));
  put(AnomalyType::SuddenTurn, detect_sudden_turns(traj, cfg));
  put(AnomalyType::LaneWeaving, detect_lane_weaving(traj, cfg));
  put(AnomalyType::Tailgating, detect_tailgating(traj, cfg));
  return r;
}

}  // namespace cpad
