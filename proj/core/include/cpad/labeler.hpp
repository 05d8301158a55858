#pragma once

#include <span>
#include <vector>

#include "cpad/kvconfig.hpp"
#include "cpad/types.hpp"

namespace cpad {

struct LabelerConfig {
  int zigzag_window = 40;           // samples; finite-difference stencil width
  double zigzag_k_threshold = 0.5;  // 1/m, strict >
  int braking_window = 5;           // samples, odd
  double braking_threshold = -4.0;  // m/s^2, strict <
  double turn_threshold = 0.8;      // m/s^2, strict > on |a_lat|
  int lane_ma_window = 11;          // samples, odd
  int lane_interval_threshold = 10; // samples, strict > on interval length
  double tail_distance = 6.0;       // m, strict <
  int tail_min_duration = 10;       // samples, >= on run length

  void validate() const;
  static LabelerConfig from_kv(const KeyValueConfig& kv);
};

// Curvature of the heading-component curve per the window/2-stride central
// difference scheme. Boundary samples without a full stencil carry k = 0; the
// denominator is floored at 1e-12.
std::vector<double> curvature_series(const std::vector<Vec2>& headings, int window,
                                     double dt);

// Speed differences over the centered braking window, then a same-width moving
// average. Boundary samples without a full stencil carry SA = 0.
std::vector<double> smoothed_acceleration(std::span<const AgentState> states, int w,
                                          double dt);

// Per-frame heading angle change, radians; index 0 carries 0. The arccos
// argument is clipped to [-1, 1].
std::vector<double> angular_change_series(const std::vector<Vec2>& headings);

// Centered zero-padded convolution with a ones/w kernel; w odd, w <= length.
std::vector<double> moving_average(const std::vector<double>& data, int w);

// Maximal runs of consecutive integers as inclusive [start, end] intervals.
// Input must be sorted ascending and unique.
std::vector<IndexInterval> contiguous_intervals(const std::vector<int>& indices);

std::vector<IndexInterval> detect_zigzag(const AgentTrajectory& traj,
                                         const LabelerConfig& cfg, double dt);
std::vector<IndexInterval> detect_sudden_braking(const AgentTrajectory& traj,
                                                 const LabelerConfig& cfg, double dt);
std::vector<IndexInterval> detect_sudden_turns(const AgentTrajectory& traj,
                                               const LabelerConfig& cfg);
std::vector<IndexInterval> detect_lane_weaving(const AgentTrajectory& traj,
                                               const LabelerConfig& cfg);
std::vector<IndexInterval> detect_tailgating(const AgentTrajectory& traj,
                                             const LabelerConfig& cfg);

// Runs all five detectors; a trajectory is anomalous iff any detector returned
// a nonempty interval list.
AnomalyReport label_trajectory(const AgentTrajectory& traj, const LabelerConfig& cfg,
                               double dt);

}  // namespace cpad
