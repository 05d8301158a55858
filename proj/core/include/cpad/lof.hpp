#pragma once

#include <array>
#include <vector>

#include "cpad/labeler.hpp"
#include "cpad/types.hpp"

namespace cpad {

struct LofConfig {
  int k = 20;
  double threshold = 1.5;

  void validate() const;
};

inline constexpr int kLofFeatureDim = 12;

// Per-trajectory summary feature vector, documented order:
//   0..2  mean/std/max of speed
//   3..5  mean/std/max of |smoothed acceleration|
//   6..8  mean/std/max of per-frame heading change
//   9     max curvature
//   10    lane-cross flag rate
//   11    min forward-cone lidar proximity
std::array<double, kLofFeatureDim> featurize_trajectory(const AgentTrajectory& traj,
                                                        const LabelerConfig& cfg,
                                                        double dt);

// Classic LOF over one point set with exhaustive neighbor search. Distances
// are floored at 1e-12 so duplicate points score 1.
std::vector<double> lof_scores(const std::vector<std::vector<double>>& points, int k);

struct LofResult {
  std::vector<int> labels;      // 1 = anomalous (LOF > threshold)
  std::vector<double> scores;   // raw LOF values, reusable for AUC
};

// Unsupervised fit on the training points (features are z-scored with the
// training statistics), then scores each test point against the training set.
LofResult lof_classify(const std::vector<std::vector<double>>& train_points,
                       const std::vector<std::vector<double>>& test_points,
                       const LofConfig& cfg);

}  // namespace cpad
