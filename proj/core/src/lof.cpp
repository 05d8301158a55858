#include "cpad/lof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cpad {

namespace {

constexpr double kDistFloor = 1e-12;

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::max(std::sqrt(s), kDistFloor);
}

struct Stats {
  double mean = 0.0, sd = 0.0, mx = 0.0;
};

Stats stats_of(const std::vector<double>& xs) {
  Stats s;
  if (xs.empty()) return s;
  double sum = 0.0;
  s.mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) {
    sum += x;
    s.mx = std::max(s.mx, x);
  }
  s.mean = sum / xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(var / xs.size());
  return s;
}

// Neighborhood of a query against a reference set: the k-distance and every
// reference index within it (ties included), per the classic definition.
struct Neighborhood {
  double k_distance;
  std::vector<int> idx;
};

Neighborhood neighborhood(const std::vector<double>& query,
                          const std::vector<std::vector<double>>& ref, int k,
                          int skip_index) {
  std::vector<std::pair<double, int>> dists;
  dists.reserve(ref.size());
  for (int i = 0; i < static_cast<int>(ref.size()); ++i) {
    if (i == skip_index) continue;
    dists.push_back({distance(query, ref[i]), i});
  }
  if (static_cast<int>(dists.size()) < k)
    throw std::invalid_argument("lof: need at least k+1 points");
  std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
  const double kdist = dists[k - 1].first;
  Neighborhood nb;
  nb.k_distance = kdist;
  for (const auto& [d, i] : dists)
    if (d <= kdist) nb.idx.push_back(i);
  std::sort(nb.idx.begin(), nb.idx.end());
  return nb;
}

// local reachability density of each reference point within the reference set
std::vector<double> reference_lrd(const std::vector<std::vector<double>>& ref, int k,
                                  std::vector<Neighborhood>& nbs) {
  const int n = static_cast<int>(ref.size());
  nbs.clear();
  nbs.reserve(n);
  for (int i = 0; i < n; ++i) nbs.push_back(neighborhood(ref[i], ref, k, i));
  std::vector<double> lrd(n);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j : nbs[i].idx)
      sum += std::max(nbs[j].k_distance, distance(ref[i], ref[j]));
    lrd[i] = nbs[i].idx.size() / std::max(sum, kDistFloor);
  }
  return lrd;
}

}  // namespace

void LofConfig::validate() const {
  if (k < 1) throw std::invalid_argument("LOF k must be >= 1");
  if (!(threshold > 0.0)) throw std::invalid_argument("LOF threshold must be > 0");
}

std::array<double, kLofFeatureDim> featurize_trajectory(const AgentTrajectory& traj,
                                                        const LabelerConfig& cfg,
                                                        double dt) {
  const int T = traj.length();
  std::vector<double> speeds(T);
  std::vector<Vec2> headings(T);
  for (int i = 0; i < T; ++i) {
    speeds[i] = traj.states[i].speed();
    headings[i] = traj.states[i].heading;
  }
  std::vector<double> abs_sa;
  for (double v : smoothed_acceleration(traj.states, cfg.braking_window, dt))
    abs_sa.push_back(std::abs(v));
  const auto dtheta = angular_change_series(headings);
  const auto k = curvature_series(headings, cfg.zigzag_window, dt);

  double cross_rate = 0.0;
  for (char c : traj.lane_cross_flags) cross_rate += c != 0;
  cross_rate /= T;

  double min_prox = std::numeric_limits<double>::infinity();
  for (const auto& f : traj.sensors)
    for (int j = 0; j < kLidarRays; ++j) {
      const double deg = j * (360.0 / kLidarRays);
      const double rel = deg <= 180.0 ? deg : 360.0 - deg;
      if (rel <= 30.0) min_prox = std::min(min_prox, f.lidar[j]);
    }

  const Stats sv = stats_of(speeds);
  const Stats sa = stats_of(abs_sa);
  const Stats sd = stats_of(dtheta);
  const Stats sk = stats_of(k);
  return {sv.mean, sv.sd, sv.mx, sa.mean, sa.sd, sa.mx,
          sd.mean, sd.sd, sd.mx, sk.mx, cross_rate, min_prox};
}

std::vector<double> lof_scores(const std::vector<std::vector<double>>& points, int k) {
  const int n = static_cast<int>(points.size());
  if (n < k + 1) throw std::invalid_argument("lof_scores: need at least k+1 points");
  std::vector<Neighborhood> nbs;
  const std::vector<double> lrd = reference_lrd(points, k, nbs);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j : nbs[i].idx) sum += lrd[j];
    out[i] = sum / (nbs[i].idx.size() * std::max(lrd[i], kDistFloor));
  }
  return out;
}

LofResult lof_classify(const std::vector<std::vector<double>>& train_points,
                       const std::vector<std::vector<double>>& test_points,
                       const LofConfig& cfg) {
  cfg.validate();
  if (train_points.size() < static_cast<size_t>(cfg.k + 1))
    throw std::invalid_argument("lof_classify: training set smaller than k+1");
  const size_t dim = train_points.front().size();

  // z-score with training statistics; constant features stay untouched
  std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
  for (const auto& p : train_points)
    for (size_t d = 0; d < dim; ++d) mean[d] += p[d];
  for (size_t d = 0; d < dim; ++d) mean[d] /= train_points.size();
  for (const auto& p : train_points)
    for (size_t d = 0; d < dim; ++d) sd[d] += (p[d] - mean[d]) * (p[d] - mean[d]);
  for (size_t d = 0; d < dim; ++d) {
    sd[d] = std::sqrt(sd[d] / train_points.size());
    if (sd[d] < 1e-12) sd[d] = 1.0;
  }
  auto zscore = [&](const std::vector<double>& p) {
    std::vector<double> z(dim);
    for (size_t d = 0; d < dim; ++d) z[d] = (p[d] - mean[d]) / sd[d];
    return z;
  };
  std::vector<std::vector<double>> train_z, test_z;
  train_z.reserve(train_points.size());
  for (const auto& p : train_points) train_z.push_back(zscore(p));
  test_z.reserve(test_points.size());
  for (const auto& p : test_points) test_z.push_back(zscore(p));

  std::vector<Neighborhood> train_nbs;
  const std::vector<double> train_lrd = reference_lrd(train_z, cfg.k, train_nbs);

  LofResult res;
  res.labels.reserve(test_z.size());
  res.scores.reserve(test_z.size());
  for (const auto& q : test_z) {
    const Neighborhood nb = neighborhood(q, train_z, cfg.k, -1);
    double reach_sum = 0.0, lrd_sum = 0.0;
    for (int j : nb.idx) {
      reach_sum += std::max(train_nbs[j].k_distance, distance(q, train_z[j]));
      lrd_sum += train_lrd[j];
    }
    const double lrd_q = nb.idx.size() / std::max(reach_sum, kDistFloor);
    const double score = lrd_sum / (nb.idx.size() * std::max(lrd_q, kDistFloor));
    res.scores.push_back(score);
    res.labels.push_back(score > cfg.threshold ? 1 : 0);
  }
  return res;
}

}  // namespace cpad
