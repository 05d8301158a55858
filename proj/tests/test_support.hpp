#pragma once

// Shared builders and oracles for the unit and acceptance suites.

#include <cmath>
#include <functional>
#include <vector>

#include "cpad/autodiff.hpp"
#include "cpad/generator.hpp"
#include "cpad/model.hpp"
#include "cpad/types.hpp"

namespace cpad::test {

// Trajectory with constant speed along +x, lane/side rays irrelevant.
inline AgentTrajectory straight_trajectory(int T, double speed, double dt,
                                           double max_range = 50.0) {
  AgentTrajectory traj;
  traj.agent_id = "a0";
  for (int t = 0; t < T; ++t) {
    AgentState st;
    st.heading = {1.0, 0.0};
    st.velocity = {speed, 0.0};
    st.position = {speed * dt * t, 1.75};
    traj.states.push_back(st);
    SensorFrame f;
    std::fill(f.lidar.begin(), f.lidar.end(), max_range);
    std::fill(f.lane.begin(), f.lane.end(), max_range);
    std::fill(f.side.begin(), f.side.end(), max_range);
    traj.sensors.push_back(std::move(f));
    traj.lane_cross_flags.push_back(0);
  }
  return traj;
}

// Trajectory whose heading angle follows phi(t); speeds per step.
inline AgentTrajectory trajectory_from_phi(const std::vector<double>& phi,
                                           const std::vector<double>& speeds,
                                           double dt) {
  AgentTrajectory traj = straight_trajectory(static_cast<int>(phi.size()),
                                             speeds.empty() ? 10.0 : speeds[0], dt);
  Vec2 pos{0.0, 0.0};
  for (size_t t = 0; t < phi.size(); ++t) {
    const double v = speeds.empty() ? 10.0 : speeds[t];
    AgentState& st = traj.states[t];
    st.heading = {std::cos(phi[t]), std::sin(phi[t])};
    st.velocity = st.heading * v;
    st.position = pos;
    pos = pos + st.velocity * dt;
  }
  return traj;
}

// Central-difference numeric gradient of a scalar function of several tensors.
inline std::vector<Tensor> numeric_gradient(
    const std::function<double(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> inputs, double eps = 1e-5) {
  std::vector<Tensor> grads;
  for (size_t i = 0; i < inputs.size(); ++i) {
    Tensor g(inputs[i].shape, 0.0);
    for (size_t j = 0; j < inputs[i].data.size(); ++j) {
      const double orig = inputs[i].data[j];
      inputs[i].data[j] = orig + eps;
      const double hi = f(inputs);
      inputs[i].data[j] = orig - eps;
      const double lo = f(inputs);
      inputs[i].data[j] = orig;
      g.data[j] = (hi - lo) / (2.0 * eps);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

// Relative-error gate used by every gradient check: the analytic and numeric
// values must agree to 1e-4 relative, with a small absolute floor for
// components whose true gradient is ~0 (the finite-difference noise floor is
// ~1e-10, so 1e-7 absolute still bites).
inline bool grad_close(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  if (diff <= 1e-7) return true;
  return diff <= 1e-4 * std::max(std::abs(analytic), std::abs(numeric));
}

struct GradCheckResult {
  bool ok = true;
  double worst_rel = 0.0;
  long checked = 0;
  long skipped_kinks = 0;
  std::string where;
};

// Compares backward() gradients of `build` (graph construction from leaf
// params) against central finite differences, element by element. Elements
// whose epsilon and epsilon/2 difference quotients disagree sit on a
// non-smooth point (relu/leaky/clamp kink); no derivative exists there to
// compare against, so they are skipped and counted. With `max_elements` > 0,
// a deterministic subsample of coordinates per tensor is checked instead of
// every coordinate.
inline GradCheckResult check_gradients(
    const std::function<Var(const std::vector<Var>&)>& build,
    std::vector<Tensor> inputs, long max_elements = 0, uint64_t sample_seed = 0) {
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(Var::param(t));
  const Var loss = build(leaves);
  backward(loss);

  auto eval = [&]() {
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(Var::constant(t));
    return build(vars).value().data[0];
  };
  auto fd_at = [&](size_t i, size_t j, double eps) {
    const double orig = inputs[i].data[j];
    inputs[i].data[j] = orig + eps;
    const double hi = eval();
    inputs[i].data[j] = orig - eps;
    const double lo = eval();
    inputs[i].data[j] = orig;
    return (hi - lo) / (2.0 * eps);
  };
  const double f0 = eval();
  // at a relu/leaky/clamp kink the one-sided quotients differ by the slope
  // jump; for smooth coordinates they differ by O(eps)
  auto straddles_kink = [&](size_t i, size_t j, double eps) {
    const double orig = inputs[i].data[j];
    inputs[i].data[j] = orig + eps;
    const double hi = eval();
    inputs[i].data[j] = orig - eps;
    const double lo = eval();
    inputs[i].data[j] = orig;
    const double fwd = (hi - f0) / eps;
    const double bwd = (f0 - lo) / eps;
    return std::abs(fwd - bwd) /
               std::max({std::abs(fwd), std::abs(bwd), 1e-7}) >
           1e-3;
  };

  int64_t total_elems = 0;
  for (const auto& t : inputs) total_elems += t.numel();

  Rng pick(mix_seed(sample_seed, 0x5a3));
  GradCheckResult res;
  const double eps = 1e-5;
  for (size_t i = 0; i < leaves.size(); ++i) {
    const Tensor& g = leaves[i].grad();
    const int64_t n = inputs[i].numel();
    // per-tensor quota proportional to size, at least 4 coordinates
    int64_t quota = n;
    if (max_elements > 0)
      quota = std::min<int64_t>(
          n, std::max<int64_t>(4, max_elements * n / std::max<int64_t>(1, total_elems)));
    for (int64_t q = 0; q < quota; ++q) {
      const size_t j =
          max_elements > 0 ? static_cast<size_t>(pick.uniform_int(n)) : q;
      const double a = g.data.empty() ? 0.0 : g.data[j];
      const double num = fd_at(i, j, eps);
      const double rel =
          std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-7});
      ++res.checked;
      if (!grad_close(a, num)) {
        const double num_half = fd_at(i, j, eps / 2.0);
        const double fd_disagreement =
            std::abs(num - num_half) /
            std::max({std::abs(num), std::abs(num_half), 1e-7});
        if (fd_disagreement > 1e-2 || straddles_kink(i, j, eps) ||
            straddles_kink(i, j, eps / 2.0)) {
          ++res.skipped_kinks;
          continue;
        }
        res.ok = false;
        res.where = "input " + std::to_string(i) + " elem " + std::to_string(j);
      }
      res.worst_rel = std::max(res.worst_rel, rel);
    }
  }
  return res;
}

inline Tensor random_tensor(int rows, int cols, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t({rows, cols});
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Labeler windows scaled down so short test trajectories satisfy the stencil
// preconditions.
inline LabelerConfig fitted_labeler(int T) {
  LabelerConfig c;
  if (T < c.zigzag_window + 2) c.zigzag_window = std::max(4, T - 2);
  if (T < 2 * c.braking_window) c.braking_window = 3;
  if (T < c.lane_ma_window) c.lane_ma_window = 3;
  c.tail_min_duration = std::min(c.tail_min_duration, std::max(1, T / 2));
  c.lane_interval_threshold = std::min(c.lane_interval_threshold, std::max(1, T / 2));
  return c;
}

inline Scenario gen_scenario(int n_agents, int T, uint64_t seed, uint64_t index = 0) {
  GenConfig cfg;
  cfg.n_agents = n_agents;
  cfg.T = T;
  cfg.seed = seed;
  return simulate_scenario_scripted(cfg, index, fitted_labeler(T)).scenario;
}

// Small labeled scenario set for trainer tests.
inline std::vector<Scenario> toy_dataset(int n_scenarios, int n_agents, int T,
                                         uint64_t seed) {
  GenConfig cfg;
  cfg.n_agents = n_agents;
  cfg.T = T;
  cfg.seed = seed;
  const LabelerConfig lc = fitted_labeler(T);
  std::vector<Scenario> out;
  out.reserve(n_scenarios);
  for (int i = 0; i < n_scenarios; ++i)
    out.push_back(
        simulate_scenario_scripted(cfg, static_cast<uint64_t>(i), lc).scenario);
  return out;
}

inline Hyperparams tiny_hyperparams(int t_max = 64) {
  Hyperparams hp;
  hp.hidden = 16;
  hp.gat_heads = 2;
  hp.enc_layers = 1;
  hp.enc_heads = 2;
  hp.t_max = t_max;
  return hp;
}

}  // namespace cpad::test
