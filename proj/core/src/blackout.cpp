#include "cpad/blackout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cpad/rng.hpp"

namespace cpad {

const char* to_string(BlackoutMode m) {
  return m == BlackoutMode::RandomStepwise ? "random" : "sequential";
}

BlackoutMode blackout_mode_from_string(const std::string& s) {
  if (s == "random") return BlackoutMode::RandomStepwise;
  if (s == "sequential") return BlackoutMode::Sequential;
  throw std::invalid_argument("unknown blackout mode: " + s);
}

size_t BlackoutMask::masked_count() const {
  size_t n = 0;
  for (char c : grid) n += c != 0;
  return n;
}

size_t BlackoutMask::slot_budget(int n_agents, int timesteps, double pct) {
  return static_cast<size_t>(
      std::llround(pct * static_cast<double>(n_agents - 1) * timesteps));
}

namespace {

BlackoutMask make_empty(int n_agents, int timesteps, int ego_index, double pct,
                        BlackoutMode mode, uint64_t seed) {
  if (pct < 0.0 || pct > 1.0)
    throw std::invalid_argument("blackout pct must be in [0, 1]");
  if (n_agents < 1 || timesteps < 1)
    throw std::invalid_argument("blackout mask needs n_agents >= 1 and T >= 1");
  if (ego_index < 0 || ego_index >= n_agents)
    throw std::invalid_argument("blackout ego_index out of range");
  BlackoutMask m;
  m.n_agents = n_agents;
  m.timesteps = timesteps;
  m.ego_index = ego_index;
  m.mode = mode;
  m.pct = pct;
  m.seed = seed;
  m.grid.assign(static_cast<size_t>(n_agents) * timesteps, 0);
  return m;
}

}  // namespace

BlackoutMask random_stepwise_mask(int n_agents, int timesteps, int ego_index,
                                  double pct, uint64_t seed) {
  BlackoutMask m = make_empty(n_agents, timesteps, ego_index, pct,
                              BlackoutMode::RandomStepwise, seed);
  const size_t budget = BlackoutMask::slot_budget(n_agents, timesteps, pct);
  // draw budget distinct non-ego slots via a partial Fisher-Yates shuffle
  std::vector<uint32_t> slots;
  slots.reserve(static_cast<size_t>(n_agents - 1) * timesteps);
  for (int a = 0; a < n_agents; ++a) {
    if (a == ego_index) continue;
    for (int t = 0; t < timesteps; ++t)
      slots.push_back(static_cast<uint32_t>(a) * timesteps + t);
  }
  if (budget > slots.size())
    throw std::invalid_argument("blackout budget exceeds non-ego slot count");
  Rng rng(mix_seed(seed, 0xb1a));
  for (size_t i = 0; i < budget; ++i) {
    const size_t j = i + rng.uniform_int(slots.size() - i);
    std::swap(slots[i], slots[j]);
    m.grid[slots[i]] = 1;
  }
  return m;
}

BlackoutMask sequential_block_mask(int n_agents, int timesteps, int ego_index,
                                   double pct, int max_block, uint64_t seed) {
  if (max_block < 1) throw std::invalid_argument("max_block must be >= 1");
  BlackoutMask m = make_empty(n_agents, timesteps, ego_index, pct,
                              BlackoutMode::Sequential, seed);
  const size_t budget = BlackoutMask::slot_budget(n_agents, timesteps, pct);
  if (budget == 0) return m;
  if (n_agents < 2)
    throw std::invalid_argument("sequential blackout needs a non-ego agent");

  std::vector<int> others;
  for (int a = 0; a < n_agents; ++a)
    if (a != ego_index) others.push_back(a);

  Rng rng(mix_seed(seed, 0xb2b));
  size_t marked = 0;
  // A cell is addable when marking it keeps every maximal run <= max_block.
  auto run_with = [&](int agent, int t) {
    const char* row = m.grid.data() + static_cast<size_t>(agent) * timesteps;
    int lo = t, hi = t;
    while (lo > 0 && row[lo - 1]) --lo;
    while (hi + 1 < timesteps && row[hi + 1]) ++hi;
    return hi - lo + 1;
  };
  auto addable_anywhere = [&]() {
    for (int a : others)
      for (int t = 0; t < timesteps; ++t)
        if (!m.masked(a, t) && run_with(a, t) <= max_block) return true;
    return false;
  };

  size_t stall = 0;
  while (marked < budget) {
    const int agent = others[rng.uniform_int(others.size())];
    const int len = 1 + static_cast<int>(rng.uniform_int(
                            static_cast<uint64_t>(std::min(max_block, timesteps))));
    const int start = static_cast<int>(rng.uniform_int(
        static_cast<uint64_t>(timesteps - len + 1)));
    size_t added = 0;
    for (int t = start; t < start + len && marked < budget; ++t) {
      if (m.masked(agent, t)) continue;  // overlap truncation
      if (run_with(agent, t) > max_block) break;  // would merge runs past bound
      m.grid[static_cast<size_t>(agent) * timesteps + t] = 1;
      ++marked;
      ++added;
    }
    if (added == 0) {
      if (++stall >= 1024) {
        if (!addable_anywhere())
          throw std::invalid_argument(
              "sequential blackout budget unattainable under max_block run bound");
        stall = 0;
      }
    } else {
      stall = 0;
    }
  }
  return m;
}

MaskedScenario apply_mask(const Scenario& scenario, int ego_index,
                          const BlackoutMask& mask) {
  if (mask.n_agents != static_cast<int>(scenario.agents.size()) ||
      mask.timesteps != scenario.timesteps())
    throw std::invalid_argument("apply_mask: mask dims do not match scenario");
  for (int t = 0; t < mask.timesteps; ++t)
    if (mask.masked(ego_index, t))
      throw std::invalid_argument("apply_mask: mask covers the ego agent");
  return {&scenario, ego_index, &mask};
}

}  // namespace cpad
