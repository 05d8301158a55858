#pragma once

#include <cstdint>
#include <vector>

#include "cpad/types.hpp"

namespace cpad {

enum class BlackoutMode { RandomStepwise, Sequential };

const char* to_string(BlackoutMode m);
BlackoutMode blackout_mode_from_string(const std::string& s);

// Per-(agent, timestep) communication-availability grid; true = blacked out.
// The ego row is always false: the classifying vehicle's own perception is
// local, not communicated.
struct BlackoutMask {
  int n_agents = 0;
  int timesteps = 0;
  int ego_index = 0;
  BlackoutMode mode = BlackoutMode::RandomStepwise;
  double pct = 0.0;
  uint64_t seed = 0;
  std::vector<char> grid;  // n_agents * timesteps

  bool masked(int agent, int t) const {
    return grid[static_cast<size_t>(agent) * timesteps + t] != 0;
  }
  size_t masked_count() const;
  // The exact slot budget both modes must hit: round(pct * (n_agents-1) * T).
  static size_t slot_budget(int n_agents, int timesteps, double pct);
};

BlackoutMask random_stepwise_mask(int n_agents, int timesteps, int ego_index,
                                  double pct, uint64_t seed);

// Contiguous per-agent blocks with length uniform in [1, max_block]; blocks
// are truncated so no maximal masked run exceeds max_block and the slot
// budget is met exactly.
BlackoutMask sequential_block_mask(int n_agents, int timesteps, int ego_index,
                                   double pct, int max_block, uint64_t seed);

// Masked view consumed by forward(): at each timestep masked agents are
// absent from the node set, identical to deleting them.
struct MaskedScenario {
  const Scenario* scenario;
  int ego_index;
  const BlackoutMask* mask;
};

MaskedScenario apply_mask(const Scenario& scenario, int ego_index,
                          const BlackoutMask& mask);

}  // namespace cpad
