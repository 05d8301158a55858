#include <cmath>

#include "cpad/blackout.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cpad;

TEST_CASE("random_stepwise_mask: zero percentage masks nothing") {
  const BlackoutMask m = random_stepwise_mask(6, 100, 0, 0.0, 42);
  CHECK(m.masked_count() == 0);
}

TEST_CASE("random_stepwise_mask: exact slot budget") {
  const BlackoutMask m = random_stepwise_mask(6, 100, 2, 0.25, 7);
  CHECK(m.masked_count() == 125);  // round(0.25 * 5 * 100)
  for (double pct : {0.02, 0.05, 0.08, 0.10, 0.15, 0.25}) {
    const BlackoutMask mm = random_stepwise_mask(6, 100, 0, pct, 3);
    CHECK(mm.masked_count() == BlackoutMask::slot_budget(6, 100, pct));
  }
}

TEST_CASE("random_stepwise_mask: ego row stays clear; bad pct rejected") {
  const BlackoutMask m = random_stepwise_mask(5, 60, 3, 0.3, 1);
  for (int t = 0; t < 60; ++t) CHECK_FALSE(m.masked(3, t));
  CHECK_THROWS_AS(random_stepwise_mask(5, 60, 0, -0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(random_stepwise_mask(5, 60, 0, 1.1, 1), std::invalid_argument);
}

TEST_CASE("random_stepwise_mask: per-agent counts are uniform across seeds") {
  const int n_agents = 6, T = 100;
  const double pct = 0.2;
  std::vector<long> per_agent(n_agents, 0);
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    const BlackoutMask m = random_stepwise_mask(n_agents, T, 0, pct, seed);
    for (int a = 1; a < n_agents; ++a)
      for (int t = 0; t < T; ++t) per_agent[a] += m.masked(a, t);
  }
  const double expected = 1000.0 * pct * T;  // per non-ego agent
  for (int a = 1; a < n_agents; ++a)
    CHECK(std::abs(per_agent[a] - expected) / expected < 0.05);
}

TEST_CASE("random_stepwise_mask: deterministic per seed") {
  const BlackoutMask a = random_stepwise_mask(6, 100, 1, 0.15, 99);
  const BlackoutMask b = random_stepwise_mask(6, 100, 1, 0.15, 99);
  CHECK(a.grid == b.grid);
}

TEST_CASE("sequential_block_mask: budget, run bound, ego row") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    for (double pct : {0.02, 0.05, 0.08, 0.10, 0.15, 0.25}) {
      const BlackoutMask m = sequential_block_mask(6, 100, 0, pct, 10, seed);
      CHECK(m.masked_count() == BlackoutMask::slot_budget(6, 100, pct));
      for (int t = 0; t < 100; ++t) CHECK_FALSE(m.masked(0, t));
      for (int a = 1; a < 6; ++a) {
        int run = 0;
        for (int t = 0; t < 100; ++t) {
          run = m.masked(a, t) ? run + 1 : 0;
          CHECK(run <= 10);
        }
      }
    }
  }
}

TEST_CASE("sequential_block_mask: zero pct and determinism") {
  CHECK(sequential_block_mask(6, 100, 0, 0.0, 10, 5).masked_count() == 0);
  const BlackoutMask a = sequential_block_mask(6, 100, 2, 0.25, 10, 31);
  const BlackoutMask b = sequential_block_mask(6, 100, 2, 0.25, 10, 31);
  CHECK(a.grid == b.grid);
}

TEST_CASE("sequential_block_mask: unattainable budget under the run bound errors") {
  // pct = 1 needs full rows, impossible with gaps forced every max_block
  CHECK_THROWS_AS(sequential_block_mask(2, 100, 0, 1.0, 10, 3), std::invalid_argument);
}

TEST_CASE("apply_mask: dimension and ego contracts") {
  const Scenario s = test::gen_scenario(3, 20, 4);
  BlackoutMask m;
  m.n_agents = 3;
  m.timesteps = 20;
  m.ego_index = 0;
  m.grid.assign(3 * 20, 0);
  const MaskedScenario view = apply_mask(s, 0, m);
  CHECK(view.scenario == &s);

  BlackoutMask bad = m;
  bad.grid[0 * 20 + 3] = 1;  // covers the ego
  CHECK_THROWS_AS(apply_mask(s, 0, bad), std::invalid_argument);

  BlackoutMask wrong = m;
  wrong.timesteps = 19;
  wrong.grid.assign(3 * 19, 0);
  CHECK_THROWS_AS(apply_mask(s, 0, wrong), std::invalid_argument);
}
