#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "cpad/dataset.hpp"
#include "cpad/generator.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cpad;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

bool scenarios_bit_equal(const Scenario& a, const Scenario& b) {
  if (a.scenario_id != b.scenario_id || a.dt != b.dt) return false;
  if (a.lanes.size() != b.lanes.size()) return false;
  for (size_t i = 0; i < a.lanes.size(); ++i)
    for (size_t j = 0; j < a.lanes[i].size(); ++j)
      if (a.lanes[i][j].x != b.lanes[i][j].x || a.lanes[i][j].y != b.lanes[i][j].y)
        return false;
  if (a.agents.size() != b.agents.size()) return false;
  for (size_t i = 0; i < a.agents.size(); ++i) {
    const auto& x = a.agents[i];
    const auto& y = b.agents[i];
    if (x.agent_id != y.agent_id || x.label != y.label) return false;
    if (x.lane_cross_flags != y.lane_cross_flags) return false;
    for (size_t t = 0; t < x.states.size(); ++t) {
      if (x.states[t].position.x != y.states[t].position.x) return false;
      if (x.states[t].position.y != y.states[t].position.y) return false;
      if (x.states[t].velocity.x != y.states[t].velocity.x) return false;
      if (x.states[t].velocity.y != y.states[t].velocity.y) return false;
      if (x.states[t].heading.x != y.states[t].heading.x) return false;
      if (x.states[t].heading.y != y.states[t].heading.y) return false;
      if (x.sensors[t].lidar != y.sensors[t].lidar) return false;
      if (x.sensors[t].lane != y.sensors[t].lane) return false;
      if (x.sensors[t].side != y.sensors[t].side) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("write_dataset: empty list writes zero lines") {
  TempFile f("cpad_empty.jsonl");
  CHECK(write_dataset({}, f.path) == 0);
  std::ifstream in(f.path);
  std::string line;
  CHECK_FALSE(static_cast<bool>(std::getline(in, line)));
}

TEST_CASE("dataset round trip is bit-exact") {
  GenConfig cfg;
  cfg.T = 60;
  cfg.seed = 11;
  std::vector<Scenario> scenarios;
  for (int i = 0; i < 3; ++i) scenarios.push_back(simulate_scenario(cfg, i));

  TempFile f("cpad_roundtrip.jsonl");
  CHECK(write_dataset(scenarios, f.path) == 3);
  const auto back = read_dataset(f.path);
  REQUIRE(back.size() == scenarios.size());
  for (size_t i = 0; i < back.size(); ++i)
    CHECK(scenarios_bit_equal(scenarios[i], back[i]));
}

TEST_CASE("write_dataset: one line per scenario") {
  const auto scenarios = test::toy_dataset(50, 2, 10, 0);
  TempFile f("cpad_count.jsonl");
  CHECK(write_dataset(scenarios, f.path) == 50);
  std::ifstream in(f.path);
  size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 50);
}

TEST_CASE("read_dataset: 239-ray lidar frame is a schema violation with line number") {
  auto scenarios = test::toy_dataset(2, 1, 10, 0);
  scenarios[1].agents[0].sensors[3].lidar.pop_back();

  TempFile f("cpad_badschema.jsonl");
  write_dataset(scenarios, f.path);
  try {
    read_dataset(f.path);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("240") != std::string::npos);
  }
}

TEST_CASE("read_dataset: malformed JSON carries its line number") {
  TempFile f("cpad_badjson.jsonl");
  {
    std::ofstream out(f.path);
    out << "{\"scenario_id\": \"ok\"" << '\n';
  }
  try {
    read_dataset(f.path);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("read_dataset: empty file yields empty list") {
  TempFile f("cpad_blank.jsonl");
  std::ofstream(f.path).close();
  CHECK(read_dataset(f.path).empty());
}

TEST_CASE("write_dataset: unwritable path raises naming the path") {
  try {
    write_dataset({}, "/nonexistent_dir/x.jsonl");
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find("/nonexistent_dir/x.jsonl") != std::string::npos);
  }
}

TEST_CASE("make_split: floor val/test, remainder to train") {
  const auto scenarios = test::toy_dataset(10, 2, 10, 5);
  const DatasetSplit s = make_split(scenarios, {0.8, 0.1, 0.1}, 7);
  // sizes are in (scenario, agent) samples; 2 agents per scenario
  CHECK(s.train.size() == 16);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 2);
}

TEST_CASE("make_split: deterministic and scenario-disjoint") {
  const auto scenarios = test::toy_dataset(12, 3, 10, 6);
  const DatasetSplit a = make_split(scenarios, {0.6, 0.2, 0.2}, 42);
  const DatasetSplit b = make_split(scenarios, {0.6, 0.2, 0.2}, 42);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);

  auto ids = [](const std::vector<SampleRef>& v) {
    std::set<std::string> out;
    for (const auto& r : v) out.insert(r.scenario_id);
    return out;
  };
  const auto tr = ids(a.train), va = ids(a.val), te = ids(a.test);
  for (const auto& id : tr) {
    CHECK(va.count(id) == 0);
    CHECK(te.count(id) == 0);
  }
  for (const auto& id : va) CHECK(te.count(id) == 0);
  CHECK(tr.size() + va.size() + te.size() == scenarios.size());
  CHECK(a.train.size() + a.val.size() + a.test.size() == scenarios.size() * 3);
}

TEST_CASE("make_split: all-train split and bucket underflow") {
  const auto scenarios = test::toy_dataset(4, 1, 10, 2);
  const DatasetSplit s = make_split(scenarios, {1.0, 0.0, 0.0}, 0);
  CHECK(s.train.size() == 4);
  CHECK(s.val.empty());
  CHECK(s.test.empty());

  const auto two = test::toy_dataset(2, 1, 10, 3);
  CHECK_THROWS_AS(make_split(two, {0.4, 0.3, 0.3}, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_split(two, {0.5, 0.2, 0.2}, 0), std::invalid_argument);
}
