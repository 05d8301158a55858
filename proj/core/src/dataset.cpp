#include "cpad/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cpad/rng.hpp"
#include "json.hpp"

namespace cpad {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json label_to_json(const AnomalyReport& r) {
  ordered_json j;
  j["anomalous"] = r.is_anomalous;
  ordered_json types = ordered_json::array();
  for (AnomalyType t : r.types()) types.push_back(to_string(t));
  j["types"] = std::move(types);
  ordered_json iv = ordered_json::object();
  for (const auto& [t, ranges] : r.intervals) {
    if (ranges.empty()) continue;
    ordered_json arr = ordered_json::array();
    for (const auto& range : ranges) arr.push_back({range.start, range.end});
    iv[to_string(t)] = std::move(arr);
  }
  j["intervals"] = std::move(iv);
  return j;
}

ordered_json scenario_to_json(const Scenario& s) {
  ordered_json j;
  j["scenario_id"] = s.scenario_id;
  j["dt"] = s.dt;
  ordered_json lanes = ordered_json::array();
  for (const auto& poly : s.lanes) {
    ordered_json pl = ordered_json::array();
    for (const auto& p : poly) pl.push_back({p.x, p.y});
    lanes.push_back(std::move(pl));
  }
  j["lanes"] = std::move(lanes);
  ordered_json agents = ordered_json::array();
  for (const auto& a : s.agents) {
    ordered_json ja;
    ja["agent_id"] = a.agent_id;
    ordered_json states = ordered_json::array();
    for (const auto& st : a.states)
      states.push_back({st.position.x, st.position.y, st.velocity.x, st.velocity.y,
                        st.heading.x, st.heading.y});
    ja["states"] = std::move(states);
    ordered_json lidar = ordered_json::array(), lane = ordered_json::array(),
                 side = ordered_json::array();
    for (const auto& f : a.sensors) {
      lidar.push_back(f.lidar);
      lane.push_back(f.lane);
      side.push_back(f.side);
    }
    ja["lidar"] = std::move(lidar);
    ja["lane"] = std::move(lane);
    ja["side"] = std::move(side);
    ordered_json cross = ordered_json::array();
    for (char c : a.lane_cross_flags) cross.push_back(static_cast<bool>(c));
    ja["lane_cross"] = std::move(cross);
    if (a.label)
      ja["label"] = label_to_json(*a.label);
    else
      ja["label"] = nullptr;
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);
  return j;
}

[[noreturn]] void schema_error(size_t line_no, const std::string& what) {
  throw DatasetError("line " + std::to_string(line_no) + ": " + what);
}

std::vector<double> parse_ray_row(const ordered_json& row, size_t expected,
                                  size_t line_no, const char* name) {
  if (!row.is_array() || row.size() != expected)
    schema_error(line_no, std::string(name) + " frame must have exactly " +
                              std::to_string(expected) + " entries");
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : row) {
    if (!v.is_number()) schema_error(line_no, std::string(name) + " entry not a number");
    out.push_back(v.get<double>());
  }
  return out;
}

AnomalyReport label_from_json(const ordered_json& j, size_t line_no) {
  AnomalyReport r;
  r.is_anomalous = j.at("anomalous").get<bool>();
  for (const auto& t : j.at("types"))
    r.intervals[anomaly_type_from_string(t.get<std::string>())];
  for (const auto& [key, arr] : j.at("intervals").items()) {
    AnomalyType t = anomaly_type_from_string(key);
    for (const auto& range : arr) {
      if (!range.is_array() || range.size() != 2)
        schema_error(line_no, "interval must be a [start, end] pair");
      r.intervals[t].push_back({range[0].get<int>(), range[1].get<int>()});
    }
  }
  if (!r.consistent())
    schema_error(line_no, "label inconsistent: anomalous flag vs types");
  return r;
}

Scenario scenario_from_json(const ordered_json& j, size_t line_no) {
  Scenario s;
  s.scenario_id = j.at("scenario_id").get<std::string>();
  s.dt = j.at("dt").get<double>();
  if (!(s.dt > 0.0)) schema_error(line_no, "dt must be positive");
  for (const auto& poly : j.at("lanes")) {
    std::vector<Vec2> pl;
    for (const auto& p : poly) {
      if (!p.is_array() || p.size() != 2)
        schema_error(line_no, "lane point must be [x, y]");
      pl.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    s.lanes.push_back(std::move(pl));
  }
  if (j.at("agents").empty()) schema_error(line_no, "scenario must have >= 1 agent");
  int common_T = -1;
  for (const auto& ja : j.at("agents")) {
    AgentTrajectory a;
    a.agent_id = ja.at("agent_id").get<std::string>();
    for (const auto& row : ja.at("states")) {
      if (!row.is_array() || row.size() != 6)
        schema_error(line_no, "state row must be [px,py,vx,vy,hx,hy]");
      AgentState st;
      st.position = {row[0].get<double>(), row[1].get<double>()};
      st.velocity = {row[2].get<double>(), row[3].get<double>()};
      st.heading = {row[4].get<double>(), row[5].get<double>()};
      a.states.push_back(st);
    }
    const auto& lidar = ja.at("lidar");
    const auto& lane = ja.at("lane");
    const auto& side = ja.at("side");
    if (lidar.size() != a.states.size() || lane.size() != a.states.size() ||
        side.size() != a.states.size())
      schema_error(line_no, "sensor series length differs from state series");
    for (size_t t = 0; t < a.states.size(); ++t) {
      SensorFrame f;
      f.lidar = parse_ray_row(lidar[t], kLidarRays, line_no, "lidar");
      f.lane = parse_ray_row(lane[t], kLaneRays, line_no, "lane");
      f.side = parse_ray_row(side[t], kSideRays, line_no, "side");
      a.sensors.push_back(std::move(f));
    }
    for (const auto& c : ja.at("lane_cross")) a.lane_cross_flags.push_back(c.get<bool>());
    if (!ja.at("label").is_null()) a.label = label_from_json(ja.at("label"), line_no);
    if (!a.lengths_consistent())
      schema_error(line_no, "agent " + a.agent_id + ": series lengths inconsistent or T < 2");
    if (common_T < 0) common_T = a.length();
    if (a.length() != common_T)
      schema_error(line_no, "agents disagree on trajectory length");
    s.agents.push_back(std::move(a));
  }
  return s;
}

}  // namespace

size_t write_dataset(const std::vector<Scenario>& scenarios, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot open for writing: " + path);
  for (const auto& s : scenarios) {
    out << scenario_to_json(s).dump() << '\n';
    if (!out) throw DatasetError("write failure on: " + path);
  }
  out.flush();
  if (!out) throw DatasetError("write failure on: " + path);
  return scenarios.size();
}

std::vector<Scenario> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open for reading: " + path);
  std::vector<Scenario> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      schema_error(line_no, std::string("invalid JSON: ") + e.what());
    }
    try {
      out.push_back(scenario_from_json(j, line_no));
    } catch (const nlohmann::json::exception& e) {
      schema_error(line_no, std::string("schema violation: ") + e.what());
    }
  }
  return out;
}

DatasetSplit make_split(const std::vector<Scenario>& scenarios,
                        const std::array<double, 3>& fractions, uint64_t seed) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  for (double f : fractions)
    if (f < 0.0) throw std::invalid_argument("split fractions must be nonnegative");

  const size_t n = scenarios.size();
  size_t nonzero_buckets = 0;
  for (double f : fractions)
    if (f > 0.0) ++nonzero_buckets;
  if (n < nonzero_buckets)
    throw std::invalid_argument("fewer scenarios than nonzero split buckets");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x51u));
  for (size_t i = n; i > 1; --i) {  // Fisher-Yates
    size_t j = rng.uniform_int(i);
    std::swap(order[i - 1], order[j]);
  }

  const size_t n_val = static_cast<size_t>(std::floor(fractions[1] * n));
  const size_t n_test = static_cast<size_t>(std::floor(fractions[2] * n));
  const size_t n_train = n - n_val - n_test;

  DatasetSplit split;
  auto emit = [&](std::vector<SampleRef>& dst, size_t lo, size_t hi) {
    for (size_t i = lo; i < hi; ++i) {
      const Scenario& s = scenarios[order[i]];
      for (const auto& a : s.agents) dst.push_back({s.scenario_id, a.agent_id});
    }
  };
  emit(split.train, 0, n_train);
  emit(split.val, n_train, n_train + n_val);
  emit(split.test, n_train + n_val, n);
  return split;
}

}  // namespace cpad
