#include <benchmark/benchmark.h>

#include "cpad/generator.hpp"
#include "cpad/labeler.hpp"
#include "cpad/metrics.hpp"
#include "cpad/model.hpp"
#include "cpad/rng.hpp"

namespace {

using namespace cpad;

Scenario bench_scenario() {
  GenConfig cfg;
  cfg.seed = 1;
  return simulate_scenario(cfg, 0);
}

void BM_SimulateScenario(benchmark::State& state) {
  GenConfig cfg;
  cfg.seed = 2;
  uint64_t i = 0;
  for (auto _ : state) {
    Scenario s = simulate_scenario(cfg, i++ % 16);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_SimulateScenario)->Unit(benchmark::kMillisecond);

void BM_RaycastFrame(benchmark::State& state) {
  GenConfig cfg;
  const RoadGeometry road = make_straight_road(cfg, -200, 400);
  Rng rng(3);
  std::vector<AgentState> frame(6);
  for (auto& s : frame) {
    s.position = {rng.uniform(0.0, 150.0), rng.uniform(0.5, 10.0)};
    s.heading = Vec2{1.0, 0.0}.rotated(rng.uniform(-0.3, 0.3));
    s.velocity = s.heading * 10.0;
  }
  for (auto _ : state) {
    const SensorFrame f = raycast_sensors(frame, 0, road, cfg.max_range);
    benchmark::DoNotOptimize(f);
  }
}
BENCHMARK(BM_RaycastFrame)->Unit(benchmark::kMicrosecond);

void BM_LabelTrajectory(benchmark::State& state) {
  const Scenario s = bench_scenario();
  const LabelerConfig cfg;
  size_t i = 0;
  for (auto _ : state) {
    const AnomalyReport r =
        label_trajectory(s.agents[i++ % s.agents.size()], cfg, s.dt);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_LabelTrajectory)->Unit(benchmark::kMicrosecond);

void BM_ForwardPass(benchmark::State& state) {
  const Scenario s = bench_scenario();
  Hyperparams hp;
  const ModelParams params = init_params(hp, 7);
  for (auto _ : state) {
    const double p = forward(s, 0, nullptr, params);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_ForwardPass)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const Scenario s = bench_scenario();
  Hyperparams hp;
  ModelParams params = init_params(hp, 7);
  for (auto _ : state) {
    const ModelVars vars = lift(params);
    const Var prob = forward_graph(s, 0, nullptr, vars, hp);
    const Var loss = bce_loss_graph(prob, {1}, 3.0);
    backward(loss);
    benchmark::DoNotOptimize(loss.value().data[0]);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_RocAuc(benchmark::State& state) {
  Rng rng(5);
  const int n = static_cast<int>(state.range(0));
  std::vector<int> labels(n);
  std::vector<double> scores(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = rng.bernoulli(0.3) ? 1 : 0;
    scores[i] = rng.uniform();
  }
  labels[0] = 1;
  labels[1] = 0;
  for (auto _ : state) {
    const RocResult r = roc_auc(labels, scores);
    benchmark::DoNotOptimize(r.auc);
  }
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
