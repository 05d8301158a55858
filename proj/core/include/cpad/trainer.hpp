#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpad/blackout.hpp"
#include "cpad/kvconfig.hpp"
#include "cpad/metrics.hpp"
#include "cpad/model.hpp"
#include "cpad/types.hpp"

namespace cpad {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-3;
  double pos_weight = 3.0;
  uint64_t seed = 0;
  int patience = 5;  // early stop on validation F1
  std::array<double, 3> fractions = {0.8, 0.1, 0.1};
  int threads = 0;  // 0 = hardware concurrency
  // Blackout applied during training batches; off by default (blackouts are a
  // test-time robustness setting).
  std::optional<double> train_blackout_pct;

  void validate() const;
  static TrainConfig from_kv(const KeyValueConfig& kv);
};

struct EpochLog {
  int epoch;
  double train_loss;
  double val_f1;
};

struct TrainResult {
  ModelParams best_params;
  double best_val_f1 = 0.0;
  int best_epoch = -1;
  std::vector<EpochLog> log;
};

struct BlackoutSpec {
  BlackoutMode mode = BlackoutMode::RandomStepwise;
  double pct = 0.0;
  int max_block = 10;
  uint64_t seed = 0;
};

struct SampleProb {
  SampleRef ref;
  int label;
  double probability;
};

struct EvalResult {
  MetricsReport report;
  std::vector<SampleProb> probs;
};

// Mini-batch training on the split's train segment with per-epoch validation
// F1; returns the best-validation checkpoint. Deterministic given the config
// seed. Throws if any referenced trajectory is unlabeled.
TrainResult train(const std::vector<Scenario>& scenarios, const DatasetSplit& split,
                  const TrainConfig& cfg, const Hyperparams& hp);

// Scores every sample of the segment (optionally under per-sample blackout
// masks derived from spec.seed) and computes the full metrics set.
EvalResult evaluate(const ModelParams& params, const std::vector<Scenario>& scenarios,
                    const std::vector<SampleRef>& segment, const BlackoutSpec* blackout,
                    int threads = 0);

// Test seam used by evaluate: metrics over externally supplied probabilities.
EvalResult evaluate_probs(const std::vector<SampleProb>& probs);

void write_train_log_csv(const std::vector<EpochLog>& log, const std::string& path);
void write_probs_csv(const std::vector<SampleProb>& probs, const std::string& path);

}  // namespace cpad
