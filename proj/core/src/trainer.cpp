#include "cpad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "cpad/rng.hpp"

namespace cpad {

namespace {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static round-robin partition; worker results land in caller-indexed slots so
// reductions are order-deterministic regardless of scheduling.
void parallel_for(int n, int threads, auto&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) fn(i);
    });
  for (auto& t : pool) t.join();
}

struct SampleIndex {
  const Scenario* scenario;
  int ego_index;
  int label;
};

std::vector<SampleIndex> resolve_samples(const std::vector<Scenario>& scenarios,
                                         const std::vector<SampleRef>& refs) {
  std::map<std::string, const Scenario*> by_id;
  for (const auto& s : scenarios) by_id[s.scenario_id] = &s;
  std::vector<SampleIndex> out;
  out.reserve(refs.size());
  for (const auto& r : refs) {
    auto it = by_id.find(r.scenario_id);
    if (it == by_id.end())
      throw std::invalid_argument("split references unknown scenario " + r.scenario_id);
    const Scenario& s = *it->second;
    const int ego = s.agent_index(r.agent_id);
    const auto& label = s.agents[ego].label;
    if (!label)
      throw std::invalid_argument("trajectory " + r.scenario_id + "/" + r.agent_id +
                                  " is unlabeled; run `label` first");
    out.push_back({&s, ego, label->is_anomalous ? 1 : 0});
  }
  return out;
}

double validation_f1(const ModelParams& params, const std::vector<SampleIndex>& val,
                     int threads) {
  if (val.empty()) return 0.0;
  std::vector<int> labels(val.size()), preds(val.size());
  parallel_for(static_cast<int>(val.size()), threads, [&](int i) {
    const double p = forward(*val[i].scenario, val[i].ego_index, nullptr, params);
    labels[i] = val[i].label;
    preds[i] = p > 0.5 ? 1 : 0;
  });
  return scalar_metrics(confusion(labels, preds)).f1;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (!(pos_weight > 0.0)) throw std::invalid_argument("pos_weight must be > 0");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  const double s = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  TrainConfig c;
  c.epochs = kv.get_int("epochs", c.epochs);
  c.batch_size = kv.get_int("batch_size", c.batch_size);
  c.lr = kv.get_double("lr", c.lr);
  c.pos_weight = kv.get_double("pos_weight", c.pos_weight);
  c.seed = kv.get_uint64("seed", c.seed);
  c.patience = kv.get_int("patience", c.patience);
  c.fractions[0] = kv.get_double("train_fraction", c.fractions[0]);
  c.fractions[1] = kv.get_double("val_fraction", c.fractions[1]);
  c.fractions[2] = kv.get_double("test_fraction", c.fractions[2]);
  c.threads = kv.get_int("threads", c.threads);
  c.validate();
  return c;
}

TrainResult train(const std::vector<Scenario>& scenarios, const DatasetSplit& split,
                  const TrainConfig& cfg, const Hyperparams& hp) {
  cfg.validate();
  hp.validate();
  const int threads = resolve_threads(cfg.threads);
  const auto train_samples = resolve_samples(scenarios, split.train);
  const auto val_samples = resolve_samples(scenarios, split.val);
  if (train_samples.empty()) throw std::invalid_argument("train split is empty");

  // split bookkeeping: training must never touch a test scenario
  {
    std::map<std::string, int> seg;
    for (const auto& r : split.test) seg[r.scenario_id] = 2;
    for (const auto& r : split.train)
      if (seg.count(r.scenario_id))
        throw std::invalid_argument("split leak: scenario " + r.scenario_id +
                                    " in both train and test");
  }

  ModelParams params = init_params(hp, cfg.seed);
  const auto refs = params.param_refs();
  AdamState adam;

  TrainResult result;
  result.best_params = params;

  Rng shuffle_rng(mix_seed(cfg.seed, 0x7ea1));
  std::vector<size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), 0);

  uint64_t mask_counter = 0;
  int epochs_since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = shuffle_rng.uniform_int(i);
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    size_t n_batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      const int bsz = static_cast<int>(end - start);

      // per-sample graphs evaluated in parallel into indexed slots, reduced in
      // sample order afterwards
      std::vector<std::vector<Tensor>> slot_grads(bsz);
      std::vector<double> slot_loss(bsz, 0.0);
      std::vector<std::optional<BlackoutMask>> masks(bsz);
      if (cfg.train_blackout_pct && *cfg.train_blackout_pct > 0.0) {
        for (int b = 0; b < bsz; ++b) {
          const SampleIndex& smp = train_samples[order[start + b]];
          masks[b] = random_stepwise_mask(
              static_cast<int>(smp.scenario->agents.size()),
              smp.scenario->timesteps(), smp.ego_index, *cfg.train_blackout_pct,
              mix_seed(cfg.seed, 0xb0 + mask_counter + b));
        }
      }
      mask_counter += bsz;

      parallel_for(bsz, threads, [&](int b) {
        const SampleIndex& smp = train_samples[order[start + b]];
        const ModelVars vars = lift(params);
        const Var prob = forward_graph(*smp.scenario, smp.ego_index,
                                       masks[b] ? &*masks[b] : nullptr, vars, hp);
        const std::vector<int> lbl = {smp.label};
        const Var loss = bce_loss_graph(prob, lbl, cfg.pos_weight);
        backward(loss);
        slot_loss[b] = loss.value().data[0];
        slot_grads[b].reserve(vars.leaves.size());
        for (const auto& leaf : vars.leaves) slot_grads[b].push_back(leaf.grad());
      });

      // batch gradient = mean over samples, accumulated in slot order
      std::vector<Tensor> grad_sum;
      grad_sum.reserve(refs.size());
      for (const auto& ref : refs) grad_sum.emplace_back(ref.tensor->shape, 0.0);
      double batch_loss = 0.0;
      for (int b = 0; b < bsz; ++b) {
        batch_loss += slot_loss[b];
        for (size_t p = 0; p < grad_sum.size(); ++p) {
          const Tensor& g = slot_grads[b][p];
          if (g.data.empty()) continue;
          for (size_t q = 0; q < grad_sum[p].data.size(); ++q)
            grad_sum[p].data[q] += g.data[q];
        }
      }
      const double inv = 1.0 / bsz;
      for (auto& g : grad_sum)
        for (auto& v : g.data) v *= inv;
      batch_loss *= inv;

      std::vector<Tensor*> param_ptrs;
      std::vector<const Tensor*> grad_ptrs;
      param_ptrs.reserve(refs.size());
      grad_ptrs.reserve(refs.size());
      for (auto& ref : params.param_refs()) param_ptrs.push_back(ref.tensor);
      for (const auto& g : grad_sum) grad_ptrs.push_back(&g);
      adam_step(param_ptrs, grad_ptrs, adam, cfg.lr);

      epoch_loss += batch_loss;
      ++n_batches;
    }
    epoch_loss /= std::max<size_t>(1, n_batches);

    const double val_f1 = validation_f1(params, val_samples, threads);
    result.log.push_back({epoch + 1, epoch_loss, val_f1});

    if (result.best_epoch < 0 || val_f1 > result.best_val_f1) {
      result.best_val_f1 = val_f1;
      result.best_epoch = epoch + 1;
      result.best_params = params;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

EvalResult evaluate(const ModelParams& params, const std::vector<Scenario>& scenarios,
                    const std::vector<SampleRef>& segment, const BlackoutSpec* blackout,
                    int threads) {
  const auto samples = resolve_samples(scenarios, segment);
  const int n = static_cast<int>(samples.size());
  std::vector<SampleProb> probs(n);
  const int nthreads = resolve_threads(threads);
  parallel_for(n, nthreads, [&](int i) {
    const SampleIndex& smp = samples[i];
    std::optional<BlackoutMask> mask;
    if (blackout && blackout->pct > 0.0) {
      const uint64_t mask_seed = mix_seed(blackout->seed, static_cast<uint64_t>(i));
      const int n_agents = static_cast<int>(smp.scenario->agents.size());
      if (blackout->mode == BlackoutMode::RandomStepwise)
        mask = random_stepwise_mask(n_agents, smp.scenario->timesteps(),
                                    smp.ego_index, blackout->pct, mask_seed);
      else
        mask = sequential_block_mask(n_agents, smp.scenario->timesteps(),
                                     smp.ego_index, blackout->pct,
                                     blackout->max_block, mask_seed);
    }
    const double p =
        forward(*smp.scenario, smp.ego_index, mask ? &*mask : nullptr, params);
    probs[i] = {segment[i], smp.label, p};
  });
  return evaluate_probs(probs);
}

EvalResult evaluate_probs(const std::vector<SampleProb>& probs) {
  EvalResult res;
  res.probs = probs;
  std::vector<int> labels, preds;
  std::vector<double> scores;
  labels.reserve(probs.size());
  for (const auto& sp : probs) {
    labels.push_back(sp.label);
    preds.push_back(sp.probability > 0.5 ? 1 : 0);
    scores.push_back(sp.probability);
  }
  res.report.confusion = confusion(labels, preds);
  const ScalarMetrics m = scalar_metrics(res.report.confusion);
  res.report.precision = m.precision;
  res.report.recall = m.recall;
  res.report.f1 = m.f1;
  res.report.accuracy = m.accuracy;
  res.report.mcc = m.mcc;
  bool both_classes = false;
  for (size_t i = 1; i < labels.size(); ++i)
    if (labels[i] != labels[0]) both_classes = true;
  res.report.auc = both_classes ? roc_auc(labels, scores).auc : 0.0;
  return res;
}

void write_train_log_csv(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open training log for writing: " + path);
  out << "epoch,train_loss,val_f1\n";
  for (const auto& e : log)
    out << e.epoch << ',' << std::setprecision(17) << e.train_loss << ','
        << e.val_f1 << '\n';
}

void write_probs_csv(const std::vector<SampleProb>& probs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open probability CSV for writing: " + path);
  out << "scenario_id,agent_id,label,probability\n";
  for (const auto& sp : probs)
    out << sp.ref.scenario_id << ',' << sp.ref.agent_id << ',' << sp.label << ','
        << std::setprecision(17) << sp.probability << '\n';
}

}  // namespace cpad
