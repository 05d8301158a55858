// cpad: command-line front end for the cooperative-perception anomaly
// detection pipeline: scenario generation, rule labeling, training,
// evaluation under communication blackouts, and the LOF baseline.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cpad/dataset.hpp"
#include "cpad/generator.hpp"
#include "cpad/labeler.hpp"
#include "cpad/lof.hpp"
#include "cpad/metrics.hpp"
#include "cpad/model.hpp"
#include "cpad/trainer.hpp"

namespace {

using namespace cpad;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

KeyValueConfig load_kv(const std::string& path) {
  if (path.empty()) return {};
  return KeyValueConfig::from_file(path);
}

std::vector<Scenario> load_data(const std::string& path) {
  try {
    return read_dataset(path);
  } catch (const DatasetError& e) {
    throw IoError(std::string("dataset ") + path + ": " + e.what());
  }
}

const std::vector<SampleRef>& pick_segment(const DatasetSplit& split,
                                           const std::string& name) {
  if (name == "train") return split.train;
  if (name == "val") return split.val;
  if (name == "test") return split.test;
  throw std::invalid_argument("unknown split segment: " + name);
}

std::vector<double> parse_pcts(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  if (out.empty()) throw std::invalid_argument("--pcts: empty list");
  return out;
}

int parallel_threads = 0;  // 0 = hardware concurrency

// ---------------------------------------------------------------- generate
struct GenerateArgs {
  int scenarios = 100;
  int agents = 6;
  uint64_t seed = 0;
  std::string out;
  std::string config;
  bool quiet = false;
};

void run_generate(const GenerateArgs& a) {
  KeyValueConfig kv = load_kv(a.config);
  GenConfig cfg = GenConfig::from_kv(kv);
  LabelerConfig labeler_cfg = LabelerConfig::from_kv(kv);
  kv.check_all_consumed();
  cfg.n_agents = a.agents;
  cfg.seed = a.seed;
  cfg.validate();

  std::vector<Scenario> scenarios(a.scenarios);
  std::vector<std::thread> pool;
  const int nt = parallel_threads > 0
                     ? parallel_threads
                     : std::max(1u, std::thread::hardware_concurrency());
  const int threads = std::min(nt, std::max(1, a.scenarios));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < a.scenarios; i += threads)
        scenarios[i] =
            simulate_scenario_scripted(cfg, static_cast<uint64_t>(i), labeler_cfg)
                .scenario;
    });
  for (auto& t : pool) t.join();

  try {
    write_dataset(scenarios, a.out);
  } catch (const DatasetError& e) {
    throw IoError(e.what());
  }

  if (!a.quiet) {
    size_t total = 0, anomalous = 0;
    std::map<std::string, size_t> per_type;
    for (const auto& s : scenarios)
      for (const auto& ag : s.agents) {
        ++total;
        if (ag.label && ag.label->is_anomalous) {
          ++anomalous;
          for (AnomalyType t : ag.label->types()) ++per_type[to_string(t)];
        }
      }
    std::cout << "wrote " << scenarios.size() << " scenarios (" << total
              << " trajectories) to " << a.out << "\n";
    if (total > 0) {
      std::cout << "anomalous fraction: " << std::setprecision(4)
                << static_cast<double>(anomalous) / total << "\n";
      for (const auto& [name, count] : per_type)
        std::cout << "  " << name << ": " << std::setprecision(4)
                  << static_cast<double>(count) / total << "\n";
    }
  }
}

// ------------------------------------------------------------------- label
struct LabelArgs {
  std::string data;
  std::string out;
  std::string config;
};

void run_label(const LabelArgs& a) {
  KeyValueConfig kv = load_kv(a.config);
  LabelerConfig cfg = LabelerConfig::from_kv(kv);
  kv.check_all_consumed();
  std::vector<Scenario> scenarios = load_data(a.data);
  for (auto& s : scenarios)
    for (auto& ag : s.agents) ag.label = label_trajectory(ag, cfg, s.dt);
  try {
    write_dataset(scenarios, a.out);
  } catch (const DatasetError& e) {
    throw IoError(e.what());
  }
  std::cout << "labeled " << scenarios.size() << " scenarios -> " << a.out << "\n";
}

// ------------------------------------------------------------------- train
struct TrainArgs {
  std::string data;
  std::string model_out;
  std::string log_out;
  std::string config;
  uint64_t seed = 0;
  int epochs = -1;
  double train_blackout = 0.0;  // percent
};

void run_train(const TrainArgs& a) {
  KeyValueConfig kv = load_kv(a.config);
  TrainConfig cfg = TrainConfig::from_kv(kv);
  Hyperparams hp;
  hp.hidden = kv.get_int("hidden", hp.hidden);
  hp.gat_heads = kv.get_int("gat_heads", hp.gat_heads);
  hp.enc_layers = kv.get_int("enc_layers", hp.enc_layers);
  hp.enc_heads = kv.get_int("enc_heads", hp.enc_heads);
  hp.t_max = kv.get_int("t_max", hp.t_max);
  kv.check_all_consumed();
  cfg.seed = a.seed;
  if (a.epochs > 0) cfg.epochs = a.epochs;
  if (a.train_blackout > 0.0) cfg.train_blackout_pct = a.train_blackout / 100.0;
  cfg.threads = parallel_threads;

  const std::vector<Scenario> scenarios = load_data(a.data);
  const DatasetSplit split = make_split(scenarios, cfg.fractions, cfg.seed);
  const TrainResult result = train(scenarios, split, cfg, hp);

  for (const auto& e : result.log)
    std::cout << "epoch " << e.epoch << "  train_loss " << std::setprecision(6)
              << e.train_loss << "  val_f1 " << e.val_f1 << "\n";
  std::cout << "best epoch " << result.best_epoch << " (val_f1 "
            << std::setprecision(6) << result.best_val_f1 << ")\n";

  save_model({result.best_params, split}, a.model_out);
  if (!a.log_out.empty()) write_train_log_csv(result.log, a.log_out);
}

// -------------------------------------------------------------------- eval
struct EvalArgs {
  std::string model;
  std::string data;
  std::string segment = "test";
  std::string blackout_mode;  // empty = none
  double pct = 0.0;           // percent units
  int max_block = 10;
  uint64_t seed = 0;
  std::string out;
  std::string probs_out;
};

EvalResult eval_common(const EvalArgs& a) {
  const ModelFile mf = load_model(a.model);
  if (!mf.split) throw std::invalid_argument("model file carries no split");
  const std::vector<Scenario> scenarios = load_data(a.data);
  const auto& segment = pick_segment(*mf.split, a.segment);
  std::optional<BlackoutSpec> spec;
  if (!a.blackout_mode.empty() && a.pct > 0.0) {
    spec = BlackoutSpec{blackout_mode_from_string(a.blackout_mode), a.pct / 100.0,
                        a.max_block, a.seed};
  }
  return evaluate(mf.params, scenarios, segment, spec ? &*spec : nullptr,
                  parallel_threads);
}

void run_eval(const EvalArgs& a) {
  const EvalResult res = eval_common(a);
  const std::string json = report_to_json(res.report, static_cast<int>(res.probs.size()));
  if (a.out.empty())
    std::cout << json << "\n";
  else
    open_out(a.out) << json << "\n";
  if (!a.probs_out.empty()) write_probs_csv(res.probs, a.probs_out);
}

// --------------------------------------------------------------------- roc
void run_roc(const EvalArgs& a, const std::string& out_path) {
  const EvalResult res = eval_common(a);
  std::vector<int> labels;
  std::vector<double> scores;
  for (const auto& sp : res.probs) {
    labels.push_back(sp.label);
    scores.push_back(sp.probability);
  }
  const RocResult roc = roc_auc(labels, scores);
  auto out = open_out(out_path);
  out << "threshold,fpr,tpr\n";
  for (const auto& p : roc.points)
    out << std::setprecision(17) << p.threshold << ',' << p.fpr << ',' << p.tpr
        << '\n';
  std::cout << "auc " << std::setprecision(6) << roc.auc << " -> " << out_path
            << "\n";
}

// ---------------------------------------------------------- blackout-sweep
struct SweepArgs {
  std::string model;
  std::string data;
  std::string mode = "both";
  std::string pcts = "2,5,8,10,15,25";
  int seeds = 5;
  int max_block = 10;
  std::string segment = "test";
  std::string out;
};

void run_sweep(const SweepArgs& a) {
  const ModelFile mf = load_model(a.model);
  if (!mf.split) throw std::invalid_argument("model file carries no split");
  const std::vector<Scenario> scenarios = load_data(a.data);
  const auto& segment = pick_segment(*mf.split, a.segment);
  std::vector<BlackoutMode> modes;
  if (a.mode == "both")
    modes = {BlackoutMode::RandomStepwise, BlackoutMode::Sequential};
  else
    modes = {blackout_mode_from_string(a.mode)};
  const std::vector<double> pcts = parse_pcts(a.pcts);
  if (a.seeds < 1) throw std::invalid_argument("--seeds must be >= 1");

  auto out = open_out(a.out);
  out << "mode,pct,seed,f1,auc,precision,recall,mcc,accuracy\n";
  auto emit = [&](const std::string& mode, double pct, const std::string& seed,
                  const MetricsReport& r) {
    out << mode << ',' << pct << ',' << seed << ',' << std::setprecision(17)
        << r.f1 << ',' << r.auc << ',' << r.precision << ',' << r.recall << ','
        << r.mcc << ',' << r.accuracy << '\n';
  };
  for (BlackoutMode mode : modes) {
    for (double pct : pcts) {
      MetricsReport mean{};
      for (int seed = 0; seed < a.seeds; ++seed) {
        BlackoutSpec spec{mode, pct / 100.0, a.max_block,
                          static_cast<uint64_t>(seed)};
        const EvalResult res =
            evaluate(mf.params, scenarios, segment,
                     pct > 0.0 ? &spec : nullptr, parallel_threads);
        emit(to_string(mode), pct, std::to_string(seed), res.report);
        mean.f1 += res.report.f1;
        mean.auc += res.report.auc;
        mean.precision += res.report.precision;
        mean.recall += res.report.recall;
        mean.mcc += res.report.mcc;
        mean.accuracy += res.report.accuracy;
      }
      const double inv = 1.0 / a.seeds;
      mean.f1 *= inv;
      mean.auc *= inv;
      mean.precision *= inv;
      mean.recall *= inv;
      mean.mcc *= inv;
      mean.accuracy *= inv;
      emit(to_string(mode), pct, "mean", mean);
    }
  }
  std::cout << "sweep -> " << a.out << "\n";
}

// ------------------------------------------------------------ baseline-lof
struct LofArgs {
  std::string data;
  std::string segment = "test";
  uint64_t split_seed = 0;
  std::string fractions = "0.8,0.1,0.1";
  int k = 20;
  double threshold = 1.5;
  std::string out;
  std::string config;
};

void run_lof(const LofArgs& a) {
  KeyValueConfig kv = load_kv(a.config);
  LabelerConfig labeler_cfg = LabelerConfig::from_kv(kv);
  kv.check_all_consumed();
  LofConfig cfg;
  cfg.k = a.k;
  cfg.threshold = a.threshold;
  cfg.validate();

  const std::vector<Scenario> scenarios = load_data(a.data);
  const auto fr = parse_pcts(a.fractions);
  if (fr.size() != 3) throw std::invalid_argument("--fractions needs 3 values");
  const DatasetSplit split =
      make_split(scenarios, {fr[0], fr[1], fr[2]}, a.split_seed);
  const auto& segment = pick_segment(split, a.segment);

  std::map<std::string, const Scenario*> by_id;
  for (const auto& s : scenarios) by_id[s.scenario_id] = &s;
  auto featurize_segment = [&](const std::vector<SampleRef>& refs,
                               std::vector<int>* labels) {
    std::vector<std::vector<double>> feats;
    feats.reserve(refs.size());
    for (const auto& r : refs) {
      const Scenario& s = *by_id.at(r.scenario_id);
      const AgentTrajectory& traj = s.agents[s.agent_index(r.agent_id)];
      if (!traj.label)
        throw std::invalid_argument("trajectory " + r.scenario_id + "/" +
                                    r.agent_id + " is unlabeled; run `label` first");
      const auto f = featurize_trajectory(traj, labeler_cfg, s.dt);
      feats.emplace_back(f.begin(), f.end());
      if (labels) labels->push_back(traj.label->is_anomalous ? 1 : 0);
    }
    return feats;
  };

  const auto train_feats = featurize_segment(split.train, nullptr);
  std::vector<int> labels;
  const auto test_feats = featurize_segment(segment, &labels);
  const LofResult lof = lof_classify(train_feats, test_feats, cfg);

  MetricsReport report;
  report.confusion = confusion(labels, lof.labels);
  const ScalarMetrics m = scalar_metrics(report.confusion);
  report.precision = m.precision;
  report.recall = m.recall;
  report.f1 = m.f1;
  report.accuracy = m.accuracy;
  report.mcc = m.mcc;
  bool both = false;
  for (size_t i = 1; i < labels.size(); ++i)
    if (labels[i] != labels[0]) both = true;
  report.auc = both ? roc_auc(labels, lof.scores).auc : 0.0;

  const std::string json = report_to_json(report, static_cast<int>(labels.size()));
  if (a.out.empty())
    std::cout << json << "\n";
  else
    open_out(a.out) << json << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cooperative-perception trajectory anomaly detection pipeline"};
  app.require_subcommand(1);
  app.add_option("--threads", parallel_threads,
                 "worker threads (0 = hardware concurrency)");

  GenerateArgs gen;
  auto* cmd_gen = app.add_subcommand("generate", "synthesize a scenario dataset");
  cmd_gen->add_option("--scenarios", gen.scenarios, "number of scenarios")->required();
  cmd_gen->add_option("--agents", gen.agents, "agents per scenario");
  cmd_gen->add_option("--seed", gen.seed, "generation seed");
  cmd_gen->add_option("--out", gen.out, "output JSONL path")->required();
  cmd_gen->add_option("--config", gen.config, "key=value config file");
  cmd_gen->add_flag("--quiet", gen.quiet, "suppress the summary");

  LabelArgs lab;
  auto* cmd_label = app.add_subcommand("label", "re-run the rule labeler");
  cmd_label->add_option("--data", lab.data, "input JSONL")->required();
  cmd_label->add_option("--out", lab.out, "output JSONL")->required();
  cmd_label->add_option("--config", lab.config, "key=value config file");

  TrainArgs tr;
  auto* cmd_train = app.add_subcommand("train", "train the classifier");
  cmd_train->add_option("--data", tr.data, "labeled JSONL")->required();
  cmd_train->add_option("--model-out", tr.model_out, "model JSON path")->required();
  cmd_train->add_option("--log", tr.log_out, "training log CSV path");
  cmd_train->add_option("--config", tr.config, "key=value config file");
  cmd_train->add_option("--seed", tr.seed, "training seed");
  cmd_train->add_option("--epochs", tr.epochs, "override epoch count");
  cmd_train->add_option("--train-blackout", tr.train_blackout,
                        "random blackout percent applied during training");

  EvalArgs ev;
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a trained model");
  cmd_eval->add_option("--model", ev.model, "model JSON")->required();
  cmd_eval->add_option("--data", ev.data, "labeled JSONL")->required();
  cmd_eval->add_option("--split", ev.segment, "train|val|test");
  cmd_eval->add_option("--blackout", ev.blackout_mode, "random|sequential");
  cmd_eval->add_option("--pct", ev.pct, "blackout percentage (2 = 2%)");
  cmd_eval->add_option("--max-block", ev.max_block, "sequential max block length");
  cmd_eval->add_option("--seed", ev.seed, "blackout seed");
  cmd_eval->add_option("--out", ev.out, "metrics JSON path (default stdout)");
  cmd_eval->add_option("--probs", ev.probs_out, "per-sample probability CSV");

  EvalArgs rocv;
  std::string roc_out;
  auto* cmd_roc = app.add_subcommand("roc", "export the ROC curve");
  cmd_roc->add_option("--model", rocv.model, "model JSON")->required();
  cmd_roc->add_option("--data", rocv.data, "labeled JSONL")->required();
  cmd_roc->add_option("--split", rocv.segment, "train|val|test");
  cmd_roc->add_option("--out", roc_out, "ROC CSV path")->required();

  SweepArgs sw;
  auto* cmd_sweep = app.add_subcommand("blackout-sweep", "blackout robustness grid");
  cmd_sweep->add_option("--model", sw.model, "model JSON")->required();
  cmd_sweep->add_option("--data", sw.data, "labeled JSONL")->required();
  cmd_sweep->add_option("--mode", sw.mode, "random|sequential|both");
  cmd_sweep->add_option("--pcts", sw.pcts, "comma-separated percentages");
  cmd_sweep->add_option("--seeds", sw.seeds, "seeds per cell (0..K-1)");
  cmd_sweep->add_option("--max-block", sw.max_block, "sequential max block length");
  cmd_sweep->add_option("--split", sw.segment, "train|val|test");
  cmd_sweep->add_option("--out", sw.out, "sweep CSV path")->required();

  LofArgs lof;
  auto* cmd_lof = app.add_subcommand("baseline-lof", "local outlier factor baseline");
  cmd_lof->add_option("--data", lof.data, "labeled JSONL")->required();
  cmd_lof->add_option("--split", lof.segment, "train|val|test");
  cmd_lof->add_option("--split-seed", lof.split_seed, "split seed");
  cmd_lof->add_option("--fractions", lof.fractions, "train,val,test fractions");
  cmd_lof->add_option("--k", lof.k, "neighbor count");
  cmd_lof->add_option("--threshold", lof.threshold, "anomaly threshold on LOF");
  cmd_lof->add_option("--out", lof.out, "metrics JSON path (default stdout)");
  cmd_lof->add_option("--config", lof.config, "labeler key=value config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cmd_gen->parsed()) run_generate(gen);
    if (cmd_label->parsed()) run_label(lab);
    if (cmd_train->parsed()) run_train(tr);
    if (cmd_eval->parsed()) run_eval(ev);
    if (cmd_roc->parsed()) run_roc(rocv, roc_out);
    if (cmd_sweep->parsed()) run_sweep(sw);
    if (cmd_lof->parsed()) run_lof(lof);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const DatasetError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
