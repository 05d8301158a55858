#include "cpad/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace cpad {

namespace {
using ordered_json = nlohmann::ordered_json;
constexpr double kProbClamp = 1e-7;
}  // namespace

void Hyperparams::validate() const {
  if (sensor_dim < 1) throw std::invalid_argument("sensor_dim must be >= 1");
  if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
  if (gat_heads < 1 || hidden % gat_heads != 0)
    throw std::invalid_argument("hidden must be divisible by gat_heads");
  if (enc_heads < 1 || hidden % enc_heads != 0)
    throw std::invalid_argument("hidden must be divisible by enc_heads");
  if (enc_layers < 1) throw std::invalid_argument("enc_layers must be >= 1");
  if (ff_mult < 1) throw std::invalid_argument("ff_mult must be >= 1");
  if (t_max < 1) throw std::invalid_argument("t_max must be >= 1");
  if (!(input_scale > 0.0)) throw std::invalid_argument("input_scale must be > 0");
}

ModelParams init_params(const Hyperparams& hp, uint64_t seed) {
  hp.validate();
  Rng rng(mix_seed(seed, 0x90de1));
  ModelParams p;
  p.hp = hp;
  p.fusion = FusionParams::init(hp.node_dim(), hp.hidden, hp.gat_heads, rng);
  const int n = hp.hidden;
  for (int l = 0; l < hp.enc_layers; ++l) {
    EncoderLayerParams lp;
    lp.wq = Tensor::xavier(n, n, rng);
    lp.wk = Tensor::xavier(n, n, rng);
    lp.wv = Tensor::xavier(n, n, rng);
    lp.wo = Tensor::xavier(n, n, rng);
    lp.ff1_w = Tensor::xavier(n, hp.ff_mult * n, rng);
    lp.ff1_b = Tensor({1, hp.ff_mult * n}, 0.0);
    lp.ff2_w = Tensor::xavier(hp.ff_mult * n, n, rng);
    lp.ff2_b = Tensor({1, n}, 0.0);
    lp.ln1_g = Tensor({1, n}, 1.0);
    lp.ln1_b = Tensor({1, n}, 0.0);
    lp.ln2_g = Tensor({1, n}, 1.0);
    lp.ln2_b = Tensor({1, n}, 0.0);
    p.encoder.layers.push_back(std::move(lp));
  }
  p.head.w_ap = Tensor::xavier(n, 1, rng);
  p.head.w_c = Tensor::xavier(n, 1, rng);
  p.head.b_c = Tensor({1, 1}, 0.0);
  return p;
}

Tensor positional_encoding(int t_max, int width) {
  Tensor pe({t_max, width});
  for (int t = 0; t < t_max; ++t)
    for (int i = 0; i < width; ++i) {
      const double denom = std::pow(10000.0, (2.0 * (i / 2)) / width);
      pe.at(t, i) = (i % 2 == 0) ? std::sin(t / denom) : std::cos(t / denom);
    }
  return pe;
}

namespace {

template <typename Self, typename Fn>
void for_each_param(Self& p, Fn&& fn) {
  auto layer = [&](auto& lp, const std::string& prefix) {
    for (int h = 0; h < lp.heads; ++h) {
      fn(prefix + ".h" + std::to_string(h) + ".W", lp.W[h]);
      fn(prefix + ".h" + std::to_string(h) + ".a", lp.a[h]);
    }
  };
  layer(p.fusion.layer1, "fusion.l1");
  layer(p.fusion.layer2, "fusion.l2");
  fn("fusion.pool.W", p.fusion.pool_w);
  fn("fusion.pool.b", p.fusion.pool_b);
  for (size_t l = 0; l < p.encoder.layers.size(); ++l) {
    auto& lp = p.encoder.layers[l];
    const std::string pre = "enc.l" + std::to_string(l) + ".";
    fn(pre + "wq", lp.wq);
    fn(pre + "wk", lp.wk);
    fn(pre + "wv", lp.wv);
    fn(pre + "wo", lp.wo);
    fn(pre + "ff1_w", lp.ff1_w);
    fn(pre + "ff1_b", lp.ff1_b);
    fn(pre + "ff2_w", lp.ff2_w);
    fn(pre + "ff2_b", lp.ff2_b);
    fn(pre + "ln1_g", lp.ln1_g);
    fn(pre + "ln1_b", lp.ln1_b);
    fn(pre + "ln2_g", lp.ln2_g);
    fn(pre + "ln2_b", lp.ln2_b);
  }
  fn("head.w_ap", p.head.w_ap);
  fn("head.w_c", p.head.w_c);
  fn("head.b_c", p.head.b_c);
}

}  // namespace

std::vector<ModelParams::ParamRef> ModelParams::param_refs() const {
  std::vector<ParamRef> out;
  for_each_param(*this, [&](const std::string& path, const Tensor& t) {
    out.push_back({path, &t});
  });
  return out;
}

std::vector<ModelParams::MutParamRef> ModelParams::param_refs() {
  std::vector<MutParamRef> out;
  for_each_param(*this, [&](const std::string& path, Tensor& t) {
    out.push_back({path, &t});
  });
  return out;
}

ModelVars lift(const ModelParams& p) {
  ModelVars v;
  v.fusion = lift(p.fusion);
  for (const auto& lp : p.encoder.layers) {
    EncoderLayerVars lv;
    lv.wq = Var::param(lp.wq);
    lv.wk = Var::param(lp.wk);
    lv.wv = Var::param(lp.wv);
    lv.wo = Var::param(lp.wo);
    lv.ff1_w = Var::param(lp.ff1_w);
    lv.ff1_b = Var::param(lp.ff1_b);
    lv.ff2_w = Var::param(lp.ff2_w);
    lv.ff2_b = Var::param(lp.ff2_b);
    lv.ln1_g = Var::param(lp.ln1_g);
    lv.ln1_b = Var::param(lp.ln1_b);
    lv.ln2_g = Var::param(lp.ln2_g);
    lv.ln2_b = Var::param(lp.ln2_b);
    v.encoder.push_back(lv);
  }
  v.w_ap = Var::param(p.head.w_ap);
  v.w_c = Var::param(p.head.w_c);
  v.b_c = Var::param(p.head.b_c);

  // leaves in param_refs order
  for (int h = 0; h < static_cast<int>(v.fusion.layer1.W.size()); ++h) {
    v.leaves.push_back(v.fusion.layer1.W[h]);
    v.leaves.push_back(v.fusion.layer1.a[h]);
  }
  for (int h = 0; h < static_cast<int>(v.fusion.layer2.W.size()); ++h) {
    v.leaves.push_back(v.fusion.layer2.W[h]);
    v.leaves.push_back(v.fusion.layer2.a[h]);
  }
  v.leaves.push_back(v.fusion.pool_w);
  v.leaves.push_back(v.fusion.pool_b);
  for (const auto& lv : v.encoder) {
    v.leaves.push_back(lv.wq);
    v.leaves.push_back(lv.wk);
    v.leaves.push_back(lv.wv);
    v.leaves.push_back(lv.wo);
    v.leaves.push_back(lv.ff1_w);
    v.leaves.push_back(lv.ff1_b);
    v.leaves.push_back(lv.ff2_w);
    v.leaves.push_back(lv.ff2_b);
    v.leaves.push_back(lv.ln1_g);
    v.leaves.push_back(lv.ln1_b);
    v.leaves.push_back(lv.ln2_g);
    v.leaves.push_back(lv.ln2_b);
  }
  v.leaves.push_back(v.w_ap);
  v.leaves.push_back(v.w_c);
  v.leaves.push_back(v.b_c);
  return v;
}

namespace {

Var layer_norm(const Var& x, const Var& gain, const Var& bias) {
  const Var mu = mean_axis(x, 1);                       // T x 1
  const Var centered = col_broadcast_add(x, scale(mu, -1.0));
  const Var var = mean_axis(mul(centered, centered), 1);  // T x 1
  const Var inv_std = pow_const(add_const(var, 1e-5), -0.5);
  const Var normed = col_broadcast_mul(centered, inv_std);
  return row_broadcast_add(row_broadcast_mul(normed, gain), bias);
}

Var multi_head_attention(const Var& x, const EncoderLayerVars& lv, int heads,
                         AttentionTrace* trace) {
  const int width = x.value().cols();
  const int dh = width / heads;
  const Var q = matmul(x, lv.wq);
  const Var k = matmul(x, lv.wk);
  const Var v = matmul(x, lv.wv);
  std::vector<Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Var qh = slice(q, 1, h * dh, dh);
    const Var kh = slice(k, 1, h * dh, dh);
    const Var vh = slice(v, 1, h * dh, dh);
    const Var scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(dh)));
    const Var attn = softmax(scores, 1);
    if (trace) trace->record(attn.value());
    outs.push_back(matmul(attn, vh));
  }
  return matmul(heads == 1 ? outs[0] : concat(outs, 1), lv.wo);
}

}  // namespace

Var encode_sequence(const Var& seq, const ModelVars& vars, const Hyperparams& hp,
                    AttentionTrace* trace) {
  const int T = seq.value().rows();
  if (T < 1) throw std::invalid_argument("encode_sequence: empty sequence");
  if (T > hp.t_max)
    throw std::invalid_argument("encode_sequence: sequence length " +
                                std::to_string(T) + " exceeds t_max " +
                                std::to_string(hp.t_max));
  static thread_local Tensor pe_cache;
  static thread_local int pe_tmax = -1, pe_width = -1;
  if (pe_tmax != hp.t_max || pe_width != hp.hidden) {
    pe_cache = positional_encoding(hp.t_max, hp.hidden);
    pe_tmax = hp.t_max;
    pe_width = hp.hidden;
  }
  Tensor pe({T, hp.hidden});
  std::copy(pe_cache.data.begin(),
            pe_cache.data.begin() + static_cast<size_t>(T) * hp.hidden,
            pe.data.begin());
  Var x = add(seq, Var::constant(std::move(pe)));
  for (const auto& lv : vars.encoder) {
    x = add(x, multi_head_attention(layer_norm(x, lv.ln1_g, lv.ln1_b), lv,
                                    hp.enc_heads, trace));
    const Var ff_in = layer_norm(x, lv.ln2_g, lv.ln2_b);
    const Var ff = matmul(relu(row_broadcast_add(matmul(ff_in, lv.ff1_w), lv.ff1_b)),
                          lv.ff2_w);
    x = add(x, row_broadcast_add(ff, lv.ff2_b));
  }
  return x;
}

Var attention_pool(const Var& seq, const Var& w_ap, AttentionTrace* trace) {
  if (seq.value().rows() < 1)
    throw std::invalid_argument("attention_pool: empty sequence");
  const Var scores = matmul(seq, w_ap);            // T x 1
  const Var weights = softmax(scores, 0);          // column softmax over time
  if (trace) trace->record(transpose(weights).value());
  return matmul(transpose(weights), seq);          // 1 x hidden
}

std::pair<double, bool> classify(const Tensor& z, const HeadParams& head) {
  if (z.cols() != head.w_c.rows())
    throw std::invalid_argument("classify: width mismatch " + z.shape_str());
  double logit = head.b_c.data[0];
  for (int i = 0; i < z.cols(); ++i) logit += z.data[i] * head.w_c.at(i, 0);
  const double p = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit))
                                : std::exp(logit) / (1.0 + std::exp(logit));
  return {p, p > 0.5};
}

double bce_loss(const std::vector<double>& probabilities,
                const std::vector<int>& labels, double pos_weight) {
  if (probabilities.size() != labels.size())
    throw std::invalid_argument("bce_loss: length mismatch");
  if (probabilities.empty()) throw std::invalid_argument("bce_loss: empty input");
  double total = 0.0;
  for (size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], kProbClamp, 1.0 - kProbClamp);
    const double y = labels[i] ? 1.0 : 0.0;
    total += -(pos_weight * y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return total / static_cast<double>(probabilities.size());
}

Var bce_loss_graph(const Var& probabilities_row, const std::vector<int>& labels,
                   double pos_weight) {
  const Tensor& p = probabilities_row.value();
  if (p.rows() != 1 || p.cols() != static_cast<int>(labels.size()))
    throw std::invalid_argument("bce_loss_graph: length mismatch");
  const int n = p.cols();
  Tensor y({1, n}), w_pos({1, n}), w_neg({1, n});
  for (int i = 0; i < n; ++i) {
    y.at(0, i) = labels[i] ? 1.0 : 0.0;
    w_pos.at(0, i) = labels[i] ? pos_weight : 0.0;
    w_neg.at(0, i) = labels[i] ? 0.0 : 1.0;
  }
  const Var pc = vclamp(probabilities_row, kProbClamp, 1.0 - kProbClamp);
  const Var pos_term = mul(Var::constant(std::move(w_pos)), vlog(pc));
  const Var neg_term =
      mul(Var::constant(std::move(w_neg)), vlog(add_const(scale(pc, -1.0), 1.0)));
  return scale(sum_all(add(pos_term, neg_term)), -1.0 / n);
}

Var forward_graph(const Scenario& scenario, int ego_index, const BlackoutMask* mask,
                  const ModelVars& vars, const Hyperparams& hp,
                  AttentionTrace* trace) {
  const int n_agents = static_cast<int>(scenario.agents.size());
  const int T = scenario.timesteps();
  if (ego_index < 0 || ego_index >= n_agents)
    throw std::invalid_argument("forward: ego index out of range");
  if (mask) {
    if (mask->n_agents != n_agents || mask->timesteps != T)
      throw std::invalid_argument("forward: mask dims do not match scenario");
    for (int t = 0; t < T; ++t)
      if (mask->masked(ego_index, t))
        throw std::invalid_argument("forward: the ego agent must never be masked");
  }

  std::vector<Var> embeddings;
  embeddings.reserve(T);
  for (int t = 0; t < T; ++t) {
    std::vector<int> present;
    present.reserve(n_agents);
    for (int a = 0; a < n_agents; ++a) {
      if (a != ego_index && mask && mask->masked(a, t)) continue;
      present.push_back(a);
    }
    Tensor feats({static_cast<int>(present.size()), hp.node_dim()});
    for (size_t row = 0; row < present.size(); ++row) {
      const SensorFrame& f = scenario.agents[present[row]].sensors[t];
      int c = 0;
      for (double d : f.lidar) feats.at(row, c++) = d * hp.input_scale;
      for (double d : f.lane) feats.at(row, c++) = d * hp.input_scale;
      for (double d : f.side) feats.at(row, c++) = d * hp.input_scale;
      feats.at(row, c) = present[row] == ego_index ? 1.0 : 0.0;
    }
    embeddings.push_back(graph_embed(Var::constant(std::move(feats)), vars.fusion,
                                     hp.gat_heads, hp.leaky_slope, trace));
  }
  const Var seq = embeddings.size() == 1 ? embeddings[0] : concat(embeddings, 0);
  const Var encoded = encode_sequence(seq, vars, hp, trace);
  const Var pooled = attention_pool(encoded, vars.w_ap, trace);
  const Var logit = add(matmul(pooled, vars.w_c), vars.b_c);
  return sigmoid(logit);
}

double forward(const Scenario& scenario, int ego_index, const BlackoutMask* mask,
               const ModelParams& params, AttentionTrace* trace) {
  const ModelVars vars = lift(params);
  return forward_graph(scenario, ego_index, mask, vars, params.hp, trace)
      .value()
      .data[0];
}

namespace {

ordered_json split_to_json(const DatasetSplit& s) {
  auto seg = [](const std::vector<SampleRef>& v) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : v) arr.push_back({r.scenario_id, r.agent_id});
    return arr;
  };
  ordered_json j;
  j["train"] = seg(s.train);
  j["val"] = seg(s.val);
  j["test"] = seg(s.test);
  return j;
}

DatasetSplit split_from_json(const ordered_json& j) {
  auto seg = [](const ordered_json& arr) {
    std::vector<SampleRef> v;
    for (const auto& r : arr) v.push_back({r[0].get<std::string>(), r[1].get<std::string>()});
    return v;
  };
  DatasetSplit s;
  s.train = seg(j.at("train"));
  s.val = seg(j.at("val"));
  s.test = seg(j.at("test"));
  return s;
}

}  // namespace

void save_model(const ModelFile& model, const std::string& path) {
  const ModelParams& p = model.params;
  ordered_json j;
  ordered_json hp;
  hp["sensor_dim"] = p.hp.sensor_dim;
  hp["hidden"] = p.hp.hidden;
  hp["gat_heads"] = p.hp.gat_heads;
  hp["enc_layers"] = p.hp.enc_layers;
  hp["enc_heads"] = p.hp.enc_heads;
  hp["ff_mult"] = p.hp.ff_mult;
  hp["t_max"] = p.hp.t_max;
  hp["leaky_slope"] = p.hp.leaky_slope;
  hp["input_scale"] = p.hp.input_scale;
  j["hyperparams"] = std::move(hp);
  ordered_json weights = ordered_json::object();
  for (const auto& ref : p.param_refs()) weights[ref.path] = ref.tensor->data;
  j["weights"] = std::move(weights);
  if (model.split) j["split"] = split_to_json(*model.split);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open model file for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failure on model file: " + path);
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("model file " + path + ": invalid JSON: " + e.what());
  }
  const auto& hp_j = j.at("hyperparams");
  Hyperparams hp;
  hp.sensor_dim = hp_j.at("sensor_dim").get<int>();
  hp.hidden = hp_j.at("hidden").get<int>();
  hp.gat_heads = hp_j.at("gat_heads").get<int>();
  hp.enc_layers = hp_j.at("enc_layers").get<int>();
  hp.enc_heads = hp_j.at("enc_heads").get<int>();
  hp.ff_mult = hp_j.at("ff_mult").get<int>();
  hp.t_max = hp_j.at("t_max").get<int>();
  hp.leaky_slope = hp_j.at("leaky_slope").get<double>();
  hp.input_scale = hp_j.at("input_scale").get<double>();
  ModelFile out;
  out.params = init_params(hp, 0);
  const auto& weights = j.at("weights");
  for (auto& ref : out.params.param_refs()) {
    if (!weights.contains(ref.path))
      throw std::runtime_error("model file missing weight: " + ref.path);
    const auto& arr = weights.at(ref.path);
    if (arr.size() != ref.tensor->data.size())
      throw std::runtime_error("model weight " + ref.path + ": expected " +
                               std::to_string(ref.tensor->data.size()) + " values, got " +
                               std::to_string(arr.size()));
    for (size_t i = 0; i < ref.tensor->data.size(); ++i)
      ref.tensor->data[i] = arr[i].get<double>();
  }
  if (j.contains("split") && !j.at("split").is_null())
    out.split = split_from_json(j.at("split"));
  return out;
}

}  // namespace cpad
