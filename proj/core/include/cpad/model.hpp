#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpad/blackout.hpp"
#include "cpad/gat.hpp"
#include "cpad/types.hpp"

namespace cpad {

struct Hyperparams {
  int sensor_dim = kSensorDim;       // 264
  int hidden = 64;                   // embedding width n
  int gat_heads = 4;
  int enc_layers = 2;
  int enc_heads = 4;
  int ff_mult = 4;
  int t_max = 256;
  double leaky_slope = 0.2;
  double input_scale = 1.0 / 50.0;   // sensor distances to ~[0, 1]

  int node_dim() const { return sensor_dim + 1; }  // + ego indicator
  void validate() const;
};

struct EncoderLayerParams {
  Tensor wq, wk, wv, wo;            // hidden x hidden
  Tensor ff1_w, ff1_b, ff2_w, ff2_b;
  Tensor ln1_g, ln1_b, ln2_g, ln2_b;  // 1 x hidden
};

struct EncoderParams {
  std::vector<EncoderLayerParams> layers;
};

struct HeadParams {
  Tensor w_ap;  // hidden x 1 attention pooling scorer
  Tensor w_c;   // hidden x 1 classifier weights
  Tensor b_c;   // 1 x 1
};

struct ModelParams {
  Hyperparams hp;
  FusionParams fusion;
  EncoderParams encoder;
  HeadParams head;

  struct ParamRef {
    std::string path;
    const Tensor* tensor;
  };
  struct MutParamRef {
    std::string path;
    Tensor* tensor;
  };
  std::vector<ParamRef> param_refs() const;
  std::vector<MutParamRef> param_refs();
};

ModelParams init_params(const Hyperparams& hp, uint64_t seed);

// Sinusoidal positional table, t_max x width. Deterministic, not learned.
Tensor positional_encoding(int t_max, int width);

struct EncoderLayerVars {
  Var wq, wk, wv, wo, ff1_w, ff1_b, ff2_w, ff2_b, ln1_g, ln1_b, ln2_g, ln2_b;
};

struct ModelVars {
  FusionVars fusion;
  std::vector<EncoderLayerVars> encoder;
  Var w_ap, w_c, b_c;
  std::vector<Var> leaves;  // aligned with ModelParams::param_refs order
};

ModelVars lift(const ModelParams& p);

// Pre-norm transformer encoder over a T x hidden sequence; adds positional
// encoding by position index first. Throws if T exceeds t_max.
Var encode_sequence(const Var& seq, const ModelVars& vars, const Hyperparams& hp,
                    AttentionTrace* trace = nullptr);

// Softmax-weighted temporal average with learned scores s_t = w_ap^T x_t.
Var attention_pool(const Var& seq, const Var& w_ap, AttentionTrace* trace = nullptr);

// p = sigmoid(w_c^T z + b_c); anomalous iff p > 0.5 (tie -> normal).
std::pair<double, bool> classify(const Tensor& z, const HeadParams& head);

// Weighted binary cross entropy; probabilities are clamped to
// [1e-7, 1 - 1e-7] before the logs.
double bce_loss(const std::vector<double>& probabilities,
                const std::vector<int>& labels, double pos_weight);
Var bce_loss_graph(const Var& probabilities_row, const std::vector<int>& labels,
                   double pos_weight);

// Full CPAD forward pass for one (scenario, ego) sample under an optional
// communication mask. Masked agents are absent from the node set; the ego must
// never be masked.
Var forward_graph(const Scenario& scenario, int ego_index, const BlackoutMask* mask,
                  const ModelVars& vars, const Hyperparams& hp,
                  AttentionTrace* trace = nullptr);

double forward(const Scenario& scenario, int ego_index, const BlackoutMask* mask,
               const ModelParams& params, AttentionTrace* trace = nullptr);

struct ModelFile {
  ModelParams params;
  std::optional<DatasetSplit> split;  // carried so eval reuses train's split
};

void save_model(const ModelFile& model, const std::string& path);
ModelFile load_model(const std::string& path);

}  // namespace cpad
