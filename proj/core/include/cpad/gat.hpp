#pragma once

#include <vector>

#include "cpad/autodiff.hpp"
#include "cpad/rng.hpp"

namespace cpad {

// Multi-head graph attention over the complete graph (with self-loops) of the
// agents present at one timestep. Head outputs are concatenated.
struct GatLayerParams {
  int in_dim = 0;
  int head_dim = 0;
  int heads = 0;
  std::vector<Tensor> W;  // per head, in_dim x head_dim
  std::vector<Tensor> a;  // per head, 2*head_dim x 1

  int out_dim() const { return heads * head_dim; }
  static GatLayerParams init(int in_dim, int head_dim, int heads, Rng& rng);
};

// Two stacked GAT layers with ReLU between, global mean pooling, then an
// affine projection to the embedding width.
struct FusionParams {
  GatLayerParams layer1;  // node_dim -> heads * hidden
  GatLayerParams layer2;  // heads * hidden -> hidden (head_dim = hidden / heads)
  Tensor pool_w;          // hidden x hidden
  Tensor pool_b;          // 1 x hidden

  static FusionParams init(int node_dim, int hidden, int heads, Rng& rng);
};

struct GatLayerVars {
  std::vector<Var> W;
  std::vector<Var> a;
};

struct FusionVars {
  GatLayerVars layer1, layer2;
  Var pool_w, pool_b;
};

FusionVars lift(const FusionParams& p);

// Softmax rows recorded during a forward pass, for normalization checks.
struct AttentionTrace {
  std::vector<Tensor> rows;  // each row of every recorded softmax output
  void record(const Tensor& softmax_out);
};

// One GAT layer: node_features is N x in_dim, output N x (heads * head_dim).
// N must be >= 1; the attention neighborhood is every present node including
// the node itself.
Var gat_layer(const Var& node_features, const GatLayerVars& params, int heads,
              double leaky_slope, AttentionTrace* trace = nullptr);

// Full spatial fusion of one timestep: two GAT layers with ReLU between,
// mean over nodes, then pool_w * mean + pool_b. Output is 1 x hidden.
Var graph_embed(const Var& node_features, const FusionVars& params, int heads,
                double leaky_slope, AttentionTrace* trace = nullptr);

}  // namespace cpad
