#include "cpad/gat.hpp"

#include <stdexcept>

namespace cpad {

GatLayerParams GatLayerParams::init(int in_dim, int head_dim, int heads, Rng& rng) {
  GatLayerParams p;
  p.in_dim = in_dim;
  p.head_dim = head_dim;
  p.heads = heads;
  for (int h = 0; h < heads; ++h) {
    p.W.push_back(Tensor::xavier(in_dim, head_dim, rng));
    p.a.push_back(Tensor::xavier(2 * head_dim, 1, rng));
  }
  return p;
}

FusionParams FusionParams::init(int node_dim, int hidden, int heads, Rng& rng) {
  if (hidden % heads != 0)
    throw std::invalid_argument("FusionParams: hidden must be divisible by heads");
  FusionParams p;
  p.layer1 = GatLayerParams::init(node_dim, hidden, heads, rng);
  p.layer2 = GatLayerParams::init(heads * hidden, hidden / heads, heads, rng);
  p.pool_w = Tensor::xavier(hidden, hidden, rng);
  p.pool_b = Tensor({1, hidden}, 0.0);
  return p;
}

FusionVars lift(const FusionParams& p) {
  FusionVars v;
  for (const auto& w : p.layer1.W) v.layer1.W.push_back(Var::param(w));
  for (const auto& a : p.layer1.a) v.layer1.a.push_back(Var::param(a));
  for (const auto& w : p.layer2.W) v.layer2.W.push_back(Var::param(w));
  for (const auto& a : p.layer2.a) v.layer2.a.push_back(Var::param(a));
  v.pool_w = Var::param(p.pool_w);
  v.pool_b = Var::param(p.pool_b);
  return v;
}

void AttentionTrace::record(const Tensor& softmax_out) {
  const int R = softmax_out.rows(), C = softmax_out.cols();
  for (int r = 0; r < R; ++r) {
    Tensor row({1, C});
    for (int c = 0; c < C; ++c) row.at(0, c) = softmax_out.at(r, c);
    rows.push_back(std::move(row));
  }
}

Var gat_layer(const Var& node_features, const GatLayerVars& params, int heads,
              double leaky_slope, AttentionTrace* trace) {
  const int n_nodes = node_features.value().rows();
  if (n_nodes < 1)
    throw std::invalid_argument("gat_layer: needs at least one present node");
  if (static_cast<int>(params.W.size()) != heads)
    throw std::invalid_argument("gat_layer: head count mismatch");

  std::vector<Var> head_outputs;
  head_outputs.reserve(heads);
  const Var ones_col = Var::constant(Tensor({n_nodes, 1}, 1.0));
  for (int h = 0; h < heads; ++h) {
    const Var hp = matmul(node_features, params.W[h]);  // N x d
    const int d = hp.value().cols();
    // e_ij = LeakyReLU(a^T [hp_i || hp_j]) built as an outer sum of the two
    // halves of a.
    const Var a_src = slice(params.a[h], 0, 0, d);      // d x 1
    const Var a_dst = slice(params.a[h], 0, d, d);      // d x 1
    const Var s_src = matmul(hp, a_src);                // N x 1
    const Var s_dst = matmul(hp, a_dst);                // N x 1
    const Var e = leaky_relu(
        add(matmul(s_src, transpose(ones_col)), matmul(ones_col, transpose(s_dst))),
        leaky_slope);                                   // N x N
    const Var alpha = softmax(e, 1);
    if (trace) trace->record(alpha.value());
    head_outputs.push_back(matmul(alpha, hp));          // N x d
  }
  return heads == 1 ? head_outputs[0] : concat(head_outputs, 1);
}

Var graph_embed(const Var& node_features, const FusionVars& params, int heads,
                double leaky_slope, AttentionTrace* trace) {
  if (node_features.value().rows() < 1)
    throw std::invalid_argument("graph_embed: needs at least one present node");
  const Var h1 = relu(gat_layer(node_features, params.layer1, heads, leaky_slope, trace));
  const Var h2 = gat_layer(h1, params.layer2, heads, leaky_slope, trace);
  const Var pooled = mean_axis(h2, 0);  // 1 x hidden
  return add(matmul(pooled, params.pool_w), params.pool_b);
}

}  // namespace cpad
