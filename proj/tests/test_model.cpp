#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cpad/model.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cpad;
using test::random_tensor;
using test::tiny_hyperparams;

namespace {

Scenario tiny_scenario(int n_agents, int T, uint64_t seed) {
  return test::gen_scenario(n_agents, T, seed);
}

}  // namespace

TEST_CASE("encode_sequence: singleton sequence is finite and attention is 1") {
  const Hyperparams hp = tiny_hyperparams();
  const ModelParams params = init_params(hp, 3);
  const ModelVars vars = lift(params);
  AttentionTrace trace;
  Rng rng(1);
  const Var seq = Var::constant(random_tensor(1, hp.hidden, rng));
  const Var out = encode_sequence(seq, vars, hp, &trace);
  CHECK(out.value().rows() == 1);
  for (double v : out.value().data) CHECK(std::isfinite(v));
  for (const auto& row : trace.rows) {
    REQUIRE(row.data.size() == 1);
    CHECK(row.data[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("encode_sequence: attention rows sum to one; t_max is enforced") {
  Hyperparams hp = tiny_hyperparams(32);
  const ModelParams params = init_params(hp, 5);
  const ModelVars vars = lift(params);
  Rng rng(4);
  AttentionTrace trace;
  encode_sequence(Var::constant(random_tensor(20, hp.hidden, rng)), vars, hp, &trace);
  CHECK_FALSE(trace.rows.empty());
  for (const auto& row : trace.rows) {
    double sum = 0.0;
    for (double v : row.data) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS(
      encode_sequence(Var::constant(random_tensor(33, hp.hidden, rng)), vars, hp),
      std::invalid_argument);
}

TEST_CASE("attention_pool: equal elements, zero scorer, and saturation") {
  Rng rng(6);
  const int n = 8;

  Tensor same({5, n});
  Tensor one_row = random_tensor(1, n, rng);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < n; ++c) same.at(r, c) = one_row.at(0, c);
  const Var w = Var::param(random_tensor(n, 1, rng));
  const Tensor z = attention_pool(Var::constant(same), w).value();
  for (int c = 0; c < n; ++c)
    CHECK(z.at(0, c) == doctest::Approx(one_row.at(0, c)).epsilon(1e-12));

  // zero scorer -> uniform weights -> plain mean
  const Tensor x = random_tensor(6, n, rng);
  const Tensor zm =
      attention_pool(Var::constant(x), Var::param(Tensor({n, 1}, 0.0))).value();
  for (int c = 0; c < n; ++c) {
    double mean = 0.0;
    for (int r = 0; r < 6; ++r) mean += x.at(r, c) / 6.0;
    CHECK(zm.at(0, c) == doctest::Approx(mean).epsilon(1e-12));
  }

  // a score dominating by +50 collapses the pool onto that element
  Tensor xs({3, 2});
  xs.data = {50.0, 1.0, 0.0, 2.0, 0.0, 3.0};
  Tensor ws({2, 1});
  ws.data = {1.0, 0.0};  // score = first column
  const Tensor zs = attention_pool(Var::constant(xs), Var::param(ws)).value();
  CHECK(std::abs(zs.at(0, 0) - 50.0) < 1e-9);
  CHECK(std::abs(zs.at(0, 1) - 1.0) < 1e-9);

  CHECK_THROWS(attention_pool(Var::constant(Tensor({1, 1}, 0.0)),
                              Var::param(Tensor({2, 1}, 0.0))));
}

TEST_CASE("classify: 0.5 tie goes to normal; sigmoid is monotone") {
  HeadParams head;
  head.w_ap = Tensor({2, 1}, 0.0);
  head.w_c = Tensor({2, 1}, 0.0);
  head.w_c.data = {1.0, 0.0};
  head.b_c = Tensor({1, 1}, 0.0);

  Tensor z({1, 2}, 0.0);
  auto [p0, label0] = classify(z, head);
  CHECK(p0 == 0.5);
  CHECK_FALSE(label0);  // strict >

  z.data = {10.0, 0.0};
  auto [p1, label1] = classify(z, head);
  CHECK(p1 > 0.9999);
  CHECK(label1);

  double prev = -1.0;
  for (double logit = -6; logit <= 6; logit += 0.5) {
    z.data = {logit, 0.0};
    const auto [p, l] = classify(z, head);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("bce_loss: exact fits, ln 2 at 0.5, errors, gradient") {
  CHECK(bce_loss({1.0, 0.0}, {1, 0}, 1.0) < 1e-6);
  CHECK(bce_loss({0.5, 0.5, 0.5}, {1, 0, 1}, 1.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK_THROWS_AS(bce_loss({0.5}, {1, 0}, 1.0), std::invalid_argument);

  // graph and scalar paths agree, including pos_weight
  Rng rng(11);
  Tensor probs({1, 4});
  for (auto& v : probs.data) v = rng.uniform(0.05, 0.95);
  const std::vector<int> labels = {1, 0, 0, 1};
  const Var loss = bce_loss_graph(Var::param(probs), labels, 3.0);
  CHECK(loss.value().data[0] ==
        doctest::Approx(bce_loss({probs.data.begin(), probs.data.end()}, labels, 3.0))
            .epsilon(1e-12));

  const auto res = test::check_gradients(
      [&](const std::vector<Var>& v) { return bce_loss_graph(v[0], labels, 3.0); },
      {probs});
  INFO("worst rel err " << res.worst_rel);
  CHECK(res.ok);
}

TEST_CASE("forward: deterministic, mask semantics, permutation invariance") {
  const Hyperparams hp = tiny_hyperparams();
  const ModelParams params = init_params(hp, 9);
  const Scenario s = tiny_scenario(4, 20, 17);

  const double p1 = forward(s, 1, nullptr, params);
  const double p2 = forward(s, 1, nullptr, params);
  CHECK(p1 == p2);  // bitwise

  // fully masking agent 3 equals deleting agent 3, bitwise
  BlackoutMask mask;
  mask.n_agents = 4;
  mask.timesteps = s.timesteps();
  mask.ego_index = 1;
  mask.grid.assign(4 * s.timesteps(), 0);
  for (int t = 0; t < s.timesteps(); ++t)
    mask.grid[3 * s.timesteps() + t] = 1;
  const double masked = forward(s, 1, &mask, params);
  Scenario removed = s;
  removed.agents.pop_back();
  const double deleted = forward(removed, 1, nullptr, params);
  CHECK(masked == deleted);

  // empty mask equals no mask
  BlackoutMask none = mask;
  none.grid.assign(4 * s.timesteps(), 0);
  CHECK(forward(s, 1, &none, params) == p1);

  // permuting non-ego agents moves the output by at most 1e-9
  Scenario permuted = s;
  std::swap(permuted.agents[0], permuted.agents[3]);
  const double pp = forward(permuted, 1, nullptr, params);
  CHECK(std::abs(pp - p1) <= 1e-9);

  // masking everything but the ego still yields a probability (N = 1 graphs)
  BlackoutMask all_others = mask;
  all_others.grid.assign(4 * s.timesteps(), 1);
  for (int t = 0; t < s.timesteps(); ++t)
    all_others.grid[1 * s.timesteps() + t] = 0;
  const double lonely = forward(s, 1, &all_others, params);
  CHECK(lonely >= 0.0);
  CHECK(lonely <= 1.0);

  // masked ego is a contract violation
  BlackoutMask bad = mask;
  bad.grid.assign(4 * s.timesteps(), 0);
  bad.grid[1 * s.timesteps() + 5] = 1;
  CHECK_THROWS_AS(forward(s, 1, &bad, params), std::invalid_argument);
}

TEST_CASE("forward: rejects sequences beyond t_max") {
  Hyperparams hp = tiny_hyperparams(16);
  const ModelParams params = init_params(hp, 1);
  const Scenario s = tiny_scenario(2, 20, 3);
  CHECK_THROWS_AS(forward(s, 0, nullptr, params), std::invalid_argument);
}

TEST_CASE("model save/load round trip is bitwise") {
  const Hyperparams hp = tiny_hyperparams();
  const ModelParams params = init_params(hp, 23);
  const std::string path =
      (std::filesystem::temp_directory_path() / "cpad_model_rt.json").string();
  DatasetSplit split;
  split.train = {{"scn0", "a0"}};
  split.val = {{"scn1", "a0"}};
  split.test = {{"scn2", "a1"}};
  save_model({params, split}, path);
  const ModelFile back = load_model(path);
  std::remove(path.c_str());

  const auto orig = params.param_refs();
  const auto loaded = back.params.param_refs();
  REQUIRE(orig.size() == loaded.size());
  for (size_t i = 0; i < orig.size(); ++i) {
    CHECK(orig[i].path == loaded[i].path);
    CHECK(orig[i].tensor->data == loaded[i].tensor->data);
  }
  REQUIRE(back.split.has_value());
  CHECK(back.split->train == split.train);
  CHECK(back.split->val == split.val);
  CHECK(back.split->test == split.test);

  const Scenario s = tiny_scenario(3, 12, 5);
  CHECK(forward(s, 0, nullptr, params) == forward(s, 0, nullptr, back.params));
}

TEST_CASE("full model gradient check on a toy configuration") {
  Hyperparams hp;
  hp.sensor_dim = kSensorDim;
  hp.hidden = 8;
  hp.gat_heads = 2;
  hp.enc_layers = 1;
  hp.enc_heads = 2;
  hp.t_max = 8;
  const ModelParams params = init_params(hp, 31);
  const Scenario s = tiny_scenario(2, 6, 7);

  std::vector<Tensor> inputs;
  for (const auto& ref : params.param_refs()) inputs.push_back(*ref.tensor);

  // check_gradients needs the graph built from the supplied Vars, so wire the
  // ModelVars fields manually in param_refs order.
  auto build2 = [&](const std::vector<Var>& v) {
    ModelVars vars;
    size_t i = 0;
    for (int h = 0; h < hp.gat_heads; ++h) {
      vars.fusion.layer1.W.push_back(v[i++]);
      vars.fusion.layer1.a.push_back(v[i++]);
    }
    for (int h = 0; h < hp.gat_heads; ++h) {
      vars.fusion.layer2.W.push_back(v[i++]);
      vars.fusion.layer2.a.push_back(v[i++]);
    }
    vars.fusion.pool_w = v[i++];
    vars.fusion.pool_b = v[i++];
    for (int l = 0; l < hp.enc_layers; ++l) {
      EncoderLayerVars lv;
      lv.wq = v[i++];
      lv.wk = v[i++];
      lv.wv = v[i++];
      lv.wo = v[i++];
      lv.ff1_w = v[i++];
      lv.ff1_b = v[i++];
      lv.ff2_w = v[i++];
      lv.ff2_b = v[i++];
      lv.ln1_g = v[i++];
      lv.ln1_b = v[i++];
      lv.ln2_g = v[i++];
      lv.ln2_b = v[i++];
      vars.encoder.push_back(lv);
    }
    vars.w_ap = v[i++];
    vars.w_c = v[i++];
    vars.b_c = v[i++];
    const Var prob = forward_graph(s, 0, nullptr, vars, hp);
    return bce_loss_graph(prob, {1}, 3.0);
  };

  const auto res = test::check_gradients(build2, inputs);
  INFO("worst rel err " << res.worst_rel << " at " << res.where);
  CHECK(res.ok);
}
