#include <algorithm>
#include <cmath>

#include "cpad/metrics.hpp"
#include "cpad/rng.hpp"
#include "doctest.h"

using namespace cpad;

namespace {

// O(n^2) pairwise concordance: (concordant + half ties) / (pos * neg) pairs.
double concordance_auc(const std::vector<int>& labels,
                       const std::vector<double>& scores) {
  double num = 0.0;
  long pairs = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < labels.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  return num / pairs;
}

}  // namespace

TEST_CASE("confusion: basic counting") {
  const ConfusionMatrix all = confusion({1, 1, 0, 0}, {1, 1, 0, 0});
  CHECK(all.fp == 0);
  CHECK(all.fn == 0);
  CHECK(all.tp == 2);
  CHECK(all.tn == 2);

  const ConfusionMatrix mixed = confusion({1, 1, 0, 0}, {1, 0, 0, 1});
  CHECK(mixed.tp == 1);
  CHECK(mixed.fn == 1);
  CHECK(mixed.tn == 1);
  CHECK(mixed.fp == 1);

  const ConfusionMatrix empty = confusion({}, {});
  CHECK(empty.total() == 0);

  CHECK_THROWS_AS(confusion({1}, {1, 0}), std::invalid_argument);
}

TEST_CASE("scalar_metrics: fixture matches direct formula evaluation") {
  const ConfusionMatrix cm{45, 5, 15, 135};
  const ScalarMetrics m = scalar_metrics(cm);
  // direct evaluation of the standard formulas is the oracle
  CHECK(m.precision == doctest::Approx(45.0 / 50.0).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(45.0 / 60.0).epsilon(1e-12));
  CHECK(m.f1 == doctest::Approx(2 * 0.9 * 0.75 / (0.9 + 0.75)).epsilon(1e-12));
  CHECK(m.accuracy == doctest::Approx(180.0 / 200.0).epsilon(1e-12));
  const double mcc_oracle =
      (45.0 * 135 - 5.0 * 15) / std::sqrt(50.0 * 60.0 * 140.0 * 150.0);
  CHECK(m.mcc == doctest::Approx(mcc_oracle).epsilon(1e-12));
  CHECK(m.mcc == doctest::Approx(0.755929).epsilon(1e-4));
}

TEST_CASE("scalar_metrics: perfect matrix and zero-denominator conventions") {
  const ScalarMetrics perfect = scalar_metrics({10, 0, 0, 10});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.mcc == 1.0);

  const ScalarMetrics no_pred = scalar_metrics({0, 0, 5, 15});
  CHECK(no_pred.precision == 0.0);  // tp + fp = 0 convention
  CHECK(no_pred.recall == 0.0);
  CHECK(no_pred.f1 == 0.0);
  CHECK(no_pred.mcc == 0.0);  // zero marginal convention

  CHECK_THROWS_AS(scalar_metrics({0, 0, 0, 0}), std::invalid_argument);
}

TEST_CASE("scalar_metrics: f1 is the harmonic mean of reported precision/recall") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionMatrix cm;
    cm.tp = rng.uniform_int(0, 50);
    cm.fp = rng.uniform_int(0, 50);
    cm.fn = rng.uniform_int(0, 50);
    cm.tn = rng.uniform_int(1, 50);
    const ScalarMetrics m = scalar_metrics(cm);
    if (m.precision + m.recall > 0)
      CHECK(std::abs(m.f1 - 2 * m.precision * m.recall / (m.precision + m.recall)) <
            1e-12);
  }
}

TEST_CASE("roc_auc: separable and degenerate score patterns") {
  CHECK(roc_auc({0, 0, 1, 1}, {0.1, 0.2, 0.8, 0.9}).auc == doctest::Approx(1.0));
  CHECK(roc_auc({0, 1, 0, 1}, {0.5, 0.5, 0.5, 0.5}).auc == doctest::Approx(0.5));
  CHECK_THROWS_AS(roc_auc({1, 1}, {0.1, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(roc_auc({0, 0}, {0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("roc_auc: matches the pairwise concordance oracle with ties") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform_int(196));
    std::vector<int> labels(n);
    std::vector<double> scores(n);
    bool saw[2] = {false, false};
    for (int i = 0; i < n; ++i) {
      labels[i] = rng.bernoulli(0.4) ? 1 : 0;
      saw[labels[i]] = true;
      // coarse score grid forces plenty of ties
      scores[i] = std::round(rng.uniform() * 8.0) / 8.0;
    }
    if (!saw[0] || !saw[1]) continue;
    const double mine = roc_auc(labels, scores).auc;
    const double oracle = concordance_auc(labels, scores);
    CHECK(std::abs(mine - oracle) < 1e-9);
  }
}

TEST_CASE("roc_auc: invariant under strictly monotone score transforms") {
  Rng rng(77);
  std::vector<int> labels(100);
  std::vector<double> scores(100);
  for (int i = 0; i < 100; ++i) {
    labels[i] = rng.bernoulli(0.3) ? 1 : 0;
    scores[i] = rng.uniform(-2.0, 2.0);
  }
  labels[0] = 1;
  labels[1] = 0;
  const double base = roc_auc(labels, scores).auc;
  std::vector<double> expd = scores, affine = scores;
  for (auto& v : expd) v = std::exp(v);
  for (auto& v : affine) v = 3.0 * v + 11.0;
  CHECK(roc_auc(labels, expd).auc == doctest::Approx(base).epsilon(1e-12));
  CHECK(roc_auc(labels, affine).auc == doctest::Approx(base).epsilon(1e-12));

  // swapping labels and negating scores preserves AUC
  std::vector<int> flipped = labels;
  for (auto& y : flipped) y = 1 - y;
  std::vector<double> negated = scores;
  for (auto& v : negated) v = -v;
  CHECK(roc_auc(flipped, negated).auc == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("roc_auc: curve is monotone nondecreasing in both axes") {
  Rng rng(13);
  std::vector<int> labels(60);
  std::vector<double> scores(60);
  for (int i = 0; i < 60; ++i) {
    labels[i] = rng.bernoulli(0.5) ? 1 : 0;
    scores[i] = std::round(rng.uniform() * 4.0) / 4.0;
  }
  labels[0] = 1;
  labels[1] = 0;
  const RocResult r = roc_auc(labels, scores);
  for (size_t i = 1; i < r.points.size(); ++i) {
    CHECK(r.points[i].fpr >= r.points[i - 1].fpr - 1e-15);
    CHECK(r.points[i].tpr >= r.points[i - 1].tpr - 1e-15);
  }
  CHECK(r.points.back().fpr == doctest::Approx(1.0));
  CHECK(r.points.back().tpr == doctest::Approx(1.0));
}
