#include "cpad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace cpad {

ConfusionMatrix confusion(const std::vector<int>& labels,
                          const std::vector<int>& predictions) {
  if (labels.size() != predictions.size())
    throw std::invalid_argument("confusion: labels/predictions length mismatch");
  ConfusionMatrix cm;
  for (size_t i = 0; i < labels.size(); ++i) {
    const bool y = labels[i] != 0, p = predictions[i] != 0;
    if (y && p) ++cm.tp;
    else if (!y && p) ++cm.fp;
    else if (y && !p) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

ScalarMetrics scalar_metrics(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw std::invalid_argument("scalar_metrics: empty matrix");
  const double tp = cm.tp, fp = cm.fp, fn = cm.fn, tn = cm.tn;
  ScalarMetrics m{};
  m.precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
  m.recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.accuracy = (tp + tn) / cm.total();
  const double denom2 = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  m.mcc = denom2 > 0 ? (tp * tn - fp * fn) / std::sqrt(denom2) : 0.0;
  return m;
}

RocResult roc_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
  if (labels.size() != scores.size())
    throw std::invalid_argument("roc_auc: labels/scores length mismatch");
  long n_pos = 0, n_neg = 0;
  for (int y : labels) (y != 0 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("roc_auc: needs both classes present");

  std::vector<size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  RocResult res;
  res.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  double area = 0.0;
  long tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    // group all samples with equal score into one threshold step
    const double s = scores[order[i]];
    long dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] != 0 ? dtp : dfp) += 1;
      ++i;
    }
    const double tpr0 = static_cast<double>(tp) / n_pos;
    const double fpr0 = static_cast<double>(fp) / n_neg;
    tp += dtp;
    fp += dfp;
    const double tpr1 = static_cast<double>(tp) / n_pos;
    const double fpr1 = static_cast<double>(fp) / n_neg;
    area += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;  // trapezoid across the tie group
    res.points.push_back({s, fpr1, tpr1});
  }
  res.auc = area;
  return res;
}

std::string report_to_json(const MetricsReport& r, int n_samples) {
  nlohmann::ordered_json j;
  j["f1"] = r.f1;
  j["auc"] = r.auc;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["mcc"] = r.mcc;
  j["accuracy"] = r.accuracy;
  j["confusion"] = {{"tp", r.confusion.tp},
                    {"fp", r.confusion.fp},
                    {"fn", r.confusion.fn},
                    {"tn", r.confusion.tn}};
  j["n"] = n_samples;
  return j.dump(2);
}

}  // namespace cpad
