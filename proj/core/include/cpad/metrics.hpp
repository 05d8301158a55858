#pragma once

#include <string>
#include <vector>

namespace cpad {

struct ConfusionMatrix {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  long total() const { return tp + fp + fn + tn; }
};

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct MetricsReport {
  double f1 = 0.0;
  double auc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double mcc = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

// Anomalous = positive class.
ConfusionMatrix confusion(const std::vector<int>& labels,
                          const std::vector<int>& predictions);

struct ScalarMetrics {
  double precision, recall, f1, accuracy, mcc;
};

// Standard formulas with zero-denominator cases defined as 0.
ScalarMetrics scalar_metrics(const ConfusionMatrix& cm);

struct RocResult {
  double auc;
  std::vector<RocPoint> points;
};

// Threshold sweep over sorted unique scores with tied scores grouped into one
// step; the trapezoidal area then matches the pairwise concordance definition
// exactly. Throws if only one class is present.
RocResult roc_auc(const std::vector<int>& labels, const std::vector<double>& scores);

std::string report_to_json(const MetricsReport& r, int n_samples);

}  // namespace cpad
