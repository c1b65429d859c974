// Copyright 2026 The intentfuse Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef INTENTFUSE_METRICS_H_
#define INTENTFUSE_METRICS_H_

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace intentfuse {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

// Predict positive iff prob >= threshold.
Confusion confusion(double threshold, const std::vector<double>& probs,
                    const std::vector<int>& labels);

double accuracy(const Confusion& c);
double precision(const Confusion& c);  // 0 when no positive predictions
double recall(const Confusion& c);     // 0 when no positives
double f1(const Confusion& c);         // 0 when TP = 0

// Matthews correlation; a zero denominator maps to 0 by convention.
double mcc(const Confusion& c);

// Mann-Whitney rank statistic with half credit for ties; equals the
// trapezoidal ROC area. Throws MetricError unless both classes appear.
double auc_roc(const std::vector<double>& scores,
               const std::vector<int>& labels);

// Step-interpolated average precision. Tied scores are absorbed as one
// group, so a constant ranking scores exactly the positive rate.
double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels);

double brier(const std::vector<double>& probs, const std::vector<int>& labels);

// Mean negative log-likelihood with probabilities clamped away from 0/1.
double nll(const std::vector<double>& probs, const std::vector<int>& labels,
           double clamp = 1e-12);

enum class EceVariant { kClass1, kConfidence };
inline constexpr int kDefaultEceBins = 15;

// Equal-width binning on [0,1]; empty bins contribute nothing.
double ece(const std::vector<double>& probs, const std::vector<int>& labels,
           int bins = kDefaultEceBins, EceVariant variant = EceVariant::kClass1);

// F1-maximizing threshold over midpoints of sorted unique validation
// probabilities plus {0, 0.5, 1}; ties resolve toward 0.5, then to the
// smaller threshold. The returned value is frozen and reused at test time.
double select_threshold(const std::vector<double>& probs,
                        const std::vector<int>& labels);

// ROC sweep over descending unique score groups, starting at (0,0) and
// ending at (1,1). Trapezoid area over the points equals auc_roc exactly.
std::vector<std::pair<double, double>> roc_points(
    const std::vector<double>& scores, const std::vector<int>& labels);

// Precision-recall sweep over the same groups, starting at recall 0 with
// the first group's precision. The step area sum (x_k - x_{k-1}) * y_k
// equals average_precision exactly.
std::vector<std::pair<double, double>> pr_points(
    const std::vector<double>& scores, const std::vector<int>& labels);

// "x,y" header plus one shortest-round-trip row per point.
std::string curve_csv(const std::vector<std::pair<double, double>>& points);

struct EvalReport {
  double accuracy = 0, f1 = 0, auc_roc = 0, average_precision = 0, mcc = 0;
  double precision_pos = 0, recall_pos = 0;
  double precision_neg = 0, recall_neg = 0, f1_neg = 0;
  double brier = 0, nll = 0, ece = 0, ece_confidence = 0;
  double threshold = 0.5;
  int ece_bins = kDefaultEceBins;
  std::size_t n = 0;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

// Every metric of one run at a fixed threshold.
EvalReport evaluate_binary(const std::vector<double>& probs,
                           const std::vector<int>& labels, double threshold);

struct SeedAggregate {
  std::vector<std::string> metric_names;
  std::vector<double> means;
  std::vector<double> stds;  // sample std, N-1

  // Paper-style "m +- s" with three decimals.
  std::string formatted(std::size_t metric_index) const;
  nlohmann::json to_json() const;
};

// Mean and sample std per metric over per-seed reports; needs >= 2.
SeedAggregate aggregate_seeds(const std::vector<EvalReport>& reports);

}  // namespace intentfuse

#endif  // INTENTFUSE_METRICS_H_
