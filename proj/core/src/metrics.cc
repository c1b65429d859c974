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

#include "intentfuse/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "intentfuse/error.h"
#include "intentfuse/numfmt.h"

namespace intentfuse {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw MetricError("metric inputs have mismatched lengths");
  if (a == 0) throw MetricError("metric inputs are empty");
}

void check_labels(const std::vector<int>& labels) {
  for (int y : labels)
    if (y != 0 && y != 1) throw MetricError("labels must be 0 or 1");
}

void check_probs(const std::vector<double>& probs) {
  for (double p : probs)
    if (!(p >= 0.0 && p <= 1.0))
      throw MetricError("probabilities must lie in [0, 1]");
}

std::size_t count_pos(const std::vector<int>& labels) {
  return static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), 1));
}

}  // namespace

Confusion confusion(double threshold, const std::vector<double>& probs,
                    const std::vector<int>& labels) {
  check_lengths(probs.size(), labels.size());
  check_labels(labels);
  check_probs(probs);
  Confusion c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = probs[i] >= threshold;
    if (pred && labels[i] == 1)
      ++c.tp;
    else if (pred)
      ++c.fp;
    else if (labels[i] == 1)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double accuracy(const Confusion& c) {
  const std::size_t n = c.total();
  return n == 0 ? 0.0 : double(c.tp + c.tn) / double(n);
}

double precision(const Confusion& c) {
  const std::size_t denom = c.tp + c.fp;
  return denom == 0 ? 0.0 : double(c.tp) / double(denom);
}

double recall(const Confusion& c) {
  const std::size_t denom = c.tp + c.fn;
  return denom == 0 ? 0.0 : double(c.tp) / double(denom);
}

double f1(const Confusion& c) {
  if (c.tp == 0) return 0.0;
  const double p = precision(c), r = recall(c);
  return 2.0 * p * r / (p + r);
}

double mcc(const Confusion& c) {
  const double tp = double(c.tp), fp = double(c.fp);
  const double tn = double(c.tn), fn = double(c.fn);
  const double denom_sq =
      (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom_sq == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom_sq);
}

double auc_roc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  check_lengths(scores.size(), labels.size());
  check_labels(labels);
  const std::size_t n = scores.size();
  const std::size_t pos = count_pos(labels);
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0)
    throw MetricError("AUC-ROC requires both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Midranks: tied scores share the average of their rank range.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * double(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    i = j;
  }
  return (rank_sum_pos - 0.5 * double(pos) * double(pos + 1)) /
         (double(pos) * double(neg));
}

double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
  check_lengths(scores.size(), labels.size());
  check_labels(labels);
  const std::size_t n = scores.size();
  const std::size_t pos = count_pos(labels);
  if (pos == 0) throw MetricError("average precision requires a positive");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  // Tied scores are one retrieval group: precision is evaluated after the
  // whole group, weighted by the group's recall increment. A constant
  // ranking therefore scores exactly the positive rate.
  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    std::size_t group_tp = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++group_tp;
      ++j;
    }
    tp += group_tp;
    seen = j;
    if (group_tp > 0)
      ap += (double(tp) / double(seen)) * (double(group_tp) / double(pos));
    i = j;
  }
  return ap;
}

double brier(const std::vector<double>& probs,
             const std::vector<int>& labels) {
  check_lengths(probs.size(), labels.size());
  check_labels(labels);
  check_probs(probs);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double d = probs[i] - double(labels[i]);
    acc += d * d;
  }
  return acc / double(probs.size());
}

double nll(const std::vector<double>& probs, const std::vector<int>& labels,
           double clamp) {
  check_lengths(probs.size(), labels.size());
  check_labels(labels);
  check_probs(probs);
  if (!(clamp > 0.0 && clamp < 0.5))
    throw MetricError("nll clamp must lie in (0, 0.5)");
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::min(1.0 - clamp, std::max(clamp, probs[i]));
    acc -= labels[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return acc / double(probs.size());
}

double ece(const std::vector<double>& probs, const std::vector<int>& labels,
           int bins, EceVariant variant) {
  check_lengths(probs.size(), labels.size());
  check_labels(labels);
  check_probs(probs);
  if (bins < 1) throw MetricError("ece requires at least one bin");

  const std::size_t n = probs.size();
  std::vector<double> conf_sum(bins, 0.0), hit_sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double conf;
    double hit;
    if (variant == EceVariant::kClass1) {
      conf = probs[i];
      hit = double(labels[i]);
    } else {
      const bool pred = probs[i] >= 0.5;
      conf = pred ? probs[i] : 1.0 - probs[i];
      hit = double(int(pred) == labels[i]);
    }
    int b = int(conf * bins);
    if (b == bins) b = bins - 1;  // conf == 1.0 joins the last bin
    conf_sum[b] += conf;
    hit_sum[b] += hit;
    ++count[b];
  }
  double e = 0.0;
  for (int b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double avg_conf = conf_sum[b] / double(count[b]);
    const double avg_hit = hit_sum[b] / double(count[b]);
    e += (double(count[b]) / double(n)) * std::abs(avg_conf - avg_hit);
  }
  return e;
}

double select_threshold(const std::vector<double>& probs,
                        const std::vector<int>& labels) {
  check_lengths(probs.size(), labels.size());
  check_labels(labels);
  check_probs(probs);
  const std::size_t pos = count_pos(labels);
  if (pos == 0 || pos == labels.size())
    throw MetricError("threshold selection requires both classes");

  std::vector<double> uniq = probs;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  // A single distinct probability admits no informative cut; fall back to
  // the neutral default instead of degenerate all-positive.
  if (uniq.size() == 1) return 0.5;

  std::vector<double> candidates = {0.0, 0.5, 1.0};
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i)
    candidates.push_back(0.5 * (uniq[i] + uniq[i + 1]));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  double best_t = 0.5;
  double best_f1 = -1.0;
  for (double t : candidates) {
    const double score = f1(confusion(t, probs, labels));
    const bool better =
        score > best_f1 + 1e-15 ||
        (std::abs(score - best_f1) <= 1e-15 &&
         (std::abs(t - 0.5) < std::abs(best_t - 0.5) - 1e-15 ||
          (std::abs(std::abs(t - 0.5) - std::abs(best_t - 0.5)) <= 1e-15 &&
           t < best_t)));
    if (better) {
      best_f1 = score;
      best_t = t;
    }
  }
  return best_t;
}

namespace {

// Descending score groups (tied scores fused), each with its positive and
// negative counts. Shared by both curve sweeps.
struct ScoreGroup {
  std::size_t pos = 0, neg = 0;
};

std::vector<ScoreGroup> sweep_groups(const std::vector<double>& scores,
                                     const std::vector<int>& labels) {
  check_lengths(scores.size(), labels.size());
  check_labels(labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<ScoreGroup> groups;
  std::size_t i = 0;
  while (i < n) {
    ScoreGroup g;
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1)
        ++g.pos;
      else
        ++g.neg;
      ++j;
    }
    groups.push_back(g);
    i = j;
  }
  return groups;
}

}  // namespace

std::vector<std::pair<double, double>> roc_points(
    const std::vector<double>& scores, const std::vector<int>& labels) {
  const auto groups = sweep_groups(scores, labels);
  std::size_t pos = 0, neg = 0;
  for (const auto& g : groups) {
    pos += g.pos;
    neg += g.neg;
  }
  if (pos == 0 || neg == 0)
    throw MetricError("ROC curve requires both classes");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(groups.size() + 1);
  pts.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  for (const auto& g : groups) {
    tp += g.pos;
    fp += g.neg;
    pts.emplace_back(double(fp) / double(neg), double(tp) / double(pos));
  }
  return pts;
}

std::vector<std::pair<double, double>> pr_points(
    const std::vector<double>& scores, const std::vector<int>& labels) {
  const auto groups = sweep_groups(scores, labels);
  std::size_t pos = 0;
  for (const auto& g : groups) pos += g.pos;
  if (pos == 0) throw MetricError("PR curve requires a positive");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(groups.size() + 1);
  std::size_t tp = 0, seen = 0;
  for (const auto& g : groups) {
    tp += g.pos;
    seen += g.pos + g.neg;
    const double prec = double(tp) / double(seen);
    if (pts.empty()) pts.emplace_back(0.0, prec);
    pts.emplace_back(double(tp) / double(pos), prec);
  }
  return pts;
}

std::string curve_csv(const std::vector<std::pair<double, double>>& points) {
  std::string out = "x,y\n";
  for (const auto& [x, y] : points) {
    out += fmt_double(x);
    out += ',';
    out += fmt_double(y);
    out += '\n';
  }
  return out;
}

EvalReport evaluate_binary(const std::vector<double>& probs,
                           const std::vector<int>& labels, double threshold) {
  EvalReport r;
  const Confusion c = confusion(threshold, probs, labels);
  r.accuracy = accuracy(c);
  r.f1 = f1(c);
  r.precision_pos = precision(c);
  r.recall_pos = recall(c);
  // Negative-class rates come from the mirrored confusion.
  Confusion m;
  m.tp = c.tn;
  m.fp = c.fn;
  m.tn = c.tp;
  m.fn = c.fp;
  r.precision_neg = precision(m);
  r.recall_neg = recall(m);
  r.f1_neg = f1(m);
  r.mcc = mcc(c);
  r.auc_roc = auc_roc(probs, labels);
  r.average_precision = average_precision(probs, labels);
  r.brier = brier(probs, labels);
  r.nll = nll(probs, labels);
  r.ece = ece(probs, labels);
  r.ece_confidence =
      ece(probs, labels, kDefaultEceBins, EceVariant::kConfidence);
  r.threshold = threshold;
  r.n = probs.size();
  return r;
}

namespace {

// Order must stay stable: aggregate output and report JSON rely on it.
const std::vector<std::pair<std::string, double EvalReport::*>>&
metric_fields() {
  static const std::vector<std::pair<std::string, double EvalReport::*>> f = {
      {"accuracy", &EvalReport::accuracy},
      {"f1", &EvalReport::f1},
      {"auc_roc", &EvalReport::auc_roc},
      {"average_precision", &EvalReport::average_precision},
      {"mcc", &EvalReport::mcc},
      {"precision_pos", &EvalReport::precision_pos},
      {"recall_pos", &EvalReport::recall_pos},
      {"precision_neg", &EvalReport::precision_neg},
      {"recall_neg", &EvalReport::recall_neg},
      {"f1_neg", &EvalReport::f1_neg},
      {"brier", &EvalReport::brier},
      {"nll", &EvalReport::nll},
      {"ece", &EvalReport::ece},
      {"ece_confidence", &EvalReport::ece_confidence},
  };
  return f;
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  for (const auto& [name, member] : metric_fields()) j[name] = this->*member;
  j["threshold"] = threshold;
  j["ece_bins"] = ece_bins;
  j["n"] = n;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  for (const auto& [name, member] : metric_fields())
    r.*member = j.at(name).get<double>();
  r.threshold = j.at("threshold").get<double>();
  r.ece_bins = j.at("ece_bins").get<int>();
  r.n = j.at("n").get<std::size_t>();
  return r;
}

std::string SeedAggregate::formatted(std::size_t metric_index) const {
  if (metric_index >= means.size())
    throw MetricError("aggregate metric index out of range");
  return fmt_fixed(means[metric_index], 3) + " ± " +
         fmt_fixed(stds[metric_index], 3);
}

nlohmann::json SeedAggregate::to_json() const {
  nlohmann::json j;
  for (std::size_t i = 0; i < metric_names.size(); ++i) {
    j[metric_names[i]] = {{"mean", means[i]},
                          {"std", stds[i]},
                          {"formatted", formatted(i)}};
  }
  return j;
}

SeedAggregate aggregate_seeds(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2)
    throw MetricError("seed aggregation requires at least two reports");
  SeedAggregate agg;
  const double n = double(reports.size());
  for (const auto& [name, member] : metric_fields()) {
    double mean = 0.0;
    for (const EvalReport& r : reports) mean += r.*member;
    mean /= n;
    double ss = 0.0;
    for (const EvalReport& r : reports) {
      const double d = r.*member - mean;
      ss += d * d;
    }
    agg.metric_names.push_back(name);
    agg.means.push_back(mean);
    agg.stds.push_back(std::sqrt(ss / (n - 1.0)));
  }
  return agg;
}

}  // namespace intentfuse
