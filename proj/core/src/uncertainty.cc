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

#include "intentfuse/uncertainty.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "intentfuse/error.h"
#include "intentfuse/metrics.h"

namespace intentfuse {

namespace {

void check_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) {
    throw DataError(std::string(what) + " contains non-finite values");
  }
}

// Lower-triangular Cholesky factor of an SPD matrix.
Tensor cholesky(const Tensor& m) {
  const std::size_t d = m.rows();
  Tensor l = Tensor::zeros(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = m.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        if (!(s > 0.0)) {
          throw DataError("matrix is not positive definite (pivot " +
                          std::to_string(i) + " = " + std::to_string(s) + ")");
        }
        l.at(i, j) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  }
  return l;
}

}  // namespace

std::string detector_mode_to_string(DetectorMode m) {
  return m == DetectorMode::kGlobal ? "global" : "class_conditional";
}

DetectorMode detector_mode_from_string(const std::string& s) {
  if (s == "global") return DetectorMode::kGlobal;
  if (s == "class_conditional") return DetectorMode::kClassConditional;
  throw ConfigError("unknown detector mode '" + s + "'");
}

std::string embedding_source_to_string(EmbeddingSource s) {
  return s == EmbeddingSource::kAnomalyMean ? "anomaly_mean"
                                            : "classifier_feature";
}

EmbeddingSource embedding_source_from_string(const std::string& s) {
  if (s == "anomaly_mean") return EmbeddingSource::kAnomalyMean;
  if (s == "classifier_feature") return EmbeddingSource::kClassifierFeature;
  throw ConfigError("unknown embedding source '" + s + "'");
}

Tensor spd_inverse(const Tensor& m) {
  if (m.rank() != 2 || m.rows() != m.cols()) {
    throw ShapeError("spd_inverse expects a square matrix, got " +
                     m.shape_str());
  }
  const std::size_t d = m.rows();
  const Tensor l = cholesky(m);
  // Invert column by column: solve L z = e_j, then L^T x = z.
  Tensor inv = Tensor::zeros(d, d);
  std::vector<double> z(d), x(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) {
      double s = (i == j) ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * z[k];
      z[i] = s / l.at(i, i);
    }
    for (std::size_t ii = d; ii-- > 0;) {
      double s = z[ii];
      for (std::size_t k = ii + 1; k < d; ++k) s -= l.at(k, ii) * x[k];
      x[ii] = s / l.at(ii, ii);
    }
    for (std::size_t i = 0; i < d; ++i) inv.at(i, j) = x[i];
  }
  // Symmetrise to keep the quadratic form exact under round-off.
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double avg = 0.5 * (inv.at(i, j) + inv.at(j, i));
      inv.at(i, j) = avg;
      inv.at(j, i) = avg;
    }
  }
  return inv;
}

LedoitWolfResult ledoit_wolf_cov(const Tensor& rows, double ridge) {
  if (rows.rank() != 2) {
    throw ShapeError("ledoit_wolf_cov expects a matrix, got " +
                     rows.shape_str());
  }
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  if (n < 2) {
    throw DataError("covariance estimation needs at least 2 rows, got " +
                    std::to_string(n));
  }
  if (d == 0) throw ShapeError("ledoit_wolf_cov: zero-width embeddings");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw ConfigError("ridge must be finite and >= 0");
  }
  check_finite(rows, "ledoit_wolf_cov input");

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += rows.at(i, j);
  }
  for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);

  Tensor centered = Tensor::zeros(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      centered.at(i, j) = rows.at(i, j) - mean[j];
    }
  }

  // S = Y^T Y / (n - 1).
  Tensor s = Tensor::zeros(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      const double ya = centered.at(i, a);
      if (ya == 0.0) continue;
      for (std::size_t b = 0; b < d; ++b) {
        s.at(a, b) += ya * centered.at(i, b);
      }
    }
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) s.at(a, b) /= denom;
  }

  const double dd = static_cast<double>(d);
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) trace += s.at(a, a);
  const double m = trace / dd;

  // dist2 = ||S - m I||_F^2 / d; when zero, S is already the target.
  double dist2 = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      const double delta = s.at(a, b) - (a == b ? m : 0.0);
      dist2 += delta * delta;
    }
  }
  dist2 /= dd;

  // bbar2 = (1/n^2) sum_i ||y_i y_i^T - S||_F^2 / d.
  double bbar2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const double ya = centered.at(i, a);
      for (std::size_t b = 0; b < d; ++b) {
        const double delta = ya * centered.at(i, b) - s.at(a, b);
        acc += delta * delta;
      }
    }
    bbar2 += acc / dd;
  }
  bbar2 /= static_cast<double>(n) * static_cast<double>(n);

  const double b2 = std::min(bbar2, dist2);
  double rho = dist2 > 0.0 ? b2 / dist2 : 0.0;
  rho = std::clamp(rho, 0.0, 1.0);

  LedoitWolfResult out;
  out.rho = rho;
  out.sigma = Tensor::zeros(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      double v = (1.0 - rho) * s.at(a, b);
      if (a == b) v += rho * m + ridge;
      out.sigma.at(a, b) = v;
    }
  }
  return out;
}

std::size_t MahalanobisDetector::dim() const {
  return groups.empty() ? 0 : groups.front().centroid.size();
}

nlohmann::json MahalanobisDetector::to_json() const {
  nlohmann::json j;
  j["mode"] = detector_mode_to_string(mode);
  j["source"] = embedding_source_to_string(source);
  j["ridge"] = ridge;
  j["groups"] = nlohmann::json::array();
  for (const Group& g : groups) {
    nlohmann::json jg;
    jg["label"] = g.label;
    jg["centroid"] = g.centroid;
    jg["shrinkage"] = g.shrinkage;
    const std::size_t d = g.centroid.size();
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < d; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t k = 0; k < d; ++k) row.push_back(g.precision.at(i, k));
      rows.push_back(std::move(row));
    }
    jg["precision"] = std::move(rows);
    j["groups"].push_back(std::move(jg));
  }
  return j;
}

MahalanobisDetector MahalanobisDetector::from_json(const nlohmann::json& j) {
  MahalanobisDetector det;
  det.mode = detector_mode_from_string(j.at("mode").get<std::string>());
  det.source = embedding_source_from_string(j.at("source").get<std::string>());
  det.ridge = j.at("ridge").get<double>();
  for (const auto& jg : j.at("groups")) {
    Group g;
    g.label = jg.at("label").get<int>();
    g.centroid = jg.at("centroid").get<std::vector<double>>();
    g.shrinkage = jg.at("shrinkage").get<double>();
    const auto& rows = jg.at("precision");
    const std::size_t d = g.centroid.size();
    if (rows.size() != d) {
      throw DataError("detector precision matrix does not match centroid");
    }
    g.precision = Tensor::zeros(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      const auto& row = rows.at(i);
      if (row.size() != d) {
        throw DataError("detector precision matrix is not square");
      }
      for (std::size_t k = 0; k < d; ++k) {
        g.precision.at(i, k) = row.at(k).get<double>();
      }
    }
    det.groups.push_back(std::move(g));
  }
  if (det.groups.empty()) throw DataError("detector has no groups");
  return det;
}

namespace {

MahalanobisDetector::Group fit_group(const Tensor& rows, int label,
                                     double ridge) {
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  MahalanobisDetector::Group g;
  g.label = label;
  g.centroid.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) g.centroid[j] += rows.at(i, j);
  }
  for (std::size_t j = 0; j < d; ++j) g.centroid[j] /= static_cast<double>(n);
  const LedoitWolfResult lw = ledoit_wolf_cov(rows, ridge);
  g.shrinkage = lw.rho;
  g.precision = spd_inverse(lw.sigma);
  return g;
}

}  // namespace

MahalanobisDetector fit_detector(const Tensor& embeddings,
                                 const std::vector<int>& labels,
                                 DetectorMode mode, EmbeddingSource source,
                                 double ridge) {
  if (embeddings.rank() != 2) {
    throw ShapeError("fit_detector expects [n, d] embeddings, got " +
                     embeddings.shape_str());
  }
  const std::size_t n = embeddings.rows();
  if (labels.size() != n) {
    throw DataError("fit_detector: " + std::to_string(n) + " embeddings vs " +
                    std::to_string(labels.size()) + " labels");
  }
  check_finite(embeddings, "fit_detector embeddings");

  MahalanobisDetector det;
  det.mode = mode;
  det.source = source;
  det.ridge = ridge;

  if (mode == DetectorMode::kGlobal) {
    det.groups.push_back(fit_group(embeddings, -1, ridge));
    return det;
  }

  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < n; ++i) by_label[labels[i]].push_back(i);
  if (by_label.size() < 2) {
    throw DataError(
        "class-conditional detector needs at least two classes, got " +
        std::to_string(by_label.size()));
  }
  const std::size_t d = embeddings.cols();
  for (const auto& [label, idx] : by_label) {
    if (idx.size() < 2) {
      throw DataError("class " + std::to_string(label) + " has only " +
                      std::to_string(idx.size()) +
                      " samples; need >= 2 per class");
    }
    Tensor rows = Tensor::zeros(idx.size(), d);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        rows.at(r, c) = embeddings.at(idx[r], c);
      }
    }
    det.groups.push_back(fit_group(rows, label, ridge));
  }
  return det;
}

double mahalanobis_score(const MahalanobisDetector& det,
                         const std::vector<double>& embedding) {
  if (det.groups.empty()) throw DataError("detector has no fitted groups");
  const std::size_t d = det.dim();
  if (embedding.size() != d) {
    throw ShapeError("embedding width " + std::to_string(embedding.size()) +
                     " does not match detector dim " + std::to_string(d));
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> diff(d);
  for (const MahalanobisDetector::Group& g : det.groups) {
    for (std::size_t j = 0; j < d; ++j) diff[j] = embedding[j] - g.centroid[j];
    double q = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j) row += g.precision.at(i, j) * diff[j];
      q += diff[i] * row;
    }
    best = std::min(best, q);
  }
  return std::max(best, 0.0);
}

std::vector<double> mahalanobis_scores(const MahalanobisDetector& det,
                                       const Tensor& embeddings) {
  if (embeddings.rank() != 2) {
    throw ShapeError("mahalanobis_scores expects [n, d] embeddings");
  }
  const std::size_t n = embeddings.rows();
  const std::size_t d = embeddings.cols();
  std::vector<double> scores(n);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[j] = embeddings.at(i, j);
    scores[i] = mahalanobis_score(det, x);
  }
  return scores;
}

double kl_score(double kl) {
  if (!std::isfinite(kl)) throw DataError("kl_score: non-finite KL value");
  return 1.0 / (1.0 + std::exp(-kl));
}

SelectivePrediction selective_predict(const std::vector<int>& predictions,
                                      const std::vector<int>& labels,
                                      const std::vector<double>& risk,
                                      double coverage) {
  const std::size_t n = predictions.size();
  if (labels.size() != n || risk.size() != n) {
    throw MetricError("selective_predict: mismatched input lengths");
  }
  if (n == 0) throw MetricError("selective_predict: empty inputs");
  if (!(coverage > 0.0) || coverage > 1.0) {
    throw ConfigError("coverage must lie in (0, 1], got " +
                      std::to_string(coverage));
  }
  for (double r : risk) {
    if (!std::isfinite(r)) {
      throw MetricError("selective_predict: non-finite risk score");
    }
  }

  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(coverage * static_cast<double>(n) - 1e-12));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return risk[a] < risk[b];
                   });

  SelectivePrediction out;
  out.kept.assign(order.begin(),
                  order.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(out.kept.begin(), out.kept.end());
  std::size_t correct = 0;
  for (std::size_t i : out.kept) {
    if (predictions[i] == labels[i]) ++correct;
  }
  out.coverage = static_cast<double>(keep) / static_cast<double>(n);
  out.accuracy =
      static_cast<double>(correct) / static_cast<double>(out.kept.size());
  return out;
}

ErrorDetection error_detection_eval(const std::vector<int>& predictions,
                                    const std::vector<int>& labels,
                                    const std::vector<double>& risk) {
  const std::size_t n = predictions.size();
  if (labels.size() != n || risk.size() != n) {
    throw MetricError("error_detection_eval: mismatched input lengths");
  }
  if (n == 0) throw MetricError("error_detection_eval: empty inputs");
  std::vector<int> incorrect(n);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    incorrect[i] = predictions[i] != labels[i] ? 1 : 0;
    errors += static_cast<std::size_t>(incorrect[i]);
  }
  if (errors == 0 || errors == n) {
    throw MetricError(
        "error detection needs both correct and incorrect predictions");
  }
  ErrorDetection out;
  out.auroc = auc_roc(risk, incorrect);
  out.auprc = average_precision(risk, incorrect);
  out.error_rate = static_cast<double>(errors) / static_cast<double>(n);
  return out;
}

}  // namespace intentfuse
