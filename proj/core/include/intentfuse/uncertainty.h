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

#ifndef INTENTFUSE_UNCERTAINTY_H_
#define INTENTFUSE_UNCERTAINTY_H_

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "intentfuse/tensor.h"

namespace intentfuse {

inline constexpr double kDefaultRidge = 1e-3;

enum class DetectorMode { kGlobal, kClassConditional };
enum class EmbeddingSource { kAnomalyMean, kClassifierFeature };

std::string detector_mode_to_string(DetectorMode m);
DetectorMode detector_mode_from_string(const std::string& s);
std::string embedding_source_to_string(EmbeddingSource s);
EmbeddingSource embedding_source_from_string(const std::string& s);

struct LedoitWolfResult {
  Tensor sigma;  // (1-rho) S + rho (tr S / d) I + ridge I
  double rho = 0.0;
};

// Sample covariance (1/(N-1), documented: the shrinkage intensity depends
// on this convention) shrunk toward a scaled identity at the analytically
// optimal intensity, clipped to [0,1], plus a ridge.
LedoitWolfResult ledoit_wolf_cov(const Tensor& rows,
                                 double ridge = kDefaultRidge);

struct MahalanobisDetector {
  struct Group {
    int label = 0;
    std::vector<double> centroid;
    Tensor precision;  // symmetric positive definite
    double shrinkage = 0.0;
  };

  DetectorMode mode = DetectorMode::kGlobal;
  EmbeddingSource source = EmbeddingSource::kAnomalyMean;
  double ridge = kDefaultRidge;
  std::vector<Group> groups;  // one entry in global mode; per label otherwise

  std::size_t dim() const;

  nlohmann::json to_json() const;
  static MahalanobisDetector from_json(const nlohmann::json& j);
};

// Global mode pools every embedding; class-conditional mode fits one
// (centroid, precision) per label and must see >= 2 samples of each.
MahalanobisDetector fit_detector(const Tensor& embeddings,
                                 const std::vector<int>& labels,
                                 DetectorMode mode, EmbeddingSource source,
                                 double ridge = kDefaultRidge);

// Squared Mahalanobis distance; class-conditional is the minimum over
// per-class distances.
double mahalanobis_score(const MahalanobisDetector& det,
                         const std::vector<double>& embedding);
std::vector<double> mahalanobis_scores(const MahalanobisDetector& det,
                                       const Tensor& embeddings);

// sigma(kl): KL mapped through a sigmoid into (0, 1).
double kl_score(double kl);

struct SelectivePrediction {
  std::vector<std::size_t> kept;  // indices, in stable sample order
  double coverage = 0.0;          // realised fraction kept
  double accuracy = 0.0;          // over the kept set
};

// Keep the ceil(coverage * N) lowest-risk samples; ties break by sample
// order.
SelectivePrediction selective_predict(const std::vector<int>& predictions,
                                      const std::vector<int>& labels,
                                      const std::vector<double>& risk,
                                      double coverage);

struct ErrorDetection {
  double auroc = 0.0;
  double auprc = 0.0;
  double error_rate = 0.0;  // the random-AUPRC baseline
};

// Treats incorrect predictions as the positive class and the risk score
// as its detector.
ErrorDetection error_detection_eval(const std::vector<int>& predictions,
                                    const std::vector<int>& labels,
                                    const std::vector<double>& risk);

// Inverse of an SPD matrix via Cholesky; the result is symmetrised.
Tensor spd_inverse(const Tensor& m);

}  // namespace intentfuse

#endif  // INTENTFUSE_UNCERTAINTY_H_
