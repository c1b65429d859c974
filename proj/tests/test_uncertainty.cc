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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "intentfuse/error.h"
#include "intentfuse/metrics.h"
#include "intentfuse/rng.h"
#include "intentfuse/tensor.h"
#include "intentfuse/uncertainty.h"
#include "support/test_util.h"

using namespace intentfuse;

namespace {

Tensor normal_rows(RngStream& rng, std::size_t n, std::size_t d) {
  Tensor t = Tensor::zeros(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) t.at(i, j) = rng.normal();
  return t;
}

std::vector<double> row_of(const Tensor& t, std::size_t i) {
  std::vector<double> v(t.cols());
  for (std::size_t j = 0; j < t.cols(); ++j) v[j] = t.at(i, j);
  return v;
}

// Recover the raw sample covariance from a shrunk estimate:
// sigma = (1-rho) S + (rho m + ridge) I with m = tr(S)/d.
Tensor recover_sample_cov(const LedoitWolfResult& lw, double ridge) {
  const std::size_t d = lw.sigma.rows();
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) trace += lw.sigma.at(a, a);
  const double m = (trace - ridge * double(d)) / double(d);
  Tensor s = Tensor::zeros(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      double v = lw.sigma.at(a, b);
      if (a == b) v -= lw.rho * m + ridge;
      s.at(a, b) = v / (1.0 - lw.rho);
    }
  }
  return s;
}

// O(n^2) pairwise-counting AUROC oracle (ties get half credit).
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double credit = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j])
        credit += 1.0;
      else if (s[i] == s[j])
        credit += 0.5;
    }
  }
  return credit / double(pairs);
}

}  // namespace

TEST_CASE("ledoit_wolf_cov recovers the identity at scale") {
  RngStream rng(21, "lw-gauss");
  const Tensor rows = normal_rows(rng, 10000, 4);
  const LedoitWolfResult lw = ledoit_wolf_cov(rows);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      const double want = a == b ? 1.0 : 0.0;
      CHECK(std::abs(lw.sigma.at(a, b) - want) < 0.05);
      CHECK(lw.sigma.at(a, b) == lw.sigma.at(b, a));  // exact symmetry
    }
  }
  // Spherical truth IS the shrinkage target, so the optimal intensity
  // saturates near 1 here (the reference estimator agrees); the intensity
  // only backs off when the population covariance leaves the target.
  CHECK(lw.rho >= 0.0);
  CHECK(lw.rho <= 1.0);
}

TEST_CASE("shrinkage intensity vanishes for strongly anisotropic data") {
  RngStream rng(21, "lw-aniso");
  const std::size_t n = 10000, d = 4;
  const double scales[4] = {1.0, 2.0, 3.0, 5.0};
  Tensor rows = Tensor::zeros(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) rows.at(i, j) = scales[j] * rng.normal();
  const LedoitWolfResult lw = ledoit_wolf_cov(rows);
  CHECK(lw.rho < 0.01);
  for (std::size_t j = 0; j < d; ++j) {
    CHECK(lw.sigma.at(j, j) ==
          doctest::Approx(scales[j] * scales[j]).epsilon(0.06));
  }
}

TEST_CASE("shrinkage keeps the N < d covariance positive definite") {
  RngStream rng(22, "lw-small");
  const Tensor rows = normal_rows(rng, 3, 8);
  const LedoitWolfResult lw = ledoit_wolf_cov(rows);
  CHECK(lw.rho >= 0.0);
  CHECK(lw.rho <= 1.0);
  CHECK(testutil::min_eigenvalue_sym(lw.sigma) >= 1e-3 - 1e-12);

  const Tensor prec = spd_inverse(lw.sigma);
  CHECK(testutil::min_eigenvalue_sym(prec) > 0.0);
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = 0; b < 8; ++b)
      CHECK(std::abs(prec.at(a, b) - prec.at(b, a)) <= 1e-9);
}

TEST_CASE("duplicating rows rescales the sample part by 2(N-1)/(2N-1)") {
  RngStream rng(23, "lw-dup");
  const std::size_t n = 40, d = 5;
  const Tensor rows = normal_rows(rng, n, d);
  Tensor doubled = Tensor::zeros(2 * n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      doubled.at(i, j) = rows.at(i, j);
      doubled.at(n + i, j) = rows.at(i, j);
    }
  }
  const Tensor s1 = recover_sample_cov(ledoit_wolf_cov(rows), kDefaultRidge);
  const Tensor s2 =
      recover_sample_cov(ledoit_wolf_cov(doubled), kDefaultRidge);
  const double scale = 2.0 * double(n - 1) / double(2 * n - 1);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      CHECK(s2.at(a, b) ==
            doctest::Approx(scale * s1.at(a, b)).epsilon(1e-10));
}

TEST_CASE("ledoit_wolf_cov single column and error cases") {
  // d=1: S is exactly a multiple of I, so rho = 0 and sigma = var + ridge.
  Tensor col = Tensor::zeros(4, 1);
  col.at(0, 0) = 1.0;
  col.at(1, 0) = 2.0;
  col.at(2, 0) = 3.0;
  col.at(3, 0) = 4.0;
  const LedoitWolfResult lw = ledoit_wolf_cov(col);
  CHECK(lw.rho == 0.0);
  CHECK(lw.sigma.at(0, 0) ==
        doctest::Approx(5.0 / 3.0 + 1e-3).epsilon(1e-14));

  CHECK_THROWS_AS(ledoit_wolf_cov(Tensor::zeros(1, 3)), DataError);
  CHECK_THROWS_AS(ledoit_wolf_cov(col, -0.5), ConfigError);
  CHECK_THROWS_AS(ledoit_wolf_cov(Tensor::zeros3(2, 2, 2)), ShapeError);
  Tensor bad = Tensor::zeros(3, 2);
  bad.at(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ledoit_wolf_cov(bad), DataError);
}

TEST_CASE("fit_detector centroids match sample means") {
  RngStream rng(24, "det-centroid");
  const Tensor cluster = normal_rows(rng, 4000, 3);
  const MahalanobisDetector global = fit_detector(
      cluster, std::vector<int>(4000, 0), DetectorMode::kGlobal,
      EmbeddingSource::kAnomalyMean);
  REQUIRE(global.groups.size() == 1);
  for (double c : global.groups[0].centroid) CHECK(std::abs(c) < 0.05);
  CHECK(global.dim() == 3);

  // Two separated clusters, class-conditional.
  const std::size_t n = 30, d = 4;
  Tensor emb = Tensor::zeros(2 * n, d);
  std::vector<int> labels(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    labels[i] = i < n ? 0 : 1;
    for (std::size_t j = 0; j < d; ++j) {
      emb.at(i, j) = rng.normal() + (labels[i] == 1 ? 6.0 : 0.0);
    }
  }
  const MahalanobisDetector cc =
      fit_detector(emb, labels, DetectorMode::kClassConditional,
                   EmbeddingSource::kClassifierFeature);
  REQUIRE(cc.groups.size() == 2);
  CHECK(cc.groups[0].label == 0);
  CHECK(cc.groups[1].label == 1);
  for (int g = 0; g < 2; ++g) {
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < 2 * n; ++i) {
      if (labels[i] != g) continue;
      for (std::size_t j = 0; j < d; ++j) mean[j] += emb.at(i, j);
    }
    for (std::size_t j = 0; j < d; ++j) {
      mean[j] /= double(n);
      CHECK(cc.groups[g].centroid[j] ==
            doctest::Approx(mean[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("detector precision matches a direct matrix inverse") {
  RngStream rng(25, "det-inverse");
  const Tensor rows = normal_rows(rng, 60, 5);
  const MahalanobisDetector det =
      fit_detector(rows, std::vector<int>(60, 0), DetectorMode::kGlobal,
                   EmbeddingSource::kAnomalyMean);
  const LedoitWolfResult lw = ledoit_wolf_cov(rows);
  const Tensor oracle = testutil::gauss_jordan_inverse(lw.sigma);
  const Tensor& prec = det.groups[0].precision;
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = 0; b < 5; ++b) {
      CHECK(std::abs(prec.at(a, b) - oracle.at(a, b)) < 1e-8);
      CHECK(std::abs(prec.at(a, b) - prec.at(b, a)) <= 1e-9);
    }
  }
  CHECK(det.groups[0].shrinkage == lw.rho);
  CHECK(testutil::min_eigenvalue_sym(lw.sigma) >= 1e-3 - 1e-12);
}

TEST_CASE("fit_detector validation errors") {
  RngStream rng(26, "det-errors");
  const Tensor rows = normal_rows(rng, 10, 3);
  CHECK_THROWS_AS(fit_detector(rows, std::vector<int>(9, 0),
                               DetectorMode::kGlobal,
                               EmbeddingSource::kAnomalyMean),
                  DataError);
  CHECK_THROWS_AS(fit_detector(rows, std::vector<int>(10, 0),
                               DetectorMode::kClassConditional,
                               EmbeddingSource::kAnomalyMean),
                  DataError);
  std::vector<int> lone(10, 0);
  lone[3] = 1;  // class 1 has a single sample
  CHECK_THROWS_AS(fit_detector(rows, lone, DetectorMode::kClassConditional,
                               EmbeddingSource::kAnomalyMean),
                  DataError);
  Tensor bad = rows;
  bad.at(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(fit_detector(bad, std::vector<int>(10, 0),
                               DetectorMode::kGlobal,
                               EmbeddingSource::kAnomalyMean),
                  DataError);
}

TEST_CASE("mahalanobis_score closed forms") {
  MahalanobisDetector det;
  det.mode = DetectorMode::kGlobal;
  MahalanobisDetector::Group g;
  g.centroid = {0.0, 0.0, 0.0};
  g.precision = Tensor::zeros(3, 3);
  for (std::size_t i = 0; i < 3; ++i) g.precision.at(i, i) = 1.0;
  det.groups.push_back(g);

  CHECK(mahalanobis_score(det, {0.0, 0.0, 0.0}) == 0.0);
  CHECK(mahalanobis_score(det, {2.5, 0.0, 0.0}) ==
        doctest::Approx(6.25).epsilon(1e-12));
  CHECK(mahalanobis_score(det, {1.0, 2.0, -2.0}) ==
        doctest::Approx(9.0).epsilon(1e-12));
  CHECK_THROWS_AS(mahalanobis_score(det, {1.0, 2.0}), ShapeError);

  // Class-conditional: the minimum over per-class distances.
  MahalanobisDetector cc = det;
  cc.mode = DetectorMode::kClassConditional;
  MahalanobisDetector::Group far = g;
  far.label = 1;
  far.centroid = {10.0, 0.0, 0.0};
  cc.groups.push_back(far);
  CHECK(mahalanobis_score(cc, {1.0, 0.0, 0.0}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mahalanobis_score(cc, {9.0, 0.0, 0.0}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mahalanobis_score(cc, {5.0, 0.0, 0.0}) ==
        doctest::Approx(25.0).epsilon(1e-12));

  Tensor batch = Tensor::zeros(2, 3);
  batch.at(0, 0) = 1.0;
  batch.at(1, 0) = 9.0;
  const std::vector<double> scores = mahalanobis_scores(cc, batch);
  CHECK(scores[0] == mahalanobis_score(cc, {1.0, 0.0, 0.0}));
  CHECK(scores[1] == mahalanobis_score(cc, {9.0, 0.0, 0.0}));
}

TEST_CASE("in-distribution mean squared distance matches chi-square") {
  RngStream rng(27, "det-chi2");
  const Tensor rows = normal_rows(rng, 2000, 8);
  const MahalanobisDetector det =
      fit_detector(rows, std::vector<int>(2000, 0), DetectorMode::kGlobal,
                   EmbeddingSource::kAnomalyMean);
  const std::vector<double> d2 = mahalanobis_scores(det, rows);
  double mean = 0.0;
  for (double v : d2) {
    CHECK(v >= 0.0);
    mean += v;
  }
  mean /= double(d2.size());
  CHECK(mean >= 7.2);
  CHECK(mean <= 8.8);

  // The training centroid itself scores zero.
  CHECK(mahalanobis_score(det, det.groups[0].centroid) == 0.0);
}

TEST_CASE("mahalanobis distance is translation invariant") {
  RngStream rng(28, "det-shift");
  const std::size_t n = 50, d = 4;
  const Tensor rows = normal_rows(rng, n, d);
  const std::vector<double> shift = {10.0, -7.0, 3.0, 0.5};
  Tensor shifted = Tensor::zeros(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      shifted.at(i, j) = rows.at(i, j) + shift[j];

  const std::vector<int> labels(n, 0);
  const MahalanobisDetector a =
      fit_detector(rows, labels, DetectorMode::kGlobal,
                   EmbeddingSource::kAnomalyMean);
  const MahalanobisDetector b =
      fit_detector(shifted, labels, DetectorMode::kGlobal,
                   EmbeddingSource::kAnomalyMean);
  for (std::size_t i = 0; i < 8; ++i) {
    std::vector<double> q = row_of(rows, i);
    std::vector<double> q_shift = q;
    for (std::size_t j = 0; j < d; ++j) q_shift[j] += shift[j];
    CHECK(mahalanobis_score(a, q) ==
          doctest::Approx(mahalanobis_score(b, q_shift)).epsilon(1e-8));
  }
}

TEST_CASE("kl_score is a sigmoid") {
  CHECK(kl_score(0.0) == 0.5);
  CHECK(std::abs(kl_score(0.04) - 0.510) < 1e-3);
  CHECK(kl_score(40.0) > 0.999999);
  double prev = -1.0;
  for (double kl : {0.0, 0.01, 0.1, 0.5, 1.0, 3.0, 10.0}) {
    const double s = kl_score(kl);
    CHECK(s > prev);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    prev = s;
  }
  CHECK_THROWS_AS(kl_score(std::numeric_limits<double>::quiet_NaN()),
                  DataError);
}

TEST_CASE("selective_predict keeps the lowest-risk ceil(coverage*N)") {
  // 10 samples, errors at indices 8 and 9, oracle risk.
  std::vector<int> preds(10, 1);
  std::vector<int> labels(10, 1);
  labels[8] = 0;
  labels[9] = 0;
  std::vector<double> oracle_risk(10, 0.0);
  oracle_risk[8] = 1.0;
  oracle_risk[9] = 1.0;

  SUBCASE("full coverage equals overall accuracy") {
    const SelectivePrediction sp =
        selective_predict(preds, labels, oracle_risk, 1.0);
    CHECK(sp.kept.size() == 10);
    CHECK(sp.coverage == 1.0);
    CHECK(sp.accuracy == doctest::Approx(0.8).epsilon(1e-15));
  }

  SUBCASE("oracle risk gives perfect kept-set accuracy up to the error mass") {
    CHECK(selective_predict(preds, labels, oracle_risk, 0.8).accuracy == 1.0);
    CHECK(selective_predict(preds, labels, oracle_risk, 0.05).accuracy == 1.0);
    const SelectivePrediction sp =
        selective_predict(preds, labels, oracle_risk, 0.9);
    CHECK(sp.kept.size() == 9);
    CHECK(sp.accuracy == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
  }

  SUBCASE("accuracy is non-increasing in coverage under oracle risk") {
    double prev = 2.0;
    for (double c : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}) {
      const double acc =
          selective_predict(preds, labels, oracle_risk, c).accuracy;
      CHECK(acc <= prev + 1e-12);
      prev = acc;
    }
  }

  SUBCASE("ceil semantics and realised coverage") {
    CHECK(selective_predict(preds, labels, oracle_risk, 0.25).kept.size() ==
          3);
    CHECK(selective_predict(preds, labels, oracle_risk, 0.21).kept.size() ==
          3);
    CHECK(selective_predict(preds, labels, oracle_risk, 0.2).kept.size() == 2);
    CHECK(selective_predict(preds, labels, oracle_risk, 0.3).kept.size() == 3);
    CHECK(selective_predict(preds, labels, oracle_risk, 0.3).coverage ==
          doctest::Approx(0.3).epsilon(1e-15));
  }

  SUBCASE("ties keep earlier samples; kept indices are sorted") {
    std::vector<double> flat(10, 0.7);
    const SelectivePrediction sp =
        selective_predict(preds, labels, flat, 0.5);
    REQUIRE(sp.kept.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(sp.kept[i] == i);
  }

  SUBCASE("parameter and input validation") {
    CHECK_THROWS_AS(selective_predict(preds, labels, oracle_risk, 0.0),
                    ConfigError);
    CHECK_THROWS_AS(selective_predict(preds, labels, oracle_risk, 1.2),
                    ConfigError);
    CHECK_THROWS_AS(selective_predict(preds, labels, {0.1}, 0.5),
                    MetricError);
    std::vector<double> nan_risk = oracle_risk;
    nan_risk[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(selective_predict(preds, labels, nan_risk, 0.5),
                    MetricError);
    CHECK_THROWS_AS(selective_predict({}, {}, {}, 0.5), MetricError);
  }
}

TEST_CASE("risk-ordered tail abstention improves accuracy") {
  // Head: 160 confident, always right. Tail: 40 ambiguous, half wrong,
  // flagged by high risk. Dropping to 80% coverage removes the tail.
  std::vector<int> preds, labels;
  std::vector<double> risk;
  for (int i = 0; i < 160; ++i) {
    preds.push_back(i % 2);
    labels.push_back(i % 2);
    risk.push_back(0.1);
  }
  for (int i = 0; i < 40; ++i) {
    preds.push_back(1);
    labels.push_back(i % 2);
    risk.push_back(5.0);
  }
  const double full =
      selective_predict(preds, labels, risk, 1.0).accuracy;
  const double at80 =
      selective_predict(preds, labels, risk, 0.8).accuracy;
  CHECK(at80 >= full);
  CHECK(at80 == 1.0);
  CHECK(full == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("error_detection_eval hand case and tie conventions") {
  // Risk ranks the two errors strictly first.
  const std::vector<int> preds = {0, 1, 0, 1, 0, 1};
  const std::vector<int> labels = {1, 0, 0, 1, 0, 1};
  const std::vector<double> risk = {0.9, 0.8, 0.7, 0.4, 0.3, 0.1};
  const ErrorDetection ed = error_detection_eval(preds, labels, risk);
  CHECK(ed.auroc == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ed.auprc == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ed.error_rate == doctest::Approx(2.0 / 6.0).epsilon(1e-15));

  // Constant risk: AUROC 0.5, AUPRC equals the error rate exactly.
  const std::vector<double> flat(6, 0.42);
  const ErrorDetection tie = error_detection_eval(preds, labels, flat);
  CHECK(tie.auroc == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(tie.auprc - tie.error_rate) <= 1e-12);

  CHECK_THROWS_AS(
      error_detection_eval({1, 1}, {1, 1}, {0.5, 0.5}), MetricError);
  CHECK_THROWS_AS(
      error_detection_eval({1, 1}, {0, 0}, {0.5, 0.5}), MetricError);
  CHECK_THROWS_AS(
      error_detection_eval({1, 1}, {1, 0}, {0.5}), MetricError);
}

TEST_CASE("error_detection_eval matches the pairwise oracle under ties") {
  RngStream rng(29, "ed-oracle");
  const std::size_t n = 300;
  std::vector<int> preds(n), labels(n), incorrect(n);
  std::vector<double> risk(n);
  for (std::size_t i = 0; i < n; ++i) {
    preds[i] = rng.uniform() < 0.5 ? 1 : 0;
    labels[i] = rng.uniform() < 0.5 ? 1 : 0;
    risk[i] = std::floor(rng.uniform() * 7.0);
  }
  preds[0] = labels[0] = 1;  // at least one correct
  preds[1] = 1;
  labels[1] = 0;  // at least one error
  for (std::size_t i = 0; i < n; ++i)
    incorrect[i] = preds[i] != labels[i] ? 1 : 0;
  const ErrorDetection ed = error_detection_eval(preds, labels, risk);
  CHECK(ed.auroc ==
        doctest::Approx(pairwise_auc(risk, incorrect)).epsilon(1e-12));
  CHECK(ed.auprc ==
        doctest::Approx(average_precision(risk, incorrect)).epsilon(1e-15));
}

TEST_CASE("3-sigma shifted OOD is separable by the global detector") {
  RngStream rng(30, "ood");
  const std::size_t n = 1500, d = 6;
  const Tensor in_rows = normal_rows(rng, n, d);
  Tensor out_rows = normal_rows(rng, n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out_rows.at(i, j) += 3.0;

  const MahalanobisDetector det =
      fit_detector(in_rows, std::vector<int>(n, 0), DetectorMode::kGlobal,
                   EmbeddingSource::kAnomalyMean);
  std::vector<double> scores = mahalanobis_scores(det, in_rows);
  const std::vector<double> out_scores = mahalanobis_scores(det, out_rows);
  scores.insert(scores.end(), out_scores.begin(), out_scores.end());
  std::vector<int> is_ood(2 * n, 0);
  for (std::size_t i = n; i < 2 * n; ++i) is_ood[i] = 1;
  CHECK(auc_roc(scores, is_ood) >= 0.95);
}

TEST_CASE("detector JSON round-trip preserves scores bitwise") {
  RngStream rng(31, "det-json");
  const std::size_t n = 40, d = 4;
  const Tensor emb = normal_rows(rng, n, d);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % 2;

  for (DetectorMode mode :
       {DetectorMode::kGlobal, DetectorMode::kClassConditional}) {
    const MahalanobisDetector det =
        fit_detector(emb, labels, mode, EmbeddingSource::kClassifierFeature);
    const MahalanobisDetector back =
        MahalanobisDetector::from_json(det.to_json());
    CHECK(back.mode == det.mode);
    CHECK(back.source == det.source);
    CHECK(back.ridge == det.ridge);
    REQUIRE(back.groups.size() == det.groups.size());
    for (std::size_t g = 0; g < det.groups.size(); ++g) {
      CHECK(back.groups[g].label == det.groups[g].label);
      CHECK(back.groups[g].shrinkage == det.groups[g].shrinkage);
    }
    for (std::size_t i = 0; i < 10; ++i) {
      const std::vector<double> q = row_of(emb, i);
      CHECK(mahalanobis_score(back, q) == mahalanobis_score(det, q));
    }
  }

  CHECK_THROWS_AS(detector_mode_from_string("diagonal"), ConfigError);
  CHECK_THROWS_AS(embedding_source_from_string("logits"), ConfigError);
  nlohmann::json empty = {{"mode", "global"},
                          {"source", "anomaly_mean"},
                          {"ridge", 1e-3},
                          {"groups", nlohmann::json::array()}};
  CHECK_THROWS_AS(MahalanobisDetector::from_json(empty), DataError);
}
