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

#include "intentfuse/objective.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "intentfuse/error.h"

namespace intentfuse {

void LossWeights::validate() const {
  auto nonneg = [](double v, const char* what) {
    if (!std::isfinite(v) || v < 0.0)
      throw ConfigError(std::string(what) + " must be finite and >= 0");
  };
  nonneg(lambda_kl_start, "lambda_kl_start");
  nonneg(lambda_kl_end, "lambda_kl_end");
  nonneg(lambda_div_start, "lambda_div_start");
  nonneg(lambda_div_end, "lambda_div_end");
  nonneg(lambda_tau, "lambda_tau");
  if (!(std::isfinite(mixup_alpha) && mixup_alpha >= 0.0))
    throw ConfigError("mixup_alpha must be >= 0 (0 disables MixUp)");
  if (lambda_kl_end < lambda_kl_start || lambda_div_end < lambda_div_start)
    throw ConfigError("loss weight schedules must be non-decreasing");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw ConfigError("label_smoothing must lie in [0, 1)");
}

LossWeights::Effective LossWeights::at_epoch(int epoch,
                                             int total_epochs) const {
  if (total_epochs <= 0) throw ConfigError("total_epochs must be positive");
  if (epoch < 0) throw ConfigError("epoch must be non-negative");
  double progress = 1.0;
  if (total_epochs > 1)
    progress = std::min(1.0, static_cast<double>(epoch) /
                                 static_cast<double>(total_epochs - 1));
  Effective e;
  e.kl = lambda_kl_start + progress * (lambda_kl_end - lambda_kl_start);
  e.div = lambda_div_start + progress * (lambda_div_end - lambda_div_start);
  e.tau = lambda_tau;
  return e;
}

nlohmann::json LossWeights::to_json() const {
  nlohmann::json j;
  j["lambda_kl_start"] = lambda_kl_start;
  j["lambda_kl_end"] = lambda_kl_end;
  j["lambda_div_start"] = lambda_div_start;
  j["lambda_div_end"] = lambda_div_end;
  j["lambda_tau"] = lambda_tau;
  j["label_smoothing"] = label_smoothing;
  j["mixup_alpha"] = mixup_alpha;
  j["mixup_per_sample"] = mixup_per_sample;
  return j;
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  w.lambda_kl_start = j.at("lambda_kl_start").get<double>();
  w.lambda_kl_end = j.at("lambda_kl_end").get<double>();
  w.lambda_div_start = j.at("lambda_div_start").get<double>();
  w.lambda_div_end = j.at("lambda_div_end").get<double>();
  w.lambda_tau = j.at("lambda_tau").get<double>();
  w.label_smoothing = j.at("label_smoothing").get<double>();
  w.mixup_alpha = j.at("mixup_alpha").get<double>();
  w.mixup_per_sample = j.value("mixup_per_sample", false);
  w.validate();
  return w;
}

namespace {

Tensor mix_matrix(const Tensor& x, const std::vector<double>& lambdas,
                  const std::vector<std::size_t>& perm) {
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double lam = lambdas[r];
    for (std::size_t c = 0; c < x.cols(); ++c)
      out.at(r, c) = lam * x.at(r, c) + (1.0 - lam) * x.at(perm[r], c);
  }
  return out;
}

}  // namespace

MixupResult mixup_apply(const Batch& batch, const std::vector<double>& lambdas,
                        const std::vector<std::size_t>& perm) {
  const std::size_t n = batch.y.size();
  if (lambdas.size() != n || perm.size() != n)
    throw DataError("mixup_apply: lambda/permutation size mismatch");
  for (std::size_t p : perm)
    if (p >= n) throw DataError("mixup_apply: permutation index out of range");
  for (double lam : lambdas)
    if (!(lam >= 0.0 && lam <= 1.0))
      throw DataError("mixup_apply: lambda outside [0, 1]");

  MixupResult res;
  res.lambdas = lambdas;
  res.perm = perm;
  res.applied = true;
  res.batch.ids = batch.ids;
  res.batch.x_a = mix_matrix(batch.x_a, lambdas, perm);
  res.batch.x_p = mix_matrix(batch.x_p, lambdas, perm);
  res.batch.x_s = mix_matrix(batch.x_s, lambdas, perm);
  res.batch.x_i = mix_matrix(batch.x_i, lambdas, perm);
  res.batch.y.resize(n);
  for (std::size_t r = 0; r < n; ++r)
    res.batch.y[r] =
        lambdas[r] * batch.y[r] + (1.0 - lambdas[r]) * batch.y[perm[r]];
  return res;
}

MixupResult mixup_batch(const Batch& batch, double alpha, bool per_sample,
                        RngStream& rng) {
  const std::size_t n = batch.y.size();
  MixupResult identity;
  identity.batch = batch;
  identity.lambdas.assign(n, 1.0);
  identity.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) identity.perm[i] = i;
  identity.applied = false;
  if (alpha <= 0.0 || n < 2) return identity;

  std::vector<std::size_t> perm = rng.permutation(n);
  std::vector<double> lambdas(n);
  if (per_sample) {
    for (std::size_t i = 0; i < n; ++i) lambdas[i] = rng.beta(alpha, alpha);
  } else {
    lambdas.assign(n, rng.beta(alpha, alpha));
  }
  return mixup_apply(batch, lambdas, perm);
}

std::vector<double> smooth_targets(const std::vector<double>& y, double eps) {
  if (!(eps >= 0.0 && eps < 1.0))
    throw ConfigError("label smoothing must lie in [0, 1)");
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] >= 0.0 && y[i] <= 1.0))
      throw DataError("smooth_targets: target outside [0, 1]");
    t[i] = (1.0 - eps) * y[i] + 0.5 * eps;
  }
  return t;
}

LossNodes build_loss(const ForwardNodes& fwd,
                     const std::vector<double>& targets,
                     const LossWeights::Effective& w) {
  if (fwd.logit == nullptr || fwd.kl_per == nullptr || fwd.fused == nullptr ||
      fwd.log_tau == nullptr)
    throw TrainError("build_loss: incomplete forward graph");
  if (targets.size() != fwd.logit->value.rows())
    throw TrainError("build_loss: target count does not match batch");

  if (w.kl < 0.0 || w.div < 0.0 || w.tau < 0.0)
    throw ConfigError("loss weights must be non-negative");

  Tensor t = Tensor::zeros(targets.size(), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) t.at(i, 0) = targets[i];

  LossNodes nodes;
  // The temperature deliberately does not touch the CE term; it is
  // trained only through the |tau - 1| prior and applied at inference.
  nodes.ce = ad::mean_all(ad::bce_with_logits(fwd.logit, t));
  nodes.kl = ad::mean_all(fwd.kl_per);

  if (fwd.fused->value.rows() < 2) {
    // Batch std is undefined for a single sample.
    std::cerr << "intentfuse: diversity penalty skipped for batch of 1\n";
    nodes.div = fwd.logit->tape->constant(Tensor::scalar(0.0));
  } else {
    ad::Var mean_row = ad::col_mean(fwd.fused);
    ad::Var centered = ad::add_rowvec(fwd.fused, ad::scale(mean_row, -1.0));
    ad::Var var_row = ad::col_mean(ad::mul(centered, centered));
    ad::Var std_row =
        ad::sqrt(ad::clamp_min(var_row, kDiversityVarianceFloor));
    nodes.div = ad::scale(ad::mean_all(std_row), -1.0);
  }

  nodes.temp_prior = ad::abs(ad::add_const(ad::exp(fwd.log_tau), -1.0));

  nodes.total =
      ad::add(ad::add(nodes.ce, ad::scale(nodes.kl, w.kl)),
              ad::add(ad::scale(nodes.div, w.div),
                      ad::scale(nodes.temp_prior, w.tau)));
  return nodes;
}

LossBreakdown breakdown(const LossNodes& nodes,
                        const LossWeights::Effective& w) {
  LossBreakdown b;
  b.ce = nodes.ce->value.at(0, 0);
  b.kl = nodes.kl->value.at(0, 0);
  b.div = nodes.div->value.at(0, 0);
  b.temp_prior = nodes.temp_prior->value.at(0, 0);
  b.total = nodes.total->value.at(0, 0);
  b.lambda_kl = w.kl;
  b.lambda_div = w.div;
  b.lambda_tau = w.tau;
  return b;
}

double nll_of_temperature(const std::vector<double>& logits,
                          const std::vector<int>& labels, double tau) {
  if (logits.size() != labels.size() || logits.empty())
    throw CalibrationError("temperature NLL: empty or mismatched inputs");
  if (!(tau > 0.0)) throw CalibrationError("temperature must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double l = logits[i] / tau;
    const double t = static_cast<double>(labels[i]);
    acc += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
  }
  return acc / static_cast<double>(logits.size());
}

TemperatureFit fit_posthoc_temperature(const std::vector<double>& logits,
                                       const std::vector<int>& labels) {
  if (logits.size() != labels.size())
    throw CalibrationError("temperature fit: size mismatch");
  if (logits.size() < 10)
    throw CalibrationError("temperature fit: need at least ten samples");
  bool has0 = false, has1 = false;
  for (int y : labels) {
    if (y == 0)
      has0 = true;
    else if (y == 1)
      has1 = true;
    else
      throw CalibrationError("temperature fit: labels must be 0 or 1");
  }
  if (!has0 || !has1)
    throw CalibrationError("temperature fit: both classes required");

  constexpr double kLo = 0.05, kHi = 20.0;
  constexpr int kGrid = 400;
  const double log_lo = std::log(kLo), log_hi = std::log(kHi);

  double best_tau = 1.0;
  double best_nll = nll_of_temperature(logits, labels, 1.0);
  const double nll_at_one = best_nll;
  int best_idx = -1;
  for (int i = 0; i < kGrid; ++i) {
    const double tau =
        std::exp(log_lo + (log_hi - log_lo) * i / double(kGrid - 1));
    const double nll = nll_of_temperature(logits, labels, tau);
    if (nll < best_nll) {
      best_nll = nll;
      best_tau = tau;
      best_idx = i;
    }
  }

  // Golden-section refinement between the grid neighbours of the minimum
  // (in log space, matching the grid's geometry).
  double lo = log_lo, hi = log_hi;
  if (best_idx >= 0) {
    lo = log_lo + (log_hi - log_lo) * std::max(0, best_idx - 1) / double(kGrid - 1);
    hi = log_lo +
         (log_hi - log_lo) * std::min(kGrid - 1, best_idx + 1) / double(kGrid - 1);
  } else {
    // Grid never beat tau = 1: refine a small bracket around it anyway.
    lo = std::log(0.8);
    hi = std::log(1.25);
  }
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = nll_of_temperature(logits, labels, std::exp(c));
  double fd = nll_of_temperature(logits, labels, std::exp(d));
  for (int it = 0; it < 80 && (b - a) > 1e-12; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = nll_of_temperature(logits, labels, std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = nll_of_temperature(logits, labels, std::exp(d));
    }
  }
  const double refined = std::exp(0.5 * (a + b));
  const double refined_nll = nll_of_temperature(logits, labels, refined);
  if (refined_nll < best_nll) {
    best_nll = refined_nll;
    best_tau = refined;
  }

  TemperatureFit fit;
  fit.tau = best_tau;
  fit.nll = best_nll;
  fit.nll_at_one = nll_at_one;
  return fit;
}

}  // namespace intentfuse
