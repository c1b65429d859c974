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

#ifndef INTENTFUSE_OBJECTIVE_H_
#define INTENTFUSE_OBJECTIVE_H_

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "intentfuse/autodiff.h"
#include "intentfuse/data.h"
#include "intentfuse/model.h"
#include "intentfuse/rng.h"

namespace intentfuse {

// Composite objective weights. The KL and diversity coefficients ramp
// linearly from their start to end values over training.
struct LossWeights {
  double lambda_kl_start = 1e-4;
  double lambda_kl_end = 1e-3;
  double lambda_div_start = 0.0;
  double lambda_div_end = 0.05;
  double lambda_tau = 0.01;
  double label_smoothing = 0.1;
  double mixup_alpha = 0.2;
  bool mixup_per_sample = false;

  struct Effective {
    double kl;
    double div;
    double tau;
  };
  Effective at_epoch(int epoch, int total_epochs) const;

  void validate() const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
};

// Variance floor inside the diversity penalty's standard deviation.
inline constexpr double kDiversityVarianceFloor = 1e-8;

struct MixupResult {
  Batch batch;
  std::vector<double> lambdas;     // one per sample; all equal by default
  std::vector<std::size_t> perm;
  bool applied = false;
};

// Deterministic core: x_mix = lambda*x + (1-lambda)*x[perm] on every
// stream, and likewise for targets.
MixupResult mixup_apply(const Batch& batch, const std::vector<double>& lambdas,
                        const std::vector<std::size_t>& perm);

// Draws lambda ~ Beta(alpha, alpha) (one draw, or one per sample) and a
// uniform permutation. alpha == 0 or a single-sample batch disables
// mixing and returns the batch unchanged.
MixupResult mixup_batch(const Batch& batch, double alpha, bool per_sample,
                        RngStream& rng);

// t = (1 - eps) * y + eps/2.
std::vector<double> smooth_targets(const std::vector<double>& y, double eps);

struct LossNodes {
  ad::Var total = nullptr;
  ad::Var ce = nullptr;
  ad::Var kl = nullptr;
  ad::Var div = nullptr;
  ad::Var temp_prior = nullptr;
};

struct LossBreakdown {
  double ce = 0, kl = 0, div = 0, temp_prior = 0, total = 0;
  double lambda_kl = 0, lambda_div = 0, lambda_tau = 0;
};

// total = CE(logit, targets) + w.kl * mean(KL) + w.div * Ldiv
//         + w.tau * |tau - 1|, with Ldiv = -mean_j Std_batch(fused_j)
// under a 1e-8 variance floor. The temperature enters only through the
// prior; logits stay raw here and are scaled at inference time. Nodes are
// appended to the tape that recorded the forward graph.
LossNodes build_loss(const ForwardNodes& fwd,
                     const std::vector<double>& targets,
                     const LossWeights::Effective& w);

LossBreakdown breakdown(const LossNodes& nodes,
                        const LossWeights::Effective& w);

// Mean stable binary cross-entropy of logits/tau against labels; the
// scalar objective minimised by post-hoc temperature search.
double nll_of_temperature(const std::vector<double>& logits,
                          const std::vector<int>& labels, double tau);

struct TemperatureFit {
  double tau = 1.0;
  double nll = 0.0;
  double nll_at_one = 0.0;
};

// Log-uniform grid over [0.05, 20] (tau = 1 always a candidate) followed
// by golden-section refinement around the grid minimum.
TemperatureFit fit_posthoc_temperature(const std::vector<double>& logits,
                                       const std::vector<int>& labels);

}  // namespace intentfuse

#endif  // INTENTFUSE_OBJECTIVE_H_
