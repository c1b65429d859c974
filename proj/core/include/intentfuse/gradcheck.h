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

#ifndef INTENTFUSE_GRADCHECK_H_
#define INTENTFUSE_GRADCHECK_H_

#include <cstdint>
#include <string>
#include <vector>

#include "intentfuse/data.h"
#include "intentfuse/model.h"
#include "intentfuse/objective.h"

namespace intentfuse {

struct GradCheckOptions {
  double fd_step = 1e-5;
  std::uint64_t rng_seed = 1234;  // keys the dropout/reparam streams
  // When non-empty, the named op's backward rule is sign-flipped during
  // the analytic pass; the check must then fail loudly.
  std::string inject_flip;
};

struct GradCheckEntry {
  std::string param;
  double max_rel_err = 0.0;
  double max_abs_grad = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst_rel_err = 0.0;
  std::string worst_param;
  std::size_t loss_evaluations = 0;

  bool passed(double tol) const { return worst_rel_err < tol; }
};

// Central finite differences on every parameter element of the full
// composite objective (forward + Eq. 20 terms). Stochastic pieces
// (dropout masks, reparameterisation noise) repeat exactly across
// evaluations because each one re-creates identically keyed streams, so
// the compared function is deterministic in the parameters.
// rel = |fd - ad| / max(|fd|, |ad|, 1e-4).
GradCheckReport check_model_gradients(Model& model, const Batch& batch,
                                      const std::vector<double>& targets,
                                      const LossWeights::Effective& weights,
                                      const GradCheckOptions& opts = {});

// Small fully featured configuration (all four streams, projections on
// every path, one transformer layer) whose parameters are all randomly
// initialised - including log_tau, kept away from the |tau - 1| kink.
Model make_reference_model(std::uint64_t seed);
Batch make_reference_batch(const Model& model, std::uint64_t seed,
                           std::size_t batch_size);

}  // namespace intentfuse

#endif  // INTENTFUSE_GRADCHECK_H_
