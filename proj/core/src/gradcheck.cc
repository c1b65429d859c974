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

#include "intentfuse/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "intentfuse/autodiff.h"
#include "intentfuse/error.h"

namespace intentfuse {

namespace {

double eval_loss(Model& model, const Batch& batch,
                 const std::vector<double>& targets,
                 const LossWeights::Effective& weights, std::uint64_t seed) {
  ad::Tape tape;
  RngStream dropout(seed, "dropout");
  RngStream reparam(seed, "reparam");
  GraphBuild gb =
      model.build_forward(tape, batch, /*training=*/true, &dropout, &reparam);
  LossNodes loss = build_loss(gb.nodes, targets, weights);
  return loss.total->value.at(0, 0);
}

}  // namespace

GradCheckReport check_model_gradients(Model& model, const Batch& batch,
                                      const std::vector<double>& targets,
                                      const LossWeights::Effective& weights,
                                      const GradCheckOptions& opts) {
  if (!(opts.fd_step > 0.0))
    throw ConfigError("gradcheck: fd_step must be positive");

  GradCheckReport report;

  // Analytic pass.
  model.params().zero_grads();
  {
    ad::Tape tape;
    if (!opts.inject_flip.empty())
      tape.set_backward_sign_flip(opts.inject_flip);
    RngStream dropout(opts.rng_seed, "dropout");
    RngStream reparam(opts.rng_seed, "reparam");
    GraphBuild gb = model.build_forward(tape, batch, /*training=*/true,
                                        &dropout, &reparam);
    LossNodes loss = build_loss(gb.nodes, targets, weights);
    tape.backward(loss.total);
    gb.accumulate_param_grads();
    ++report.loss_evaluations;
  }

  const double h = opts.fd_step;
  for (Param& p : model.params().entries()) {
    GradCheckEntry entry;
    entry.param = p.name;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value.data()[i];
      p.value.data()[i] = saved + h;
      const double f_plus =
          eval_loss(model, batch, targets, weights, opts.rng_seed);
      p.value.data()[i] = saved - h;
      const double f_minus =
          eval_loss(model, batch, targets, weights, opts.rng_seed);
      p.value.data()[i] = saved;
      report.loss_evaluations += 2;

      const double fd = (f_plus - f_minus) / (2.0 * h);
      const double an = p.grad.data()[i];
      const double rel =
          std::abs(fd - an) /
          std::max({std::abs(fd), std::abs(an), 1e-4});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      entry.max_abs_grad = std::max(entry.max_abs_grad, std::abs(an));
      if (rel > report.worst_rel_err) {
        report.worst_rel_err = rel;
        report.worst_param = p.name;
      }
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

Model make_reference_model(std::uint64_t seed) {
  ModelConfig mc;
  mc.d = 8;
  mc.layers = 1;
  mc.heads = 2;
  mc.ffn_mult = 2;
  mc.d_z = 4;
  mc.dropout_encoder = 0.1;
  mc.dropout_transformer = 0.1;
  mc.dropout_head = 0.1;
  mc.active_streams = "apsi";

  StreamConfig sc;
  sc.d_a = 5;
  sc.d_p = 4;
  sc.d_s = 6;
  sc.text_embedding_dim = 0;
  sc.interaction_pairs = StreamConfig::cross('a', 2, 'p', 2);
  sc.validate();

  Model model(std::move(mc), std::move(sc));
  model.init_params(seed);

  // The default init leaves the final head at zero and log_tau at 0; a
  // reference model must exercise every gradient path and stay off the
  // |tau - 1| kink.
  RngStream init(seed, "gradcheck-init");
  for (Param& p : model.params().entries()) {
    const bool zeroed = p.name == "head.W2" || p.name == "head.b2";
    if (zeroed)
      for (std::size_t i = 0; i < p.value.size(); ++i)
        p.value.data()[i] = 0.3 * init.normal();
  }
  model.params().at("temperature.log_tau").value.at(0, 0) = 0.3;
  return model;
}

Batch make_reference_batch(const Model& model, std::uint64_t seed,
                           std::size_t batch_size) {
  if (batch_size == 0) throw DataError("reference batch must be non-empty");
  const StreamConfig& sc = model.streams();
  RngStream rng(seed, "gradcheck-batch");
  auto draw = [&rng](std::size_t r, std::size_t c) {
    Tensor t = Tensor::zeros(r, c);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
    return t;
  };
  Batch b;
  b.x_a = draw(batch_size, sc.dim('a'));
  b.x_p = draw(batch_size, sc.dim('p'));
  b.x_s = draw(batch_size, sc.dim('s'));
  b.x_i = draw(batch_size, sc.dim('i'));
  b.y.resize(batch_size);
  b.ids.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    b.y[i] = rng.uniform();  // post-mixup targets are fractional
    b.ids[i] = "ref_" + std::to_string(i);
  }
  return b;
}

}  // namespace intentfuse
