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

#ifndef INTENTFUSE_TRAINER_H_
#define INTENTFUSE_TRAINER_H_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "intentfuse/checkpoint.h"
#include "intentfuse/data.h"
#include "intentfuse/metrics.h"
#include "intentfuse/model.h"
#include "intentfuse/objective.h"

namespace intentfuse {

struct TrainConfig {
  int epochs = 220;
  int warmup_epochs = 15;
  double peak_lr = 1e-3;
  double final_lr_factor = 0.01;
  int batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;
  std::vector<std::uint64_t> seeds = {7};
  int report_every = 0;   // epoch cadence for stderr progress lines; 0 = quiet
  bool keep_best = true;  // restore the best-val-F1 snapshot after training

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Learning rate for the 1-based optimizer step: linear 0 -> peak over the
// warmup steps, then cosine down to peak * final_lr_factor at the last
// step. Continuous at the junction.
double lr_at(std::uint64_t step, const TrainConfig& cfg,
             std::uint64_t steps_per_epoch);

struct AdamState {
  std::vector<Tensor> m, v;  // aligned with ParamStore entry order
  std::uint64_t step = 0;    // completed optimizer steps

  void init(const ParamStore& params);
};

// Scales all gradients in place so their global L2 norm is at most
// max_norm; returns the pre-clip norm.
double clip_gradients(ParamStore& params, double max_norm);

// One decoupled-weight-decay Adam update. Decay multiplies the parameter
// by (1 - lr*wd) before the moment update and never applies to
// temperature.log_tau. Non-finite gradients abort with the parameter name.
void adamw_step(ParamStore& params, AdamState& state, double lr,
                const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;           // 0-based
  std::uint64_t step = 0;  // optimizer steps completed so far
  double lr = 0.0;         // rate used at the epoch's last step
  double ce = 0.0, kl = 0.0, div = 0.0, temp_prior = 0.0, total = 0.0;
  double val_acc = 0.0, val_f1 = 0.0;
};

std::string history_csv(const std::vector<EpochRecord>& history);
void write_history_csv(const std::string& path,
                       const std::vector<EpochRecord>& history);

// Everything mutable about an interrupted run; restoring it and the model
// parameters resumes bitwise.
struct TrainState {
  int next_epoch = 0;
  AdamState adam;
  std::uint64_t sampler_counter = 0;
  std::uint64_t mixup_counter = 0;
  std::uint64_t dropout_counter = 0;
  std::uint64_t reparam_counter = 0;
  double best_val_f1 = -1.0;
  int best_epoch = -1;
  std::vector<Tensor> best_params;  // empty until a validation pass ran
  std::vector<EpochRecord> history;
};

inline constexpr char kTrainStateMagic[] = "IFSTAT01";

void save_train_state(const std::string& path, const Model& model,
                      const TrainState& state);
// Restores parameters into the model (shapes must match) and returns the
// optimizer/RNG state.
TrainState load_train_state(const std::string& path, Model& model);

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_val_f1 = -1.0;
  int best_epoch = -1;
  bool restored_best = false;
};

// Runs (the rest of) a training loop. With a null state a fresh run over
// cfg.epochs; with a state, resumes at state->next_epoch. max_epochs
// limits how many epochs THIS call executes (-1 = to completion); the
// best-snapshot restore only happens once the final epoch finished.
TrainResult train(Model& model, const ScaledSplit& train_split,
                  const ScaledSplit& val_split, const TrainConfig& cfg,
                  const LossWeights& weights, std::uint64_t seed,
                  TrainState* state = nullptr, int max_epochs = -1);

// Post-training calibration artifacts for one seed.
struct SeedRunResult {
  std::uint64_t seed = 0;
  EvalReport raw;         // probabilities under the learned temperature
  EvalReport tau_scaled;  // probabilities under the post-hoc temperature
  double threshold = 0.5;         // selected on validation, raw space
  double threshold_scaled = 0.5;  // same logit cut in the scaled space
  double tau_learned = 1.0;
  double tau_posthoc = 1.0;
  double best_val_f1 = -1.0;
  int best_epoch = -1;
};

// Maps a probability threshold between temperature spaces so that both
// report variants make identical keep/reject decisions.
double map_threshold(double threshold, double tau_from, double tau_to);

// Full per-seed protocol: train, select the validation threshold, fit the
// post-hoc temperature, fit both Mahalanobis detectors on the training
// split, evaluate the test split. When out_dir is non-empty, writes
// out_dir/seed_<k>/{checkpoint,history.csv,report.json,risk_scores.csv}
// plus out_dir/aggregate.json.
struct RunSeedsResult {
  std::vector<SeedRunResult> seeds;
  nlohmann::json aggregate;  // raw + tau_scaled variants
};

RunSeedsResult run_seeds(const Dataset& dataset, const ModelConfig& mc,
                         const TrainConfig& tc, const LossWeights& lw,
                         const std::string& out_dir);

// Aggregate stanza: mean/std/formatted per metric for >= 2 reports; a
// single report keeps its values with std reported as null.
nlohmann::json aggregate_report_json(const std::vector<EvalReport>& reports);

// Per-sample risk export, one row per id: id,label,pred,prob,kl_score,
// mahalanobis. All vectors must have equal length.
std::string risk_scores_csv(const std::vector<std::string>& ids,
                            const std::vector<int>& labels,
                            const std::vector<int>& preds,
                            const std::vector<double>& probs,
                            const std::vector<double>& kl_scores,
                            const std::vector<double>& mahalanobis);

}  // namespace intentfuse

#endif  // INTENTFUSE_TRAINER_H_
