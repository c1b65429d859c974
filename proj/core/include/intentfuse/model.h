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

#ifndef INTENTFUSE_MODEL_H_
#define INTENTFUSE_MODEL_H_

#include <deque>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "intentfuse/autodiff.h"
#include "intentfuse/data.h"
#include "intentfuse/rng.h"
#include "intentfuse/tensor.h"

namespace intentfuse {

struct ModelConfig {
  int d = 64;          // shared token width
  int layers = 2;      // transformer encoder depth
  int heads = 4;
  int ffn_mult = 4;
  int d_z = 16;        // variational bottleneck width
  double dropout_encoder = 0.1;
  double dropout_transformer = 0.1;
  double dropout_head = 0.1;
  double ln_eps = 1e-5;
  // Subsequence of "apsi"; ablations drop tokens here.
  std::string active_streams = "apsi";

  int tokens() const { return static_cast<int>(active_streams.size()); }
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Ordered, name-addressable parameter collection. Insertion order is the
// canonical serialisation order of the checkpoint format.
class ParamStore {
 public:
  Param& add(const std::string& name, std::size_t rows, std::size_t cols);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  Param* find(const std::string& name);
  bool contains(const std::string& name) const;

  std::deque<Param>& entries() { return params_; }
  const std::deque<Param>& entries() const { return params_; }
  std::size_t total_parameters() const;
  void zero_grads();

 private:
  std::deque<Param> params_;
};

struct ForwardNodes {
  ad::Var logit = nullptr;    // [B,1] uncalibrated
  ad::Var fused = nullptr;    // [B, T*d] concatenated fused tokens (z)
  ad::Var z_cls = nullptr;    // [B, d/4] penultimate classifier feature
  ad::Var mu = nullptr;       // [B, d_z]
  ad::Var eta = nullptr;      // [B, d_z] log-variance
  ad::Var z_anom = nullptr;   // [B, d_z] reparameterised (mu at eval)
  ad::Var kl_per = nullptr;   // [B, 1] per-sample KL to N(0, I)
  ad::Var log_tau = nullptr;  // [1,1] temperature parameter leaf
  Tensor attention;           // [B, T, T] head-averaged cross-stream map
};

// One built batch graph plus the param->leaf bindings needed to pull
// gradients back out after backward().
struct GraphBuild {
  ForwardNodes nodes;
  std::vector<std::pair<Param*, ad::Var>> bindings;
  void accumulate_param_grads() const;
};

struct EvalOutput {
  std::vector<double> logits;
  std::vector<double> probs;  // sigmoid(logit / tau)
  std::vector<double> kl;
  Tensor mu;         // [B, d_z]
  Tensor z_cls;      // [B, d/4]
  Tensor fused;      // [B, T*d]
  Tensor attention;  // [B, T, T]
};

class Model {
 public:
  Model(ModelConfig config, StreamConfig streams);

  void init_params(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const StreamConfig& streams() const { return streams_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Closed-form count; verified against the store by construction tests.
  static std::size_t expected_parameter_count(const ModelConfig& mc,
                                              const StreamConfig& sc);

  GraphBuild build_forward(ad::Tape& tape, const Batch& batch, bool training,
                           RngStream* dropout_rng, RngStream* reparam_rng);

  EvalOutput forward_eval(const Batch& batch, double tau) const;

  // exp(log_tau): the learned temperature.
  double temperature() const;

 private:
  ModelConfig config_;
  StreamConfig streams_;
  ParamStore params_;
};

// Residual block parameter helper, exposed so the projection rule
// (P exists exactly when in_dim != out_dim) is testable in isolation.
void add_residual_block_params(ParamStore& store, const std::string& prefix,
                               int in_dim, int out_dim);
bool residual_block_has_projection(int in_dim, int out_dim);

}  // namespace intentfuse

#endif  // INTENTFUSE_MODEL_H_
