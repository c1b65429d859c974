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

#ifndef INTENTFUSE_AUTODIFF_H_
#define INTENTFUSE_AUTODIFF_H_

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "intentfuse/rng.h"
#include "intentfuse/tensor.h"

namespace intentfuse::ad {

class Tape;

struct Node {
  Tensor value;
  Tensor grad;  // materialised lazily on first write
  bool requires_grad = false;
  std::vector<Node*> parents;
  std::function<void()> backward_fn;
  const char* op = "leaf";
  std::size_t idx = 0;
  Tape* tape = nullptr;

  bool grad_materialized() const { return !grad.empty(); }
  Tensor& grad_ref();
};

using Var = Node*;

// Records one forward computation. Nodes live in a deque so pointers stay
// stable; insertion order is a topological order of the DAG, which is what
// the reverse sweep in backward() relies on.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value);

  // Extension point for custom ops (and for validating the gradient
  // checker against deliberately wrong adjoints).
  Var make_node(Tensor value, std::vector<Var> parents,
                std::function<void()> backward_fn, const char* op);

  // Reverse sweep from a scalar root. Leaf gradients accumulate across
  // calls; interior gradients are recomputed per call. Skips subgraphs
  // whose gradient was never touched.
  void backward(Var root);

  // Negates the upstream gradient around every backward rule whose op
  // name matches. Exists so the finite-difference checker can prove it
  // catches a wrong adjoint; never set during training.
  void set_backward_sign_flip(std::string op_name) { flip_op_ = std::move(op_name); }

  std::size_t size() const { return nodes_.size(); }

 private:
  friend struct Node;
  std::deque<Node> nodes_;
  std::string flip_op_;
};

// ---- elementwise and reduction ops ----------------------------------------

// add/sub/mul accept equal shapes, or a [1,1] scalar on either side.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double c);
Var add_const(Var x, double c);
Var sigmoid(Var x);
Var gelu(Var x);  // tanh approximation (Hendrycks & Gimpel)
Var exp(Var x);
Var log(Var x);
Var sqrt(Var x);
Var abs(Var x);
Var clamp_min(Var x, double floor);

Var add_rowvec(Var x, Var v);  // [r,c] + [1,c], broadcast over rows
Var col_mean(Var x);           // [r,c] -> [1,c]
Var sum_rows(Var x);           // [r,c] -> [r,1]
Var mean_all(Var x);           // [r,c] -> [1,1]

// ---- structured ops --------------------------------------------------------

Var matmul(Var a, Var b);
Var layer_norm(Var x, Var gain, Var bias, double eps);
Var softmax_rows(Var x);
Var dropout(Var x, double rate, bool training, RngStream* rng);

// T tokens of shape [B,d] -> [B*T, d], row b*T + t.
Var stack_tokens(const std::vector<Var>& tokens);
// [B*T, d] -> [B, T*d], token-major concatenation per sample.
Var rows_to_batch(Var x, std::size_t batch, std::size_t tokens);

// Block-diagonal multi-head attention over per-sample token groups.
// scores: rows (b*heads + h)*T + i hold q_i . k_j / sqrt(d_k) for sample b.
Var attention_scores(Var q, Var k, std::size_t batch, std::size_t tokens,
                     std::size_t heads);
// probs [B*heads*T, T] x values [B*T, d] -> [B*T, d].
Var attention_apply(Var probs, Var v, std::size_t batch, std::size_t tokens,
                    std::size_t heads);

// Per-element stable binary cross-entropy with logits; targets are data.
Var bce_with_logits(Var logits, const Tensor& targets);

void backward(Var root);

}  // namespace intentfuse::ad

#endif  // INTENTFUSE_AUTODIFF_H_
