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

#include "intentfuse/autodiff.h"

#include <cmath>

#include "intentfuse/error.h"

namespace intentfuse::ad {

namespace {

constexpr double kGeluK = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC = 0.044715;

void require_same_tape(Var a, Var b) {
  if (a->tape != b->tape) throw ShapeError("operands belong to different tapes");
}

bool is_scalar(const Tensor& t) { return t.size() == 1; }

// Adds `v` into the gradient of `p`, creating it on first touch. All
// backward rules funnel through here so requires_grad pruning happens in
// exactly one place.
void accum(Node* p, const Tensor& v) {
  if (!p->requires_grad) return;
  Tensor& g = p->grad_ref();
  const double* src = v.data();
  double* dst = g.data();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

void accum_scalar(Node* p, double v) {
  if (!p->requires_grad) return;
  p->grad_ref()[0] += v;
}

// Result of an elementwise combination of a and b where one side may be a
// [1,1] scalar broadcast over the other.
const Tensor& broadcast_shape_of(Var a, Var b) {
  if (a->value.same_shape(b->value)) return a->value;
  if (is_scalar(a->value)) return b->value;
  if (is_scalar(b->value)) return a->value;
  throw ShapeError("elementwise op: incompatible shapes " +
                   a->value.shape_str() + " vs " + b->value.shape_str());
}

}  // namespace

Tensor& Node::grad_ref() {
  if (grad.empty()) grad = Tensor(value.shape());
  return grad;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.op = "leaf";
  n.idx = nodes_.size() - 1;
  n.tape = this;
  return &n;
}

Var Tape::constant(Tensor value) { return leaf(std::move(value), false); }

Var Tape::make_node(Tensor value, std::vector<Var> parents,
                    std::function<void()> backward_fn, const char* op) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.op = op;
  n.idx = nodes_.size() - 1;
  n.tape = this;
  for (Var p : n.parents) {
    if (p->tape != this) throw ShapeError("parent node from a different tape");
    if (p->requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward_fn = std::move(backward_fn);
  return &n;
}

void Tape::backward(Var root) {
  if (root == nullptr || root->tape != this) {
    throw ShapeError("backward: root does not belong to this tape");
  }
  if (root->value.size() != 1) {
    throw ShapeError("backward: root must be scalar, got " +
                     root->value.shape_str());
  }
  // Interior gradients are per-call scratch; only leaf gradients persist
  // and accumulate across repeated calls.
  for (std::size_t i = 0; i <= root->idx; ++i) {
    Node& n = nodes_[i];
    if (n.backward_fn && n.grad_materialized()) n.grad.fill(0.0);
  }
  root->grad_ref()[0] += 1.0;
  for (std::size_t i = root->idx + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward_fn || !n.grad_materialized()) continue;
    const bool flip = !flip_op_.empty() && flip_op_ == n.op;
    if (flip) {
      for (std::size_t j = 0; j < n.grad.size(); ++j) n.grad[j] = -n.grad[j];
    }
    n.backward_fn();
    if (flip) {
      for (std::size_t j = 0; j < n.grad.size(); ++j) n.grad[j] = -n.grad[j];
    }
  }
}

void backward(Var root) { root->tape->backward(root); }

// ---- elementwise -----------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Var binary_broadcast(Var a, Var b, Fwd fwd, Bwd bwd, const char* op) {
  require_same_tape(a, b);
  const Tensor& shape_src = broadcast_shape_of(a, b);
  Tensor out(shape_src.shape());
  const bool a_scalar = is_scalar(a->value) && !is_scalar(shape_src);
  const bool b_scalar = is_scalar(b->value) && !is_scalar(shape_src);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    double av = a_scalar ? a->value[0] : a->value[i];
    double bv = b_scalar ? b->value[0] : b->value[i];
    out[i] = fwd(av, bv);
  }
  Var y = a->tape->make_node(std::move(out), {a, b}, nullptr, op);
  if (y->requires_grad) {
    y->backward_fn = [a, b, y, a_scalar, b_scalar, bwd] {
      const Tensor& g = y->grad;
      const std::size_t n = g.size();
      Tensor da(a->value.shape());
      Tensor db(b->value.shape());
      for (std::size_t i = 0; i < n; ++i) {
        double av = a_scalar ? a->value[0] : a->value[i];
        double bv = b_scalar ? b->value[0] : b->value[i];
        auto [ga, gb] = bwd(av, bv, g[i]);
        da[a_scalar ? 0 : i] += ga;
        db[b_scalar ? 0 : i] += gb;
      }
      accum(a, da);
      accum(b, db);
    };
  }
  return y;
}

struct GradPair {
  double ga, gb;
};

template <typename Fwd, typename Bwd>
Var unary(Var x, Fwd fwd, Bwd bwd, const char* op) {
  Tensor out(x->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x->value[i]);
  Var y = x->tape->make_node(std::move(out), {x}, nullptr, op);
  if (y->requires_grad) {
    y->backward_fn = [x, y, bwd] {
      Tensor dx(x->value.shape());
      for (std::size_t i = 0; i < dx.size(); ++i) {
        dx[i] = bwd(x->value[i], y->value[i]) * y->grad[i];
      }
      accum(x, dx);
    };
  }
  return y;
}

}  // namespace

Var add(Var a, Var b) {
  return binary_broadcast(
      a, b, [](double x, double y) { return x + y; },
      [](double, double, double g) { return GradPair{g, g}; }, "add");
}

Var sub(Var a, Var b) {
  return binary_broadcast(
      a, b, [](double x, double y) { return x - y; },
      [](double, double, double g) { return GradPair{g, -g}; }, "sub");
}

Var mul(Var a, Var b) {
  return binary_broadcast(
      a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g) { return GradPair{g * y, g * x}; },
      "mul");
}

Var scale(Var x, double c) {
  return unary(
      x, [c](double v) { return c * v; }, [c](double, double) { return c; },
      "scale");
}

Var add_const(Var x, double c) {
  return unary(
      x, [c](double v) { return v + c; }, [](double, double) { return 1.0; },
      "add_const");
}

Var sigmoid(Var x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Var gelu(Var x) {
  return unary(
      x,
      [](double v) {
        double u = kGeluK * (v + kGeluC * v * v * v);
        return 0.5 * v * (1.0 + std::tanh(u));
      },
      [](double v, double) {
        double u = kGeluK * (v + kGeluC * v * v * v);
        double t = std::tanh(u);
        return 0.5 * (1.0 + t) +
               0.5 * v * (1.0 - t * t) * kGeluK * (1.0 + 3.0 * kGeluC * v * v);
      },
      "gelu");
}

Var exp(Var x) {
  return unary(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; }, "exp");
}

Var log(Var x) {
  return unary(
      x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; }, "log");
}

Var sqrt(Var x) {
  return unary(
      x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; }, "sqrt");
}

Var abs(Var x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); },
      "abs");
}

Var clamp_min(Var x, double floor) {
  return unary(
      x, [floor](double v) { return v < floor ? floor : v; },
      [floor](double v, double) { return v > floor ? 1.0 : 0.0; },
      "clamp_min");
}

// ---- reductions and broadcasts ----------------------------------------------

Var add_rowvec(Var x, Var v) {
  require_same_tape(x, v);
  const std::size_t r = x->value.rows();
  const std::size_t c = x->value.cols();
  if (v->value.rows() != 1 || v->value.cols() != c) {
    throw ShapeError("add_rowvec: want [1," + std::to_string(c) + "], got " +
                     v->value.shape_str());
  }
  Tensor out = Tensor::zeros(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out.at(i, j) = x->value.at(i, j) + v->value[j];
    }
  }
  Var y = x->tape->make_node(std::move(out), {x, v}, nullptr, "add_rowvec");
  if (y->requires_grad) {
    y->backward_fn = [x, v, y, r, c] {
      accum(x, y->grad);
      Tensor dv = Tensor::zeros(1, c);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) dv[j] += y->grad.at(i, j);
      }
      accum(v, dv);
    };
  }
  return y;
}

Var col_mean(Var x) {
  const std::size_t r = x->value.rows();
  const std::size_t c = x->value.cols();
  Tensor out = Tensor::zeros(1, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j] += x->value.at(i, j);
  }
  for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(r);
  Var y = x->tape->make_node(std::move(out), {x}, nullptr, "col_mean");
  if (y->requires_grad) {
    y->backward_fn = [x, y, r, c] {
      Tensor dx = Tensor::zeros(r, c);
      const double inv = 1.0 / static_cast<double>(r);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) dx.at(i, j) = y->grad[j] * inv;
      }
      accum(x, dx);
    };
  }
  return y;
}

Var sum_rows(Var x) {
  const std::size_t r = x->value.rows();
  const std::size_t c = x->value.cols();
  Tensor out = Tensor::zeros(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += x->value.at(i, j);
    out[i] = s;
  }
  Var y = x->tape->make_node(std::move(out), {x}, nullptr, "sum_rows");
  if (y->requires_grad) {
    y->backward_fn = [x, y, r, c] {
      Tensor dx = Tensor::zeros(r, c);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) dx.at(i, j) = y->grad[i];
      }
      accum(x, dx);
    };
  }
  return y;
}

Var mean_all(Var x) {
  const std::size_t n = x->value.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x->value[i];
  Var y = x->tape->make_node(Tensor::scalar(s / static_cast<double>(n)), {x},
                             nullptr, "mean_all");
  if (y->requires_grad) {
    y->backward_fn = [x, y, n] {
      Tensor dx(x->value.shape());
      const double g = y->grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) dx[i] = g;
      accum(x, dx);
    };
  }
  return y;
}

// ---- matmul ------------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  Tensor out = Tensor::zeros(a->value.rows(), b->value.cols());
  matmul_into(a->value, false, b->value, false, out, 0.0);
  Var y = a->tape->make_node(std::move(out), {a, b}, nullptr, "matmul");
  if (y->requires_grad) {
    y->backward_fn = [a, b, y] {
      if (a->requires_grad) {
        matmul_into(y->grad, false, b->value, true, a->grad_ref(), 1.0);
      }
      if (b->requires_grad) {
        matmul_into(a->value, true, y->grad, false, b->grad_ref(), 1.0);
      }
    };
  }
  return y;
}

// ---- layer norm ----------------------------------------------------------------

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain);
  require_same_tape(x, bias);
  const std::size_t r = x->value.rows();
  const std::size_t c = x->value.cols();
  if (gain->value.rows() != 1 || gain->value.cols() != c ||
      bias->value.rows() != 1 || bias->value.cols() != c) {
    throw ShapeError("layer_norm: gain/bias must be [1," + std::to_string(c) +
                     "]");
  }
  Tensor xhat = Tensor::zeros(r, c);
  std::vector<double> inv_std(r);
  Tensor out = Tensor::zeros(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < c; ++j) m += x->value.at(i, j);
    m /= static_cast<double>(c);
    double v = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double d = x->value.at(i, j) - m;
      v += d * d;
    }
    v /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(v + eps);
    for (std::size_t j = 0; j < c; ++j) {
      double xh = (x->value.at(i, j) - m) * inv_std[i];
      xhat.at(i, j) = xh;
      out.at(i, j) = xh * gain->value[j] + bias->value[j];
    }
  }
  Var y = x->tape->make_node(std::move(out), {x, gain, bias}, nullptr,
                             "layer_norm");
  if (y->requires_grad) {
    y->backward_fn = [x, gain, bias, y, r, c, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)] {
      Tensor dx = Tensor::zeros(r, c);
      Tensor dg = Tensor::zeros(1, c);
      Tensor db = Tensor::zeros(1, c);
      for (std::size_t i = 0; i < r; ++i) {
        double mean_gxh = 0.0;
        double mean_gxh_xh = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          double gxh = y->grad.at(i, j) * gain->value[j];
          mean_gxh += gxh;
          mean_gxh_xh += gxh * xhat.at(i, j);
        }
        mean_gxh /= static_cast<double>(c);
        mean_gxh_xh /= static_cast<double>(c);
        for (std::size_t j = 0; j < c; ++j) {
          double gxh = y->grad.at(i, j) * gain->value[j];
          dx.at(i, j) =
              inv_std[i] * (gxh - mean_gxh - xhat.at(i, j) * mean_gxh_xh);
          dg[j] += y->grad.at(i, j) * xhat.at(i, j);
          db[j] += y->grad.at(i, j);
        }
      }
      accum(x, dx);
      accum(gain, dg);
      accum(bias, db);
    };
  }
  return y;
}

// ---- softmax --------------------------------------------------------------------

Var softmax_rows(Var x) {
  if (!x->value.all_finite()) {
    throw DataError("softmax_rows: non-finite input");
  }
  const std::size_t r = x->value.rows();
  const std::size_t c = x->value.cols();
  Tensor out = Tensor::zeros(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = x->value.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x->value.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double e = std::exp(x->value.at(i, j) - mx);
      out.at(i, j) = e;
      z += e;
    }
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= z;
  }
  Var y = x->tape->make_node(std::move(out), {x}, nullptr, "softmax_rows");
  if (y->requires_grad) {
    y->backward_fn = [x, y, r, c] {
      Tensor dx = Tensor::zeros(r, c);
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          dot += y->grad.at(i, j) * y->value.at(i, j);
        }
        for (std::size_t j = 0; j < c; ++j) {
          dx.at(i, j) = y->value.at(i, j) * (y->grad.at(i, j) - dot);
        }
      }
      accum(x, dx);
    };
  }
  return y;
}

// ---- dropout --------------------------------------------------------------------

Var dropout(Var x, double rate, bool training, RngStream* rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must be in [0,1)");
  }
  if (!training || rate == 0.0) return x;
  if (rng == nullptr) throw ConfigError("dropout: missing rng stream");
  const std::size_t n = x->value.size();
  Tensor mask(x->value.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng->uniform() < rate ? 0.0 : keep_scale;
  }
  Tensor out(x->value.shape());
  for (std::size_t i = 0; i < n; ++i) out[i] = x->value[i] * mask[i];
  Var y = x->tape->make_node(std::move(out), {x}, nullptr, "dropout");
  if (y->requires_grad) {
    y->backward_fn = [x, y, mask = std::move(mask), n] {
      Tensor dx(x->value.shape());
      for (std::size_t i = 0; i < n; ++i) dx[i] = y->grad[i] * mask[i];
      accum(x, dx);
    };
  }
  return y;
}

// ---- reshapes --------------------------------------------------------------------

Var stack_tokens(const std::vector<Var>& tokens) {
  if (tokens.empty()) throw ShapeError("stack_tokens: no tokens");
  const std::size_t t_count = tokens.size();
  const std::size_t b = tokens[0]->value.rows();
  const std::size_t d = tokens[0]->value.cols();
  for (Var t : tokens) {
    require_same_tape(tokens[0], t);
    if (t->value.rows() != b || t->value.cols() != d) {
      throw ShapeError("stack_tokens: token shapes differ");
    }
  }
  Tensor out = Tensor::zeros(b * t_count, d);
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t ti = 0; ti < t_count; ++ti) {
      for (std::size_t j = 0; j < d; ++j) {
        out.at(bi * t_count + ti, j) = tokens[ti]->value.at(bi, j);
      }
    }
  }
  Var y = tokens[0]->tape->make_node(std::move(out), tokens, nullptr,
                                     "stack_tokens");
  if (y->requires_grad) {
    std::vector<Var> parents = tokens;
    y->backward_fn = [parents, y, b, t_count, d] {
      for (std::size_t ti = 0; ti < t_count; ++ti) {
        Tensor dt = Tensor::zeros(b, d);
        for (std::size_t bi = 0; bi < b; ++bi) {
          for (std::size_t j = 0; j < d; ++j) {
            dt.at(bi, j) = y->grad.at(bi * t_count + ti, j);
          }
        }
        accum(parents[ti], dt);
      }
    };
  }
  return y;
}

Var rows_to_batch(Var x, std::size_t batch, std::size_t tokens) {
  const std::size_t d = x->value.cols();
  if (x->value.rows() != batch * tokens) {
    throw ShapeError("rows_to_batch: rows != batch*tokens");
  }
  Tensor out = Tensor::zeros(batch, tokens * d);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    for (std::size_t ti = 0; ti < tokens; ++ti) {
      for (std::size_t j = 0; j < d; ++j) {
        out.at(bi, ti * d + j) = x->value.at(bi * tokens + ti, j);
      }
    }
  }
  Var y = x->tape->make_node(std::move(out), {x}, nullptr, "rows_to_batch");
  if (y->requires_grad) {
    y->backward_fn = [x, y, batch, tokens, d] {
      Tensor dx = Tensor::zeros(batch * tokens, d);
      for (std::size_t bi = 0; bi < batch; ++bi) {
        for (std::size_t ti = 0; ti < tokens; ++ti) {
          for (std::size_t j = 0; j < d; ++j) {
            dx.at(bi * tokens + ti, j) = y->grad.at(bi, ti * d + j);
          }
        }
      }
      accum(x, dx);
    };
  }
  return y;
}

// ---- attention --------------------------------------------------------------------

Var attention_scores(Var q, Var k, std::size_t batch, std::size_t tokens,
                     std::size_t heads) {
  require_same_tape(q, k);
  const std::size_t d = q->value.cols();
  if (q->value.rows() != batch * tokens || !k->value.same_shape(q->value)) {
    throw ShapeError("attention_scores: bad q/k shapes");
  }
  if (d % heads != 0) throw ShapeError("attention_scores: d % heads != 0");
  const std::size_t dk = d / heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  Tensor out = Tensor::zeros(batch * heads * tokens, tokens);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < tokens; ++i) {
        for (std::size_t j = 0; j < tokens; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < dk; ++c) {
            s += q->value.at(b * tokens + i, h * dk + c) *
                 k->value.at(b * tokens + j, h * dk + c);
          }
          out.at((b * heads + h) * tokens + i, j) = s * inv_sqrt_dk;
        }
      }
    }
  }
  Var y = q->tape->make_node(std::move(out), {q, k}, nullptr,
                             "attention_scores");
  if (y->requires_grad) {
    y->backward_fn = [q, k, y, batch, tokens, heads, dk, inv_sqrt_dk] {
      Tensor dq = Tensor::zeros(batch * tokens, heads * dk);
      Tensor dkk = Tensor::zeros(batch * tokens, heads * dk);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
          for (std::size_t i = 0; i < tokens; ++i) {
            for (std::size_t j = 0; j < tokens; ++j) {
              double g =
                  y->grad.at((b * heads + h) * tokens + i, j) * inv_sqrt_dk;
              for (std::size_t c = 0; c < dk; ++c) {
                dq.at(b * tokens + i, h * dk + c) +=
                    g * k->value.at(b * tokens + j, h * dk + c);
                dkk.at(b * tokens + j, h * dk + c) +=
                    g * q->value.at(b * tokens + i, h * dk + c);
              }
            }
          }
        }
      }
      accum(q, dq);
      accum(k, dkk);
    };
  }
  return y;
}

Var attention_apply(Var probs, Var v, std::size_t batch, std::size_t tokens,
                    std::size_t heads) {
  require_same_tape(probs, v);
  const std::size_t d = v->value.cols();
  if (d % heads != 0) throw ShapeError("attention_apply: d % heads != 0");
  const std::size_t dk = d / heads;
  if (probs->value.rows() != batch * heads * tokens ||
      probs->value.cols() != tokens || v->value.rows() != batch * tokens) {
    throw ShapeError("attention_apply: bad shapes");
  }
  Tensor out = Tensor::zeros(batch * tokens, d);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < tokens; ++i) {
        for (std::size_t j = 0; j < tokens; ++j) {
          double p = probs->value.at((b * heads + h) * tokens + i, j);
          for (std::size_t c = 0; c < dk; ++c) {
            out.at(b * tokens + i, h * dk + c) +=
                p * v->value.at(b * tokens + j, h * dk + c);
          }
        }
      }
    }
  }
  Var y = probs->tape->make_node(std::move(out), {probs, v}, nullptr,
                                 "attention_apply");
  if (y->requires_grad) {
    y->backward_fn = [probs, v, y, batch, tokens, heads, dk] {
      Tensor dp = Tensor::zeros(batch * heads * tokens, tokens);
      Tensor dv = Tensor::zeros(batch * tokens, heads * dk);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
          for (std::size_t i = 0; i < tokens; ++i) {
            for (std::size_t j = 0; j < tokens; ++j) {
              double p = probs->value.at((b * heads + h) * tokens + i, j);
              double gp = 0.0;
              for (std::size_t c = 0; c < dk; ++c) {
                double g = y->grad.at(b * tokens + i, h * dk + c);
                gp += g * v->value.at(b * tokens + j, h * dk + c);
                dv.at(b * tokens + j, h * dk + c) += p * g;
              }
              dp.at((b * heads + h) * tokens + i, j) += gp;
            }
          }
        }
      }
      accum(probs, dp);
      accum(v, dv);
    };
  }
  return y;
}

// ---- losses --------------------------------------------------------------------

Var bce_with_logits(Var logits, const Tensor& targets) {
  if (!logits->value.same_shape(targets)) {
    throw ShapeError("bce_with_logits: logits/targets shape mismatch");
  }
  const std::size_t n = logits->value.size();
  Tensor out(logits->value.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double l = logits->value[i];
    double t = targets[i];
    // max(l,0) - l*t + log(1 + exp(-|l|)): exact and overflow-safe.
    out[i] = std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
  }
  Var y = logits->tape->make_node(std::move(out), {logits}, nullptr,
                                  "bce_with_logits");
  if (y->requires_grad) {
    y->backward_fn = [logits, y, targets, n] {
      Tensor dx(logits->value.shape());
      for (std::size_t i = 0; i < n; ++i) {
        double l = logits->value[i];
        double s = 1.0 / (1.0 + std::exp(-l));
        dx[i] = (s - targets[i]) * y->grad[i];
      }
      accum(logits, dx);
    };
  }
  return y;
}

}  // namespace intentfuse::ad
