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

#include "intentfuse/model.h"

#include <cmath>

#include "intentfuse/error.h"

namespace intentfuse {

// ---- config -----------------------------------------------------------------

void ModelConfig::validate() const {
  if (d <= 0 || layers <= 0 || heads <= 0 || ffn_mult <= 0 || d_z <= 0) {
    throw ConfigError("model dims must be positive");
  }
  if (d % heads != 0) throw ConfigError("d must be divisible by heads");
  if (d % 4 != 0) throw ConfigError("d must be divisible by 4");
  for (double r : {dropout_encoder, dropout_transformer, dropout_head}) {
    if (r < 0.0 || r >= 1.0) throw ConfigError("dropout rates must be in [0,1)");
  }
  if (ln_eps <= 0.0) throw ConfigError("ln_eps must be positive");
  if (active_streams.size() < 2) {
    throw ConfigError("at least two active streams are required");
  }
  std::size_t pos = 0;
  const std::string canonical = "apsi";
  for (char c : active_streams) {
    std::size_t at = canonical.find(c, pos);
    if (at == std::string::npos) {
      throw ConfigError("active_streams must be a subsequence of 'apsi'");
    }
    pos = at + 1;
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"d", d},
          {"layers", layers},
          {"heads", heads},
          {"ffn_mult", ffn_mult},
          {"d_z", d_z},
          {"dropout_encoder", dropout_encoder},
          {"dropout_transformer", dropout_transformer},
          {"dropout_head", dropout_head},
          {"ln_eps", ln_eps},
          {"active_streams", active_streams}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d = j.at("d").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ffn_mult = j.at("ffn_mult").get<int>();
  c.d_z = j.at("d_z").get<int>();
  c.dropout_encoder = j.at("dropout_encoder").get<double>();
  c.dropout_transformer = j.at("dropout_transformer").get<double>();
  c.dropout_head = j.at("dropout_head").get<double>();
  c.ln_eps = j.at("ln_eps").get<double>();
  c.active_streams = j.at("active_streams").get<std::string>();
  c.validate();
  return c;
}

// ---- param store -----------------------------------------------------------------

Param& ParamStore::add(const std::string& name, std::size_t rows,
                       std::size_t cols) {
  if (contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
  params_.push_back(Param{name, Tensor::zeros(rows, cols),
                          Tensor::zeros(rows, cols)});
  return params_.back();
}

Param* ParamStore::find(const std::string& name) {
  for (Param& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

bool ParamStore::contains(const std::string& name) const {
  for (const Param& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

Param& ParamStore::at(const std::string& name) {
  Param* p = find(name);
  if (!p) throw ConfigError("unknown parameter '" + name + "'");
  return *p;
}

const Param& ParamStore::at(const std::string& name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

std::size_t ParamStore::total_parameters() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (Param& p : params_) p.grad.fill(0.0);
}

// ---- residual block helper ----------------------------------------------------------

bool residual_block_has_projection(int in_dim, int out_dim) {
  return in_dim != out_dim;
}

void add_residual_block_params(ParamStore& store, const std::string& prefix,
                               int in_dim, int out_dim) {
  store.add(prefix + ".W", in_dim, out_dim);
  store.add(prefix + ".b", 1, out_dim);
  store.add(prefix + ".ln_g", 1, out_dim);
  store.add(prefix + ".ln_b", 1, out_dim);
  if (residual_block_has_projection(in_dim, out_dim)) {
    store.add(prefix + ".P", in_dim, out_dim);
  }
}

// ---- model construction ----------------------------------------------------------------

Model::Model(ModelConfig config, StreamConfig streams)
    : config_(std::move(config)), streams_(std::move(streams)) {
  config_.validate();
  streams_.validate();
  const int d = config_.d;
  const int T = config_.tokens();

  for (char s : config_.active_streams) {
    const int n = streams_.dim(s);
    if (n <= 0) {
      throw ConfigError(std::string("active stream '") + s +
                        "' has zero width");
    }
    const std::string pre = std::string("highway.") + s + ".";
    params_.add(pre + "W_g", n, d);
    params_.add(pre + "b_g", 1, d);
    params_.add(pre + "W_1", n, d);
    params_.add(pre + "b_1", 1, d);
    params_.add(pre + "W_2", d, d);
    params_.add(pre + "b_2", 1, d);
    params_.add(pre + "ln_g", 1, d);
    params_.add(pre + "ln_b", 1, d);
    if (n != d) {
      params_.add(pre + "W_p", n, d);
      params_.add(pre + "b_p", 1, d);
    }
  }
  for (char s : config_.active_streams) {
    params_.add(std::string("embed.") + s, 1, d);
  }
  for (int l = 0; l < config_.layers; ++l) {
    const std::string pre = "transformer." + std::to_string(l) + ".";
    params_.add(pre + "ln1_g", 1, d);
    params_.add(pre + "ln1_b", 1, d);
    for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) {
      params_.add(pre + "attn." + w, d, d);
    }
    for (const char* b : {"bq", "bk", "bv", "bo"}) {
      params_.add(pre + "attn." + b, 1, d);
    }
    params_.add(pre + "ln2_g", 1, d);
    params_.add(pre + "ln2_b", 1, d);
    params_.add(pre + "ffn.W1", d, config_.ffn_mult * d);
    params_.add(pre + "ffn.b1", 1, config_.ffn_mult * d);
    params_.add(pre + "ffn.W2", config_.ffn_mult * d, d);
    params_.add(pre + "ffn.b2", 1, d);
  }
  for (const char* w : {"Wq", "Wk", "Wv", "Wo"}) {
    params_.add(std::string("global_attn.") + w, d, d);
  }
  for (const char* b : {"bq", "bk", "bv", "bo"}) {
    params_.add(std::string("global_attn.") + b, 1, d);
  }
  params_.add("classifier.in.W", T * d, 3 * d);
  params_.add("classifier.in.b", 1, 3 * d);
  params_.add("classifier.in.ln_g", 1, 3 * d);
  params_.add("classifier.in.ln_b", 1, 3 * d);
  add_residual_block_params(params_, "classifier.block1", 3 * d, 2 * d);
  add_residual_block_params(params_, "classifier.block2", 2 * d, d);
  add_residual_block_params(params_, "classifier.block3", d, d / 2);
  params_.add("head.W1", d / 2, d / 4);
  params_.add("head.b1", 1, d / 4);
  params_.add("head.W2", d / 4, 1);
  params_.add("head.b2", 1, 1);
  params_.add("temperature.log_tau", 1, 1);
  params_.add("anomaly.W_mu", T * d, config_.d_z);
  params_.add("anomaly.b_mu", 1, config_.d_z);
  params_.add("anomaly.W_eta", T * d, config_.d_z);
  params_.add("anomaly.b_eta", 1, config_.d_z);
}

std::size_t Model::expected_parameter_count(const ModelConfig& mc,
                                            const StreamConfig& sc) {
  const std::size_t d = static_cast<std::size_t>(mc.d);
  const std::size_t T = static_cast<std::size_t>(mc.tokens());
  const std::size_t f = static_cast<std::size_t>(mc.ffn_mult);
  const std::size_t dz = static_cast<std::size_t>(mc.d_z);
  std::size_t n = 0;
  for (char s : mc.active_streams) {
    const std::size_t ns = static_cast<std::size_t>(sc.dim(s));
    n += 2 * ns * d + 2 * d;    // W_g, b_g, W_1, b_1
    n += d * d + d;             // W_2, b_2
    n += 2 * d;                 // ln
    if (ns != d) n += ns * d + d;  // projection
    n += d;  // stream embedding
  }
  n += static_cast<std::size_t>(mc.layers) *
       (2 * d                        // ln1
        + 4 * (d * d + d)            // attention
        + 2 * d                      // ln2
        + d * f * d + f * d          // ffn in
        + f * d * d + d);            // ffn out
  n += 4 * (d * d + d);  // global attention
  n += T * d * 3 * d + 3 * d + 2 * 3 * d;  // classifier input projection
  auto block = [](std::size_t in, std::size_t out) {
    return in * out + 3 * out + (in != out ? in * out : 0);
  };
  n += block(3 * d, 2 * d) + block(2 * d, d) + block(d, d / 2);
  n += (d / 2) * (d / 4) + d / 4 + (d / 4) + 1;  // head
  n += 1;                                        // temperature
  n += 2 * (T * d * dz + dz);                    // anomaly
  return n;
}

// ---- initialisation -----------------------------------------------------------------------

void Model::init_params(std::uint64_t seed) {
  RngStream rng(seed, "init");
  for (Param& p : params_.entries()) {
    const std::string comp = p.name.substr(p.name.rfind('.') + 1);
    if (comp == "log_tau") {
      p.value.fill(0.0);
    } else if (comp == "b_g") {
      // Transform gate starts mostly closed so the carry path dominates.
      p.value.fill(-1.0);
    } else if (comp.rfind("ln", 0) == 0) {
      p.value.fill(comp.back() == 'g' ? 1.0 : 0.0);
    } else if (comp[0] == 'b') {
      p.value.fill(0.0);
    } else if (p.name.rfind("embed.", 0) == 0) {
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        p.value[i] = 0.02 * rng.normal();
      }
    } else if (p.name == "head.W2") {
      // Zero final layer: an untrained model emits probability 1/2.
      p.value.fill(0.0);
    } else {
      const double limit = std::sqrt(
          6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        p.value[i] = (2.0 * rng.uniform() - 1.0) * limit;
      }
    }
    p.grad.fill(0.0);
  }
}

double Model::temperature() const {
  return std::exp(params_.at("temperature.log_tau").value[0]);
}

// ---- forward graph -----------------------------------------------------------------------

namespace {

Tensor head_average(const Tensor& probs, std::size_t B, std::size_t T,
                    std::size_t H) {
  Tensor a = Tensor::zeros3(B, T, T);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < T; ++i) {
        for (std::size_t j = 0; j < T; ++j) {
          a.at3(b, i, j) +=
              probs.at((b * H + h) * T + i, j) / static_cast<double>(H);
        }
      }
    }
  }
  return a;
}

}  // namespace

void GraphBuild::accumulate_param_grads() const {
  for (const auto& [param, var] : bindings) {
    if (!var->grad_materialized()) continue;
    for (std::size_t i = 0; i < param->grad.size(); ++i) {
      param->grad[i] += var->grad[i];
    }
  }
}

GraphBuild Model::build_forward(ad::Tape& tape, const Batch& batch,
                                bool training, RngStream* dropout_rng,
                                RngStream* reparam_rng) {
  const int d = config_.d;
  const std::size_t T = static_cast<std::size_t>(config_.tokens());
  const std::size_t H = static_cast<std::size_t>(config_.heads);
  const std::size_t B = batch.size();
  if (B == 0) throw DataError("forward: empty batch");

  GraphBuild gb;
  auto P = [&](const std::string& name) -> ad::Var {
    Param& p = params_.at(name);
    ad::Var v = tape.leaf(p.value, /*requires_grad=*/training);
    gb.bindings.push_back({&p, v});
    return v;
  };
  auto input_for = [&](char s) -> const Tensor& {
    switch (s) {
      case 'a': return batch.x_a;
      case 'p': return batch.x_p;
      case 's': return batch.x_s;
      default: return batch.x_i;
    }
  };

  // Stream encoders: gated highway between a GELU transform branch and a
  // (projected) carry of the raw input, plus a stream embedding.
  std::vector<ad::Var> tokens;
  for (char s : config_.active_streams) {
    const Tensor& x = input_for(s);
    if (x.rows() != B || static_cast<int>(x.cols()) != streams_.dim(s)) {
      throw ShapeError(std::string("stream ") + s + " input has shape " +
                       x.shape_str());
    }
    ad::Var xv = tape.constant(x);
    const std::string pre = std::string("highway.") + s + ".";
    ad::Var g = ad::sigmoid(
        ad::add_rowvec(ad::matmul(xv, P(pre + "W_g")), P(pre + "b_g")));
    ad::Var t =
        ad::add_rowvec(ad::matmul(xv, P(pre + "W_1")), P(pre + "b_1"));
    t = ad::gelu(t);
    t = ad::dropout(t, config_.dropout_encoder, training, dropout_rng);
    t = ad::add_rowvec(ad::matmul(t, P(pre + "W_2")), P(pre + "b_2"));
    t = ad::layer_norm(t, P(pre + "ln_g"), P(pre + "ln_b"), config_.ln_eps);
    ad::Var carry =
        streams_.dim(s) == d
            ? xv
            : ad::add_rowvec(ad::matmul(xv, P(pre + "W_p")), P(pre + "b_p"));
    ad::Var one_minus_g = ad::add_const(ad::scale(g, -1.0), 1.0);
    ad::Var h = ad::add(ad::mul(g, t), ad::mul(one_minus_g, carry));
    tokens.push_back(ad::add_rowvec(h, P(std::string("embed.") + s)));
  }
  ad::Var hseq = ad::stack_tokens(tokens);  // [B*T, d]

  // Pre-norm transformer encoder over the token axis.
  for (int l = 0; l < config_.layers; ++l) {
    const std::string pre = "transformer." + std::to_string(l) + ".";
    ad::Var u =
        ad::layer_norm(hseq, P(pre + "ln1_g"), P(pre + "ln1_b"), config_.ln_eps);
    ad::Var q = ad::add_rowvec(ad::matmul(u, P(pre + "attn.Wq")),
                               P(pre + "attn.bq"));
    ad::Var k = ad::add_rowvec(ad::matmul(u, P(pre + "attn.Wk")),
                               P(pre + "attn.bk"));
    ad::Var v = ad::add_rowvec(ad::matmul(u, P(pre + "attn.Wv")),
                               P(pre + "attn.bv"));
    ad::Var probs = ad::softmax_rows(ad::attention_scores(q, k, B, T, H));
    ad::Var ao = ad::attention_apply(probs, v, B, T, H);
    ao = ad::add_rowvec(ad::matmul(ao, P(pre + "attn.Wo")),
                        P(pre + "attn.bo"));
    hseq = ad::add(
        hseq, ad::dropout(ao, config_.dropout_transformer, training, dropout_rng));
    ad::Var w =
        ad::layer_norm(hseq, P(pre + "ln2_g"), P(pre + "ln2_b"), config_.ln_eps);
    ad::Var f =
        ad::add_rowvec(ad::matmul(w, P(pre + "ffn.W1")), P(pre + "ffn.b1"));
    f = ad::gelu(f);
    f = ad::dropout(f, config_.dropout_transformer, training, dropout_rng);
    f = ad::add_rowvec(ad::matmul(f, P(pre + "ffn.W2")), P(pre + "ffn.b2"));
    hseq = ad::add(
        hseq, ad::dropout(f, config_.dropout_transformer, training, dropout_rng));
  }

  // Global cross-stream attention block; its head-averaged probabilities
  // are the exported interpretability map.
  {
    const std::string pre = "global_attn.";
    ad::Var q = ad::add_rowvec(ad::matmul(hseq, P(pre + "Wq")), P(pre + "bq"));
    ad::Var k = ad::add_rowvec(ad::matmul(hseq, P(pre + "Wk")), P(pre + "bk"));
    ad::Var v = ad::add_rowvec(ad::matmul(hseq, P(pre + "Wv")), P(pre + "bv"));
    ad::Var probs = ad::softmax_rows(ad::attention_scores(q, k, B, T, H));
    gb.nodes.attention = head_average(probs->value, B, T, H);
    ad::Var ao = ad::attention_apply(probs, v, B, T, H);
    hseq = ad::add_rowvec(ad::matmul(ao, P(pre + "Wo")), P(pre + "bo"));
  }

  ad::Var z = ad::rows_to_batch(hseq, B, T);  // [B, T*d]
  gb.nodes.fused = z;

  // Residual classifier.
  ad::Var c = ad::add_rowvec(ad::matmul(z, P("classifier.in.W")),
                             P("classifier.in.b"));
  c = ad::layer_norm(c, P("classifier.in.ln_g"), P("classifier.in.ln_b"),
                     config_.ln_eps);
  c = ad::gelu(c);
  c = ad::dropout(c, config_.dropout_head, training, dropout_rng);
  const int widths[4] = {3 * d, 2 * d, d, d / 2};
  for (int k = 1; k <= 3; ++k) {
    const std::string pre = "classifier.block" + std::to_string(k);
    ad::Var t = ad::add_rowvec(ad::matmul(c, P(pre + ".W")), P(pre + ".b"));
    t = ad::layer_norm(t, P(pre + ".ln_g"), P(pre + ".ln_b"), config_.ln_eps);
    t = ad::gelu(t);
    t = ad::dropout(t, config_.dropout_head, training, dropout_rng);
    ad::Var shortcut = residual_block_has_projection(widths[k - 1], widths[k])
                           ? ad::matmul(c, P(pre + ".P"))
                           : c;
    c = ad::add(t, shortcut);
  }
  ad::Var zc = ad::add_rowvec(ad::matmul(c, P("head.W1")), P("head.b1"));
  zc = ad::gelu(zc);
  zc = ad::dropout(zc, config_.dropout_head, training, dropout_rng);
  gb.nodes.z_cls = zc;
  gb.nodes.logit = ad::add_rowvec(ad::matmul(zc, P("head.W2")), P("head.b2"));

  // Variational anomaly bottleneck on the fused vector. z_anom feeds no
  // downstream consumer; the KL term is the training signal and mu is the
  // eval-time embedding.
  ad::Var mu =
      ad::add_rowvec(ad::matmul(z, P("anomaly.W_mu")), P("anomaly.b_mu"));
  ad::Var eta =
      ad::add_rowvec(ad::matmul(z, P("anomaly.W_eta")), P("anomaly.b_eta"));
  gb.nodes.mu = mu;
  gb.nodes.eta = eta;
  if (training) {
    if (reparam_rng == nullptr) {
      throw ConfigError("training forward requires a reparameterisation rng");
    }
    Tensor noise = Tensor::zeros(B, static_cast<std::size_t>(config_.d_z));
    for (std::size_t i = 0; i < noise.size(); ++i) {
      noise[i] = reparam_rng->normal();
    }
    gb.nodes.z_anom =
        ad::add(mu, ad::mul(ad::exp(ad::scale(eta, 0.5)), tape.constant(noise)));
  } else {
    gb.nodes.z_anom = mu;
  }
  // KL(N(mu, diag e^eta) || N(0, I)) = -1/2 sum(1 + eta - mu^2 - e^eta)
  gb.nodes.kl_per = ad::scale(
      ad::sum_rows(ad::add_const(
          ad::sub(ad::sub(eta, ad::mul(mu, mu)), ad::exp(eta)), 1.0)),
      -0.5);

  gb.nodes.log_tau = P("temperature.log_tau");
  return gb;
}

EvalOutput Model::forward_eval(const Batch& batch, double tau) const {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  ad::Tape tape;
  GraphBuild gb = const_cast<Model*>(this)->build_forward(
      tape, batch, /*training=*/false, nullptr, nullptr);
  EvalOutput out;
  const std::size_t B = batch.size();
  out.logits.resize(B);
  out.probs.resize(B);
  out.kl.resize(B);
  for (std::size_t i = 0; i < B; ++i) {
    double l = gb.nodes.logit->value.at(i, 0);
    out.logits[i] = l;
    out.probs[i] = 1.0 / (1.0 + std::exp(-l / tau));
    out.kl[i] = gb.nodes.kl_per->value.at(i, 0);
  }
  out.mu = gb.nodes.mu->value;
  out.z_cls = gb.nodes.z_cls->value;
  out.fused = gb.nodes.fused->value;
  out.attention = gb.nodes.attention;
  return out;
}

}  // namespace intentfuse
