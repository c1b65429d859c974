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

#include "intentfuse/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "intentfuse/error.h"
#include "intentfuse/numfmt.h"
#include "intentfuse/uncertainty.h"

namespace intentfuse {

namespace {

constexpr char kLogTauName[] = "temperature.log_tau";

std::uint64_t steps_per_epoch_of(std::size_t n, int batch) {
  const auto b = static_cast<std::uint64_t>(batch);
  return (static_cast<std::uint64_t>(n) + b - 1) / b;
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("short write to '" + path + "'");
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be >= 0");
  if (warmup_epochs >= epochs)
    throw ConfigError("warmup_epochs must be smaller than epochs");
  if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr))
    throw ConfigError("peak_lr must be finite and >= 0");
  if (!(final_lr_factor >= 0.0 && final_lr_factor <= 1.0))
    throw ConfigError("final_lr_factor must lie in [0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0))
    throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("beta2 must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
  if (seeds.empty()) throw ConfigError("seeds list must not be empty");
  if (report_every < 0) throw ConfigError("report_every must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"epochs", epochs},
                        {"warmup_epochs", warmup_epochs},
                        {"peak_lr", peak_lr},
                        {"final_lr_factor", final_lr_factor},
                        {"batch_size", batch_size},
                        {"beta1", beta1},
                        {"beta2", beta2},
                        {"weight_decay", weight_decay},
                        {"adam_eps", adam_eps},
                        {"clip_norm", clip_norm},
                        {"seeds", seeds},
                        {"report_every", report_every},
                        {"keep_best", keep_best}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.peak_lr = j.value("peak_lr", c.peak_lr);
    c.final_lr_factor = j.value("final_lr_factor", c.final_lr_factor);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.seeds = j.value("seeds", c.seeds);
    c.report_every = j.value("report_every", c.report_every);
    c.keep_best = j.value("keep_best", c.keep_best);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  c.validate();
  return c;
}

double lr_at(std::uint64_t step, const TrainConfig& cfg,
             std::uint64_t steps_per_epoch) {
  if (steps_per_epoch == 0) throw ConfigError("steps_per_epoch must be >= 1");
  const std::uint64_t warmup =
      static_cast<std::uint64_t>(cfg.warmup_epochs) * steps_per_epoch;
  const std::uint64_t total =
      static_cast<std::uint64_t>(cfg.epochs) * steps_per_epoch;
  if (step <= warmup) {
    return warmup == 0 ? cfg.peak_lr
                       : cfg.peak_lr * double(step) / double(warmup);
  }
  const std::uint64_t clamped = std::min(step, total);
  const double progress =
      double(clamped - warmup) / double(total - warmup);
  const double cosine = 0.5 * (1.0 + std::cos(M_PI * progress));
  return cfg.peak_lr *
         (cfg.final_lr_factor + (1.0 - cfg.final_lr_factor) * cosine);
}

void AdamState::init(const ParamStore& params) {
  m.clear();
  v.clear();
  step = 0;
  for (const Param& p : params.entries()) {
    m.push_back(Tensor::zeros(p.value.rows(), p.value.cols()));
    v.push_back(Tensor::zeros(p.value.rows(), p.value.cols()));
  }
}

double clip_gradients(ParamStore& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("max_norm must be > 0");
  double sq = 0.0;
  for (const Param& p : params.entries())
    for (std::size_t i = 0; i < p.grad.size(); ++i) sq += p.grad[i] * p.grad[i];
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (Param& p : params.entries())
      for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] *= scale;
  }
  return norm;
}

void adamw_step(ParamStore& params, AdamState& state, double lr,
                const TrainConfig& cfg) {
  auto& entries = params.entries();
  if (state.m.size() != entries.size() || state.v.size() != entries.size())
    throw TrainError("optimizer state does not match the parameter store");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));

  for (std::size_t pi = 0; pi < entries.size(); ++pi) {
    Param& p = entries[pi];
    Tensor& m = state.m[pi];
    Tensor& v = state.v[pi];
    if (!p.grad.same_shape(p.value) || !m.same_shape(p.value) ||
        !v.same_shape(p.value))
      throw TrainError("optimizer state shape mismatch for parameter '" +
                       p.name + "'");
    if (!p.grad.all_finite())
      throw TrainError("non-finite gradient in parameter '" + p.name + "'");

    // Decoupled decay precedes the moment update; the temperature's log
    // parameter is exempt so calibration pressure comes only from the loss.
    if (cfg.weight_decay != 0.0 && p.name != kLogTauName) {
      const double keep = 1.0 - lr * cfg.weight_decay;
      for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] *= keep;
    }

    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,step,lr,ce,kl,div,temp_prior,total,val_acc,val_f1\n";
  for (const EpochRecord& r : history) {
    out += std::to_string(r.epoch);
    out += ',';
    out += std::to_string(r.step);
    for (double v : {r.lr, r.ce, r.kl, r.div, r.temp_prior, r.total, r.val_acc,
                     r.val_f1}) {
      out += ',';
      out += fmt_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_history_csv(const std::string& path,
                       const std::vector<EpochRecord>& history) {
  write_text_file(path, history_csv(history));
}

namespace {

nlohmann::json epoch_record_json(const EpochRecord& r) {
  return nlohmann::json{{"epoch", r.epoch},
                        {"step", r.step},
                        {"lr", r.lr},
                        {"ce", r.ce},
                        {"kl", r.kl},
                        {"div", r.div},
                        {"temp_prior", r.temp_prior},
                        {"total", r.total},
                        {"val_acc", r.val_acc},
                        {"val_f1", r.val_f1}};
}

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.step = j.at("step").get<std::uint64_t>();
  r.lr = j.at("lr").get<double>();
  r.ce = j.at("ce").get<double>();
  r.kl = j.at("kl").get<double>();
  r.div = j.at("div").get<double>();
  r.temp_prior = j.at("temp_prior").get<double>();
  r.total = j.at("total").get<double>();
  r.val_acc = j.at("val_acc").get<double>();
  r.val_f1 = j.at("val_f1").get<double>();
  return r;
}

}  // namespace

void save_train_state(const std::string& path, const Model& model,
                      const TrainState& state) {
  const auto& entries = model.params().entries();
  if (state.adam.m.size() != entries.size() ||
      state.adam.v.size() != entries.size())
    throw CheckpointError("train state does not match the model");
  const bool has_best = !state.best_params.empty();
  if (has_best && state.best_params.size() != entries.size())
    throw CheckpointError("best snapshot does not match the model");

  nlohmann::json hist = nlohmann::json::array();
  for (const EpochRecord& r : state.history) hist.push_back(epoch_record_json(r));

  nlohmann::json manifest{{"kind", "train_state"},
                          {"format_version", 1},
                          {"next_epoch", state.next_epoch},
                          {"adam_step", state.adam.step},
                          {"sampler_counter", state.sampler_counter},
                          {"mixup_counter", state.mixup_counter},
                          {"dropout_counter", state.dropout_counter},
                          {"reparam_counter", state.reparam_counter},
                          {"best_val_f1", state.best_val_f1},
                          {"best_epoch", state.best_epoch},
                          {"has_best", has_best},
                          {"history", hist}};

  std::vector<std::pair<std::string, const Tensor*>> arrays;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    arrays.emplace_back("param." + entries[i].name, &entries[i].value);
    arrays.emplace_back("m." + entries[i].name, &state.adam.m[i]);
    arrays.emplace_back("v." + entries[i].name, &state.adam.v[i]);
    if (has_best)
      arrays.emplace_back("best." + entries[i].name, &state.best_params[i]);
  }
  write_blob_file(path, kTrainStateMagic, manifest, arrays);
}

TrainState load_train_state(const std::string& path, Model& model) {
  const BlobFile blob = read_blob_file(path, kTrainStateMagic);
  const nlohmann::json& m = blob.manifest;
  try {
    if (m.at("kind").get<std::string>() != "train_state")
      throw CheckpointError("not a train state file: '" + path + "'");
    if (m.at("format_version").get<int>() != 1)
      throw CheckpointError("unsupported train state version");

    TrainState st;
    st.next_epoch = m.at("next_epoch").get<int>();
    st.adam.step = m.at("adam_step").get<std::uint64_t>();
    st.sampler_counter = m.at("sampler_counter").get<std::uint64_t>();
    st.mixup_counter = m.at("mixup_counter").get<std::uint64_t>();
    st.dropout_counter = m.at("dropout_counter").get<std::uint64_t>();
    st.reparam_counter = m.at("reparam_counter").get<std::uint64_t>();
    st.best_val_f1 = m.at("best_val_f1").get<double>();
    st.best_epoch = m.at("best_epoch").get<int>();
    const bool has_best = m.at("has_best").get<bool>();
    for (const nlohmann::json& h : m.at("history"))
      st.history.push_back(epoch_record_from_json(h));

    std::map<std::string, const Tensor*> named;
    for (const auto& [name, tensor] : blob.arrays) named[name] = &tensor;
    auto fetch = [&](const std::string& name, const Tensor& like) {
      auto it = named.find(name);
      if (it == named.end())
        throw CheckpointError("train state missing array '" + name + "'");
      if (!it->second->same_shape(like))
        throw CheckpointError("train state shape mismatch for '" + name + "'");
      return *it->second;
    };

    for (Param& p : model.params().entries()) {
      p.value = fetch("param." + p.name, p.value);
      st.adam.m.push_back(fetch("m." + p.name, p.value));
      st.adam.v.push_back(fetch("v." + p.name, p.value));
      if (has_best)
        st.best_params.push_back(fetch("best." + p.name, p.value));
    }
    return st;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed train state manifest: ") +
                          e.what());
  }
}

namespace {

struct ValMetrics {
  double acc = 0.0, f1 = 0.0;
};

// Fixed 0.5 cut during training; the operating threshold is selected only
// once, after the final model is chosen.
ValMetrics validation_pass(const Model& model, const ScaledSplit& val) {
  const Batch vb = val.range(0, val.size());
  const EvalOutput out = model.forward_eval(vb, model.temperature());
  const Confusion c = confusion(0.5, out.probs, val.labels);
  return {accuracy(c), f1(c)};
}

}  // namespace

TrainResult train(Model& model, const ScaledSplit& train_split,
                  const ScaledSplit& val_split, const TrainConfig& cfg,
                  const LossWeights& weights, std::uint64_t seed,
                  TrainState* state, int max_epochs) {
  cfg.validate();
  weights.validate();
  if (train_split.size() == 0) throw DataError("training split is empty");
  if (val_split.size() == 0) throw DataError("validation split is empty");

  TrainState local;
  TrainState& st = state ? *state : local;
  if (st.adam.m.empty()) st.adam.init(model.params());
  if (st.adam.m.size() != model.params().entries().size())
    throw TrainError("train state does not match the model");

  const WeightedSampler sampler(train_split.labels);
  const std::uint64_t spe = steps_per_epoch_of(train_split.size(),
                                               cfg.batch_size);

  RngStream sampler_rng(seed, "sampler");
  RngStream mixup_rng(seed, "mixup");
  RngStream dropout_rng(seed, "dropout");
  RngStream reparam_rng(seed, "reparam");
  sampler_rng.set_counter(st.sampler_counter);
  mixup_rng.set_counter(st.mixup_counter);
  dropout_rng.set_counter(st.dropout_counter);
  reparam_rng.set_counter(st.reparam_counter);

  int executed = 0;
  int epoch = st.next_epoch;
  for (; epoch < cfg.epochs; ++epoch) {
    if (max_epochs >= 0 && executed >= max_epochs) break;
    const LossWeights::Effective w = weights.at_epoch(epoch, cfg.epochs);

    double ce_sum = 0, kl_sum = 0, div_sum = 0, prior_sum = 0, total_sum = 0;
    double last_lr = 0.0;
    for (std::uint64_t s = 0; s < spe; ++s) {
      const std::uint64_t step =
          static_cast<std::uint64_t>(epoch) * spe + s + 1;
      const std::vector<std::size_t> idx =
          sampler.draw_batch(static_cast<std::size_t>(cfg.batch_size),
                             sampler_rng);
      Batch batch = train_split.gather(idx);
      const MixupResult mixed = mixup_batch(batch, weights.mixup_alpha,
                                            weights.mixup_per_sample,
                                            mixup_rng);
      const std::vector<double> targets =
          smooth_targets(mixed.batch.y, weights.label_smoothing);

      model.params().zero_grads();
      ad::Tape tape;
      GraphBuild gb = model.build_forward(tape, mixed.batch, true,
                                          &dropout_rng, &reparam_rng);
      const LossNodes nodes = build_loss(gb.nodes, targets, w);
      const LossBreakdown bd = breakdown(nodes, w);
      if (!std::isfinite(bd.total))
        throw TrainError("loss diverged at epoch " + std::to_string(epoch) +
                         ", step " + std::to_string(step));
      tape.backward(nodes.total);
      gb.accumulate_param_grads();
      clip_gradients(model.params(), cfg.clip_norm);

      last_lr = lr_at(step, cfg, spe);
      adamw_step(model.params(), st.adam, last_lr, cfg);

      ce_sum += bd.ce;
      kl_sum += bd.kl;
      div_sum += bd.div;
      prior_sum += bd.temp_prior;
      total_sum += bd.total;
    }

    const ValMetrics vm = validation_pass(model, val_split);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = st.adam.step;
    rec.lr = last_lr;
    rec.ce = ce_sum / double(spe);
    rec.kl = kl_sum / double(spe);
    rec.div = div_sum / double(spe);
    rec.temp_prior = prior_sum / double(spe);
    rec.total = total_sum / double(spe);
    rec.val_acc = vm.acc;
    rec.val_f1 = vm.f1;
    st.history.push_back(rec);

    if (vm.f1 > st.best_val_f1) {
      st.best_val_f1 = vm.f1;
      st.best_epoch = epoch;
      st.best_params.clear();
      for (const Param& p : model.params().entries())
        st.best_params.push_back(p.value);
    }

    if (cfg.report_every > 0 && (epoch + 1) % cfg.report_every == 0)
      std::fprintf(stderr,
                   "[seed %llu] epoch %d/%d loss %.4f val_acc %.4f "
                   "val_f1 %.4f\n",
                   static_cast<unsigned long long>(seed), epoch + 1,
                   cfg.epochs, rec.total, rec.val_acc, rec.val_f1);
    ++executed;
  }

  st.next_epoch = epoch;
  st.sampler_counter = sampler_rng.counter();
  st.mixup_counter = mixup_rng.counter();
  st.dropout_counter = dropout_rng.counter();
  st.reparam_counter = reparam_rng.counter();

  TrainResult result;
  result.best_val_f1 = st.best_val_f1;
  result.best_epoch = st.best_epoch;
  if (st.next_epoch == cfg.epochs && cfg.keep_best &&
      !st.best_params.empty()) {
    auto& entries = model.params().entries();
    for (std::size_t i = 0; i < entries.size(); ++i)
      entries[i].value = st.best_params[i];
    result.restored_best = true;
  }
  result.history = st.history;
  return result;
}

double map_threshold(double threshold, double tau_from, double tau_to) {
  if (!(tau_from > 0.0) || !(tau_to > 0.0))
    throw ConfigError("temperatures must be positive");
  if (threshold <= 0.0) return 0.0;
  if (threshold >= 1.0) return 1.0;
  const double cut_logit = tau_from * std::log(threshold / (1.0 - threshold));
  return sigmoid(cut_logit / tau_to);
}

nlohmann::json aggregate_report_json(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw MetricError("no reports to aggregate");
  nlohmann::json metrics = nlohmann::json::object();
  if (reports.size() == 1) {
    // Std is undefined for a single seed and reported as null.
    const nlohmann::json j = reports[0].to_json();
    for (const auto& [key, value] : j.items()) {
      if (!value.is_number()) continue;
      metrics[key] = {{"mean", value.get<double>()},
                      {"std", nullptr},
                      {"formatted", fmt_fixed(value.get<double>(), 3)}};
    }
    metrics.erase("threshold");
    metrics.erase("ece_bins");
    metrics.erase("n");
  } else {
    const SeedAggregate agg = aggregate_seeds(reports);
    for (std::size_t i = 0; i < agg.metric_names.size(); ++i) {
      metrics[agg.metric_names[i]] = {{"mean", agg.means[i]},
                                      {"std", agg.stds[i]},
                                      {"formatted", agg.formatted(i)}};
    }
  }
  return nlohmann::json{{"n_seeds", reports.size()}, {"metrics", metrics}};
}

std::string risk_scores_csv(const std::vector<std::string>& ids,
                            const std::vector<int>& labels,
                            const std::vector<int>& preds,
                            const std::vector<double>& probs,
                            const std::vector<double>& kl_scores,
                            const std::vector<double>& mahalanobis) {
  const std::size_t n = ids.size();
  if (labels.size() != n || preds.size() != n || probs.size() != n ||
      kl_scores.size() != n || mahalanobis.size() != n)
    throw DataError("risk score columns have mismatched lengths");
  std::string out = "id,label,pred,prob,kl_score,mahalanobis\n";
  for (std::size_t i = 0; i < n; ++i) {
    out += ids[i];
    out += ',';
    out += std::to_string(labels[i]);
    out += ',';
    out += std::to_string(preds[i]);
    out += ',';
    out += fmt_double(probs[i]);
    out += ',';
    out += fmt_double(kl_scores[i]);
    out += ',';
    out += fmt_double(mahalanobis[i]);
    out += '\n';
  }
  return out;
}

namespace {

nlohmann::json seed_report_json(const SeedRunResult& r) {
  return nlohmann::json{{"seed", r.seed},
                        {"raw", r.raw.to_json()},
                        {"tau_scaled", r.tau_scaled.to_json()},
                        {"threshold", r.threshold},
                        {"threshold_scaled", r.threshold_scaled},
                        {"tau_learned", r.tau_learned},
                        {"tau_posthoc", r.tau_posthoc},
                        {"best_val_f1", r.best_val_f1},
                        {"best_epoch", r.best_epoch}};
}

}  // namespace

RunSeedsResult run_seeds(const Dataset& dataset, const ModelConfig& mc,
                         const TrainConfig& tc, const LossWeights& lw,
                         const std::string& out_dir) {
  mc.validate();
  tc.validate();
  lw.validate();

  RobustScaler scaler;
  scaler.fit(dataset);
  const ScaledSplit tr = scale_split(dataset, Split::kTrain, scaler);
  const ScaledSplit va = scale_split(dataset, Split::kVal, scaler);
  const ScaledSplit te = scale_split(dataset, Split::kTest, scaler);
  if (tr.size() == 0 || va.size() == 0 || te.size() == 0)
    throw DataError("run requires non-empty train/val/test splits");

  if (!out_dir.empty())
    std::filesystem::create_directories(std::filesystem::path(out_dir));

  RunSeedsResult result;
  std::vector<EvalReport> raw_reports, scaled_reports;
  for (std::uint64_t seed : tc.seeds) {
    Model model(mc, dataset.config);
    model.init_params(seed);
    const TrainResult tres = train(model, tr, va, tc, lw, seed);

    // Calibration artifacts come from the restored best model, on the
    // validation split only.
    const EvalOutput vo = model.forward_eval(va.range(0, va.size()),
                                             model.temperature());
    const double threshold = select_threshold(vo.probs, va.labels);
    const TemperatureFit tf = fit_posthoc_temperature(vo.logits, va.labels);
    const double tau_learned = model.temperature();
    const double threshold_scaled = map_threshold(threshold, tau_learned,
                                                  tf.tau);

    const EvalOutput to = model.forward_eval(tr.range(0, tr.size()),
                                             tau_learned);
    const MahalanobisDetector det_global =
        fit_detector(to.mu, tr.labels, DetectorMode::kGlobal,
                     EmbeddingSource::kAnomalyMean);
    const MahalanobisDetector det_cc =
        fit_detector(to.z_cls, tr.labels, DetectorMode::kClassConditional,
                     EmbeddingSource::kClassifierFeature);

    const EvalOutput teo = model.forward_eval(te.range(0, te.size()),
                                              tau_learned);
    SeedRunResult sr;
    sr.seed = seed;
    sr.threshold = threshold;
    sr.threshold_scaled = threshold_scaled;
    sr.tau_learned = tau_learned;
    sr.tau_posthoc = tf.tau;
    sr.best_val_f1 = tres.best_val_f1;
    sr.best_epoch = tres.best_epoch;
    sr.raw = evaluate_binary(teo.probs, te.labels, threshold);

    std::vector<double> scaled_probs(teo.logits.size());
    for (std::size_t i = 0; i < teo.logits.size(); ++i)
      scaled_probs[i] = sigmoid(teo.logits[i] / tf.tau);
    sr.tau_scaled = evaluate_binary(scaled_probs, te.labels, threshold_scaled);

    if (!out_dir.empty()) {
      const std::filesystem::path dir =
          std::filesystem::path(out_dir) / ("seed_" + std::to_string(seed));
      std::filesystem::create_directories(dir);

      Checkpoint ckpt = Checkpoint::from_model(model);
      ckpt.scaler = scaler;
      ckpt.threshold = threshold;
      ckpt.tau_learned = tau_learned;
      ckpt.has_tau_posthoc = true;
      ckpt.tau_posthoc = tf.tau;
      ckpt.has_detector_global = true;
      ckpt.detector_global = det_global;
      ckpt.has_detector_cc = true;
      ckpt.detector_cc = det_cc;
      ckpt.extra = nlohmann::json{{"seed", seed},
                                  {"best_epoch", tres.best_epoch},
                                  {"best_val_f1", tres.best_val_f1},
                                  {"threshold_scaled", threshold_scaled}};
      save_checkpoint((dir / "checkpoint").string(), ckpt);

      write_history_csv((dir / "history.csv").string(), tres.history);
      write_text_file((dir / "report.json").string(),
                      seed_report_json(sr).dump(2) + "\n");

      // Operational scores: post-hoc-calibrated probabilities, the mapped
      // threshold, and the global anomaly detector.
      std::vector<int> preds(scaled_probs.size());
      for (std::size_t i = 0; i < scaled_probs.size(); ++i)
        preds[i] = scaled_probs[i] >= threshold_scaled ? 1 : 0;
      std::vector<double> kls(teo.kl.size());
      for (std::size_t i = 0; i < teo.kl.size(); ++i)
        kls[i] = kl_score(teo.kl[i]);
      const std::vector<double> maha = mahalanobis_scores(det_global, teo.mu);
      write_text_file((dir / "risk_scores.csv").string(),
                      risk_scores_csv(te.ids, te.labels, preds, scaled_probs,
                                      kls, maha));
    }

    raw_reports.push_back(sr.raw);
    scaled_reports.push_back(sr.tau_scaled);
    result.seeds.push_back(std::move(sr));
  }

  nlohmann::json per_seed = nlohmann::json::array();
  for (const SeedRunResult& sr : result.seeds) {
    per_seed.push_back(nlohmann::json{{"seed", sr.seed},
                                      {"threshold", sr.threshold},
                                      {"threshold_scaled", sr.threshold_scaled},
                                      {"tau_learned", sr.tau_learned},
                                      {"tau_posthoc", sr.tau_posthoc},
                                      {"best_val_f1", sr.best_val_f1},
                                      {"best_epoch", sr.best_epoch}});
  }
  result.aggregate =
      nlohmann::json{{"n_seeds", tc.seeds.size()},
                     {"seeds", tc.seeds},
                     {"raw", aggregate_report_json(raw_reports)},
                     {"tau_scaled", aggregate_report_json(scaled_reports)},
                     {"per_seed", per_seed}};
  if (!out_dir.empty())
    write_text_file((std::filesystem::path(out_dir) / "aggregate.json")
                        .string(),
                    result.aggregate.dump(2) + "\n");
  return result;
}

}  // namespace intentfuse
