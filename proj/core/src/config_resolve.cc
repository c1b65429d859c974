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

#include "intentfuse/config_resolve.h"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "intentfuse/error.h"
#include "intentfuse/numfmt.h"

namespace intentfuse {

namespace {

int get_pos_int(const ConfigFile& f, const std::string& sec,
                const std::string& key, int fallback) {
  const long v = f.get_int(sec, key, fallback);
  if (v < 0 || v > 1'000'000'000)
    throw ConfigError("config value " + sec + "." + key +
                      " is out of range");
  return static_cast<int>(v);
}

InteractionPair parse_pair(std::string_view token) {
  const std::size_t star = token.find('*');
  if (star == std::string_view::npos)
    throw ConfigError("interaction pair '" + std::string(token) +
                      "' must look like a0*p1");
  const std::string_view left = trim(token.substr(0, star));
  const std::string_view right = trim(token.substr(star + 1));
  auto side = [&](std::string_view s) {
    if (s.size() < 2 || (s[0] != 'a' && s[0] != 'p' && s[0] != 's'))
      throw ConfigError("interaction side '" + std::string(s) +
                        "' must be one of a/p/s plus an index");
    long idx;
    try {
      idx = parse_long(s.substr(1));
    } catch (const ParseError&) {
      throw ConfigError("interaction side '" + std::string(s) +
                        "' has a non-numeric index");
    }
    if (idx < 0)
      throw ConfigError("interaction index must be non-negative");
    return std::make_pair(s[0], static_cast<int>(idx));
  };
  const auto [ls, li] = side(left);
  const auto [rs, ri] = side(right);
  return InteractionPair{ls, li, rs, ri};
}

void check_known_keys(const ConfigFile& f, const std::string& section,
                      const std::set<std::string>& known) {
  for (const std::string& key : f.keys(section)) {
    if (!known.count(key))
      throw ConfigError("unknown config key '" + section + "." + key + "'");
  }
}

}  // namespace

std::vector<InteractionPair> parse_interaction_pairs(const std::string& text) {
  const std::string_view trimmed = trim(text);
  std::vector<InteractionPair> out;
  if (trimmed == "none") return out;
  for (const std::string& field : split_csv(text)) {
    const std::string_view token = trim(field);
    if (token.empty())
      throw ConfigError("empty interaction pair in '" + text + "'");
    out.push_back(parse_pair(token));
  }
  if (out.empty())
    throw ConfigError("interaction_pairs must be 'none' or a pair list");
  return out;
}

void ResolvedConfig::validate() const {
  model.validate();
  streams.validate();
  loss.validate();
  train.validate();
  synthetic.validate();
  if (run_name.empty()) throw ConfigError("run.name must not be empty");
}

nlohmann::json ResolvedConfig::to_json() const {
  return nlohmann::json{{"model", model.to_json()},
                        {"streams", streams.to_json()},
                        {"loss", loss.to_json()},
                        {"train", train.to_json()},
                        {"synthetic", synthetic.to_json()},
                        {"run",
                         {{"name", run_name},
                          {"out_dir", out_dir},
                          {"data_dir", data_dir},
                          {"data_format", data_format_to_string(data_format)}}}};
}

ResolvedConfig resolve_config(const ConfigFile& file) {
  static const std::set<std::string> known_sections = {
      "model", "streams", "loss", "train", "synthetic", "run"};
  for (const std::string& section : file.sections()) {
    if (!known_sections.count(section))
      throw ConfigError("unknown config section '[" + section + "]'");
  }

  ResolvedConfig rc;

  check_known_keys(file, "model",
                   {"d", "layers", "heads", "ffn_mult", "d_z",
                    "dropout_encoder", "dropout_transformer", "dropout_head",
                    "ln_eps", "active_streams"});
  ModelConfig& m = rc.model;
  m.d = get_pos_int(file, "model", "d", m.d);
  m.layers = get_pos_int(file, "model", "layers", m.layers);
  m.heads = get_pos_int(file, "model", "heads", m.heads);
  m.ffn_mult = get_pos_int(file, "model", "ffn_mult", m.ffn_mult);
  m.d_z = get_pos_int(file, "model", "d_z", m.d_z);
  m.dropout_encoder =
      file.get_double("model", "dropout_encoder", m.dropout_encoder);
  m.dropout_transformer =
      file.get_double("model", "dropout_transformer", m.dropout_transformer);
  m.dropout_head = file.get_double("model", "dropout_head", m.dropout_head);
  m.ln_eps = file.get_double("model", "ln_eps", m.ln_eps);
  m.active_streams =
      file.get_string("model", "active_streams", m.active_streams);

  check_known_keys(file, "streams",
                   {"d_a", "d_p", "d_s", "text_embedding_dim",
                    "interaction_pairs"});
  StreamConfig& s = rc.streams;
  s = StreamConfig::defaults();
  s.d_a = get_pos_int(file, "streams", "d_a", s.d_a);
  s.d_p = get_pos_int(file, "streams", "d_p", s.d_p);
  s.d_s = get_pos_int(file, "streams", "d_s", s.d_s);
  s.text_embedding_dim = get_pos_int(file, "streams", "text_embedding_dim",
                                     s.text_embedding_dim);
  if (const std::string* pairs = file.find("streams", "interaction_pairs")) {
    s.interaction_pairs = parse_interaction_pairs(*pairs);
  } else if (s.d_a != StreamConfig::defaults().d_a ||
             s.d_p != StreamConfig::defaults().d_p) {
    // Widths changed without an explicit pair list: rebuild the default
    // a x p cross so indices stay in range.
    s.interaction_pairs = StreamConfig::cross('a', s.d_a, 'p', s.d_p);
  }

  check_known_keys(file, "loss",
                   {"lambda_kl_start", "lambda_kl_end", "lambda_div_start",
                    "lambda_div_end", "lambda_tau", "label_smoothing",
                    "mixup_alpha", "mixup_per_sample"});
  LossWeights& w = rc.loss;
  w.lambda_kl_start =
      file.get_double("loss", "lambda_kl_start", w.lambda_kl_start);
  w.lambda_kl_end = file.get_double("loss", "lambda_kl_end", w.lambda_kl_end);
  w.lambda_div_start =
      file.get_double("loss", "lambda_div_start", w.lambda_div_start);
  w.lambda_div_end =
      file.get_double("loss", "lambda_div_end", w.lambda_div_end);
  w.lambda_tau = file.get_double("loss", "lambda_tau", w.lambda_tau);
  w.label_smoothing =
      file.get_double("loss", "label_smoothing", w.label_smoothing);
  w.mixup_alpha = file.get_double("loss", "mixup_alpha", w.mixup_alpha);
  w.mixup_per_sample =
      file.get_bool("loss", "mixup_per_sample", w.mixup_per_sample);

  check_known_keys(file, "train",
                   {"epochs", "warmup_epochs", "peak_lr", "final_lr_factor",
                    "batch_size", "beta1", "beta2", "weight_decay",
                    "adam_eps", "clip_norm", "seeds", "report_every",
                    "keep_best"});
  TrainConfig& t = rc.train;
  t.epochs = get_pos_int(file, "train", "epochs", t.epochs);
  t.warmup_epochs =
      get_pos_int(file, "train", "warmup_epochs", t.warmup_epochs);
  t.peak_lr = file.get_double("train", "peak_lr", t.peak_lr);
  t.final_lr_factor =
      file.get_double("train", "final_lr_factor", t.final_lr_factor);
  t.batch_size = get_pos_int(file, "train", "batch_size", t.batch_size);
  t.beta1 = file.get_double("train", "beta1", t.beta1);
  t.beta2 = file.get_double("train", "beta2", t.beta2);
  t.weight_decay = file.get_double("train", "weight_decay", t.weight_decay);
  t.adam_eps = file.get_double("train", "adam_eps", t.adam_eps);
  t.clip_norm = file.get_double("train", "clip_norm", t.clip_norm);
  t.seeds = file.get_u64_list("train", "seeds", t.seeds);
  t.report_every = get_pos_int(file, "train", "report_every", t.report_every);
  t.keep_best = file.get_bool("train", "keep_best", t.keep_best);

  check_known_keys(file, "synthetic",
                   {"n_train", "n_val", "n_test", "class_balance",
                    "noise_scale", "seed", "ood_mean_sigmas",
                    "ood_scale_mult"});
  SyntheticSpec& sp = rc.synthetic;
  sp = SyntheticSpec::defaults();
  sp.streams = rc.streams;
  // The default latent terms assume the default widths; under narrower
  // streams keep only the terms whose indices still exist.
  std::erase_if(sp.linear_terms, [&](const SyntheticSpec::Term& t) {
    return t.index >= sp.streams.dim(t.stream);
  });
  std::erase_if(sp.product_terms, [&](const SyntheticSpec::ProductTerm& t) {
    return t.index_a >= sp.streams.dim(t.stream_a) ||
           t.index_b >= sp.streams.dim(t.stream_b);
  });
  if (sp.linear_terms.empty())
    throw ConfigError(
        "streams too narrow for the synthetic generator's latent terms");
  sp.n_train = get_pos_int(file, "synthetic", "n_train", sp.n_train);
  sp.n_val = get_pos_int(file, "synthetic", "n_val", sp.n_val);
  sp.n_test = get_pos_int(file, "synthetic", "n_test", sp.n_test);
  sp.class_balance =
      file.get_double("synthetic", "class_balance", sp.class_balance);
  sp.noise_scale =
      file.get_double("synthetic", "noise_scale", sp.noise_scale);
  sp.seed = static_cast<std::uint64_t>(
      file.get_int("synthetic", "seed", static_cast<long>(sp.seed)));
  sp.ood.mean_sigmas =
      file.get_double("synthetic", "ood_mean_sigmas", sp.ood.mean_sigmas);
  sp.ood.scale_mult =
      file.get_double("synthetic", "ood_scale_mult", sp.ood.scale_mult);

  check_known_keys(file, "run", {"name", "out_dir", "data_dir", "data_format"});
  rc.run_name = file.get_string("run", "name", rc.run_name);
  rc.out_dir = file.get_string("run", "out_dir", rc.out_dir);
  rc.data_dir = file.get_string("run", "data_dir", rc.data_dir);
  rc.data_format = data_format_from_string(
      file.get_string("run", "data_format",
                      data_format_to_string(rc.data_format)));

  rc.validate();
  return rc;
}

}  // namespace intentfuse
