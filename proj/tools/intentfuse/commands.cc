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

#include "intentfuse/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "intentfuse/checkpoint.h"
#include "intentfuse/config_file.h"
#include "intentfuse/data.h"
#include "intentfuse/error.h"
#include "intentfuse/gradcheck.h"
#include "intentfuse/metrics.h"
#include "intentfuse/model.h"
#include "intentfuse/numfmt.h"
#include "intentfuse/objective.h"
#include "intentfuse/svg_export.h"
#include "intentfuse/synthetic.h"
#include "intentfuse/trainer.h"
#include "intentfuse/uncertainty.h"

#ifndef INTENTFUSE_VERSION
#define INTENTFUSE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace intentfuse {
namespace cli {

namespace {

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("short write to " + path);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string());
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string ext_of(DataFormat f) {
  return f == DataFormat::kCsv ? "csv" : "jsonl";
}

fs::path split_file(const std::string& dir, const std::string& split_name,
                    DataFormat fmt) {
  return fs::path(dir) / (split_name + "." + ext_of(fmt));
}

Dataset load_one_split(const std::string& dir, DataFormat fmt,
                       const StreamConfig& streams,
                       const std::string& split_name) {
  const fs::path p = split_file(dir, split_name, fmt);
  if (!fs::exists(p)) throw DataError("dataset file not found: " + p.string());
  return load_dataset(p.string(), fmt, streams);
}

// All three splits merged back into one dataset; records keep the split
// tag they were saved with.
Dataset load_splits(const std::string& dir, DataFormat fmt,
                    const StreamConfig& streams, nlohmann::json* fingerprints) {
  Dataset all;
  all.config = streams;
  for (const char* name : {"train", "val", "test"}) {
    const fs::path p = split_file(dir, name, fmt);
    if (!fs::exists(p))
      throw DataError("dataset file not found: " + p.string());
    Dataset part = load_dataset(p.string(), fmt, streams);
    all.records.insert(all.records.end(), part.records.begin(),
                       part.records.end());
    if (fingerprints)
      (*fingerprints)[p.filename().string()] = fingerprint_file(p.string());
  }
  return all;
}

// SOURCE_DATE_EPOCH when set, else 0: reruns stay byte-identical.
nlohmann::json timestamp_json() {
  const char* sde = std::getenv("SOURCE_DATE_EPOCH");
  long t = 0;
  bool from_env = false;
  if (sde != nullptr && *sde != '\0') {
    t = parse_long(sde);
    from_env = true;
  }
  return nlohmann::json{{"unix", t},
                        {"source", from_env ? "SOURCE_DATE_EPOCH" : "default"}};
}

std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

fs::path out_dir_for(const GlobalOptions& g, const ResolvedConfig& rc,
                     const std::string& leaf) {
  return g.out.empty() ? fs::path(rc.out_dir) / leaf : fs::path(g.out);
}

std::string require_checkpoint_path(const std::string& p) {
  if (p.empty()) throw ConfigError("--checkpoint is required");
  if (!fs::exists(p)) throw DataError("checkpoint not found: " + p);
  return p;
}

std::vector<std::string> token_names(const std::string& active_streams) {
  std::vector<std::string> names;
  for (char c : active_streams) {
    switch (c) {
      case 'a': names.push_back("attn"); break;
      case 'p': names.push_back("pos"); break;
      case 's': names.push_back("sit"); break;
      case 'i': names.push_back("inter"); break;
      default:
        throw ConfigError(std::string("unknown stream '") + c + "'");
    }
  }
  return names;
}

std::string sanitize_filename(const std::string& id) {
  std::string out;
  for (char c : id)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
            c == '_' || c == '-')
               ? c
               : '_';
  return out.empty() ? std::string("sample") : out;
}

std::vector<double> parse_coverages(const std::string& text) {
  std::vector<double> out;
  for (const std::string& f : split_csv(text)) {
    const double c = parse_double(trim(f));
    if (!(c > 0.0) || c > 1.0)
      throw ConfigError("coverage must lie in (0, 1]: got '" + f + "'");
    out.push_back(c);
  }
  if (out.empty()) throw ConfigError("empty coverage list");
  return out;
}

std::vector<double> mu_row(const Tensor& m, std::size_t i) {
  return std::vector<double>(m.data() + i * m.cols(),
                             m.data() + (i + 1) * m.cols());
}

std::vector<int> threshold_preds(const std::vector<double>& probs,
                                 double threshold) {
  std::vector<int> preds(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    preds[i] = probs[i] >= threshold ? 1 : 0;
  return preds;
}

double pct(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) /
                                static_cast<double>(whole);
}

}  // namespace

ResolvedConfig resolve_options(const GlobalOptions& g) {
  ConfigFile cf;
  if (!g.config_path.empty()) cf = ConfigFile::load(g.config_path);
  for (const std::string& s : g.sets) cf.set(s);
  if (g.seed_given) {
    cf.set("synthetic.seed=" + std::to_string(g.seed));
    cf.set("train.seeds=" + std::to_string(g.seed));
  }
  return resolve_config(cf);
}

int cmd_gen_data(const GlobalOptions& g, const GenDataOptions& o) {
  const ResolvedConfig rc = resolve_options(g);
  const fs::path dir = g.out.empty() ? fs::path(rc.data_dir) : fs::path(g.out);
  ensure_dir(dir);

  const SyntheticData data = generate_synthetic(rc.synthetic);
  const Split splits[] = {Split::kTrain, Split::kVal, Split::kTest};
  for (Split s : splits) {
    Dataset part;
    part.config = data.dataset.config;
    for (const FeatureRecord& r : data.dataset.records)
      if (r.split == s) part.records.push_back(r);
    std::size_t pos = 0;
    for (const FeatureRecord& r : part.records) pos += r.label == 1 ? 1 : 0;
    const fs::path p = split_file(dir.string(), split_to_string(s),
                                  rc.data_format);
    save_dataset(p.string(), rc.data_format, part);
    std::printf("wrote %s: %zu records, %s%% positive\n", p.string().c_str(),
                part.records.size(),
                fmt_fixed(pct(pos, part.records.size()), 1).c_str());
  }

  const fs::path oracle_path = dir / "oracle.csv";
  write_oracle(oracle_path.string(), data.dataset, data.oracle);
  std::printf("wrote %s: Bayes accuracy %s\n", oracle_path.string().c_str(),
              fmt_fixed(bayes_accuracy(data.oracle), 3).c_str());

  if (o.ood) {
    const int n = o.ood_n > 0 ? o.ood_n : rc.synthetic.n_test;
    const SyntheticData ood = generate_ood(rc.synthetic, n);
    const fs::path p = dir / ("ood." + ext_of(rc.data_format));
    save_dataset(p.string(), rc.data_format, ood.dataset);
    std::printf("wrote %s: %zu shifted records (mean +%s sigma, scale x%s)\n",
                p.string().c_str(), ood.dataset.records.size(),
                fmt_double(rc.synthetic.ood.mean_sigmas).c_str(),
                fmt_double(rc.synthetic.ood.scale_mult).c_str());
  }
  return kExitOk;
}

int cmd_train(const GlobalOptions& g, const TrainOptions& o) {
  ResolvedConfig rc = resolve_options(g);
  if (!o.ablate.empty()) {
    std::string active = rc.model.active_streams;
    for (char c : o.ablate) {
      const auto pos = active.find(c);
      if (pos == std::string::npos)
        throw ConfigError(std::string("--ablate: stream '") + c +
                          "' is not active (active streams: " + active + ")");
      active.erase(pos, 1);
    }
    if (active.empty())
      throw ConfigError("--ablate: cannot drop every stream");
    rc.model.active_streams = active;
    rc.model.validate();
  }

  nlohmann::json fingerprints = nlohmann::json::object();
  const Dataset dataset =
      load_splits(rc.data_dir, rc.data_format, rc.streams, &fingerprints);

  const fs::path out = g.out.empty() ? fs::path(rc.out_dir) / rc.run_name
                                     : fs::path(g.out);
  ensure_dir(out);

  const RunSeedsResult res =
      run_seeds(dataset, rc.model, rc.train, rc.loss, out.string());

  const nlohmann::json manifest = {
      {"kind", "run_manifest"},
      {"format_version", 1},
      {"resolved_config", rc.to_json()},
      {"artifact_versions",
       {{"checkpoint", std::string(kCheckpointMagic)},
        {"train_state", std::string(kTrainStateMagic)},
        {"tool", INTENTFUSE_VERSION}}},
      {"dataset",
       {{"dir", rc.data_dir},
        {"format", data_format_to_string(rc.data_format)},
        {"fingerprints", fingerprints}}},
      {"seeds", rc.train.seeds},
      {"ablate", o.ablate},
      {"timestamp", timestamp_json()},
  };
  write_text_file((out / "manifest.json").string(), json_text(manifest));

  for (const SeedRunResult& sr : res.seeds)
    std::printf(
        "seed %llu: best val F1 %s (epoch %d); test acc %s, F1 %s, AUC %s\n",
        static_cast<unsigned long long>(sr.seed),
        fmt_fixed(sr.best_val_f1, 3).c_str(), sr.best_epoch,
        fmt_fixed(sr.raw.accuracy, 3).c_str(), fmt_fixed(sr.raw.f1, 3).c_str(),
        fmt_fixed(sr.raw.auc_roc, 3).c_str());
  const nlohmann::json& agg = res.aggregate["raw"]["metrics"];
  std::printf("aggregate: accuracy %s, F1 %s, AUC %s\n",
              agg["accuracy"]["formatted"].get<std::string>().c_str(),
              agg["f1"]["formatted"].get<std::string>().c_str(),
              agg["auc_roc"]["formatted"].get<std::string>().c_str());
  std::printf("artifacts in %s\n", out.string().c_str());
  return kExitOk;
}

int cmd_eval(const GlobalOptions& g, const EvalOptions& o) {
  const ResolvedConfig rc = resolve_options(g);
  const Checkpoint ck = load_checkpoint(require_checkpoint_path(o.checkpoint));
  const std::string dir = o.data_dir.empty() ? rc.data_dir : o.data_dir;
  const Dataset ds =
      load_one_split(dir, rc.data_format, ck.stream_config, o.split);
  const ScaledSplit ss = scale_split(ds, split_from_string(o.split), ck.scaler);

  const Model model = ck.restore();
  const EvalOutput eo =
      model.forward_eval(ss.range(0, ss.size()), ck.tau_learned);

  const double tau_inf = ck.inference_tau();
  std::vector<double> probs_scaled(eo.logits.size());
  for (std::size_t i = 0; i < eo.logits.size(); ++i)
    probs_scaled[i] = sigmoid(eo.logits[i] / tau_inf);
  const double thr_scaled =
      map_threshold(ck.threshold, ck.tau_learned, tau_inf);

  const EvalReport raw = evaluate_binary(eo.probs, ss.labels, ck.threshold);
  const EvalReport scaled =
      evaluate_binary(probs_scaled, ss.labels, thr_scaled);

  const fs::path out = out_dir_for(g, rc, "eval");
  ensure_dir(out);

  const nlohmann::json report = {
      {"kind", "eval_report"},
      {"split", o.split},
      {"tau_learned", ck.tau_learned},
      {"tau_inference", tau_inf},
      {"raw", raw.to_json()},
      {"tau_scaled", scaled.to_json()},
  };
  write_text_file((out / "report.json").string(), json_text(report));
  write_text_file((out / "roc.csv").string(),
                  curve_csv(roc_points(eo.probs, ss.labels)));
  write_text_file((out / "pr.csv").string(),
                  curve_csv(pr_points(eo.probs, ss.labels)));

  std::vector<double> kl_scores(eo.kl.size());
  for (std::size_t i = 0; i < eo.kl.size(); ++i)
    kl_scores[i] = kl_score(eo.kl[i]);
  std::vector<double> mahal(ss.size(),
                            std::numeric_limits<double>::quiet_NaN());
  if (ck.has_detector_global) {
    mahal = mahalanobis_scores(ck.detector_global, eo.mu);
  } else {
    std::fprintf(stderr,
                 "warning: checkpoint has no global detector; "
                 "mahalanobis column is nan\n");
  }
  const std::vector<int> preds = threshold_preds(probs_scaled, thr_scaled);
  write_text_file(
      (out / "risk_scores.csv").string(),
      risk_scores_csv(ss.ids, ss.labels, preds, probs_scaled, kl_scores,
                      mahal));

  std::printf("%s (%zu records)\n", o.split.c_str(), ss.size());
  std::printf("raw       : acc %s  F1 %s  AUC %s  NLL %s  ECE %s\n",
              fmt_fixed(raw.accuracy, 3).c_str(), fmt_fixed(raw.f1, 3).c_str(),
              fmt_fixed(raw.auc_roc, 3).c_str(), fmt_fixed(raw.nll, 3).c_str(),
              fmt_fixed(raw.ece, 3).c_str());
  std::printf("tau-scaled: acc %s  F1 %s  AUC %s  NLL %s  ECE %s\n",
              fmt_fixed(scaled.accuracy, 3).c_str(),
              fmt_fixed(scaled.f1, 3).c_str(),
              fmt_fixed(scaled.auc_roc, 3).c_str(),
              fmt_fixed(scaled.nll, 3).c_str(),
              fmt_fixed(scaled.ece, 3).c_str());
  std::printf("artifacts in %s\n", out.string().c_str());
  return kExitOk;
}

int cmd_calibrate(const GlobalOptions& g, const CalibrateOptions& o) {
  const ResolvedConfig rc = resolve_options(g);
  const Checkpoint ck = load_checkpoint(require_checkpoint_path(o.checkpoint));
  const std::string dir = o.data_dir.empty() ? rc.data_dir : o.data_dir;
  const Dataset ds =
      load_one_split(dir, rc.data_format, ck.stream_config, o.split);
  const ScaledSplit ss = scale_split(ds, split_from_string(o.split), ck.scaler);

  const Model model = ck.restore();
  const EvalOutput eo = model.forward_eval(ss.range(0, ss.size()), 1.0);

  const TemperatureFit fit = fit_posthoc_temperature(eo.logits, ss.labels);
  const double nll_learned =
      nll_of_temperature(eo.logits, ss.labels, ck.tau_learned);

  std::vector<double> p_learned(eo.logits.size()), p_fit(eo.logits.size());
  for (std::size_t i = 0; i < eo.logits.size(); ++i) {
    p_learned[i] = sigmoid(eo.logits[i] / ck.tau_learned);
    p_fit[i] = sigmoid(eo.logits[i] / fit.tau);
  }
  const double ece_learned = ece(p_learned, ss.labels);
  const double ece_fit = ece(p_fit, ss.labels);

  const fs::path out = out_dir_for(g, rc, "calibrate");
  ensure_dir(out);

  const nlohmann::json calib = {
      {"kind", "calibration"},
      {"split", o.split},
      {"n", ss.size()},
      {"tau_learned", ck.tau_learned},
      {"tau_posthoc", fit.tau},
      {"nll",
       {{"learned_tau", nll_learned},
        {"tau_1", fit.nll_at_one},
        {"posthoc", fit.nll}}},
      {"ece", {{"learned_tau", ece_learned}, {"posthoc", ece_fit}}},
  };
  write_text_file((out / "calibration.json").string(), json_text(calib));

  Checkpoint updated = ck;
  updated.has_tau_posthoc = true;
  updated.tau_posthoc = fit.tau;
  save_checkpoint((out / "checkpoint").string(), updated);

  std::printf("fitted tau* %s on %s (learned tau %s)\n",
              fmt_fixed(fit.tau, 4).c_str(), o.split.c_str(),
              fmt_fixed(ck.tau_learned, 4).c_str());
  std::printf("NLL %s -> %s   ECE %s -> %s\n",
              fmt_fixed(nll_learned, 4).c_str(), fmt_fixed(fit.nll, 4).c_str(),
              fmt_fixed(ece_learned, 4).c_str(), fmt_fixed(ece_fit, 4).c_str());
  std::printf("artifacts in %s\n", out.string().c_str());
  return kExitOk;
}

int cmd_risk_coverage(const GlobalOptions& g, const RiskCoverageOptions& o) {
  if (o.risk != "kl" && o.risk != "mahalanobis" && o.risk != "mahalanobis_cc")
    throw ConfigError("unknown risk source '" + o.risk +
                      "' (expected kl | mahalanobis | mahalanobis_cc)");

  const ResolvedConfig rc = resolve_options(g);
  const Checkpoint ck = load_checkpoint(require_checkpoint_path(o.checkpoint));
  const std::string dir = o.data_dir.empty() ? rc.data_dir : o.data_dir;
  const Dataset ds =
      load_one_split(dir, rc.data_format, ck.stream_config, o.split);
  const ScaledSplit ss = scale_split(ds, split_from_string(o.split), ck.scaler);

  const Model model = ck.restore();
  const double tau_inf = ck.inference_tau();
  const EvalOutput eo = model.forward_eval(ss.range(0, ss.size()), tau_inf);
  const double thr = map_threshold(ck.threshold, ck.tau_learned, tau_inf);
  const std::vector<int> preds = threshold_preds(eo.probs, thr);

  std::vector<double> risk(ss.size());
  if (o.oracle_risk) {
    for (std::size_t i = 0; i < ss.size(); ++i)
      risk[i] = preds[i] != ss.labels[i] ? 1.0 : 0.0;
  } else if (o.risk == "kl") {
    for (std::size_t i = 0; i < ss.size(); ++i) risk[i] = kl_score(eo.kl[i]);
  } else if (o.risk == "mahalanobis") {
    if (!ck.has_detector_global)
      throw DataError("checkpoint has no fitted global detector");
    risk = mahalanobis_scores(ck.detector_global, eo.mu);
  } else {
    if (!ck.has_detector_cc)
      throw DataError("checkpoint has no fitted class-conditional detector");
    risk = mahalanobis_scores(ck.detector_cc, eo.z_cls);
  }

  const std::vector<double> coverages = parse_coverages(o.coverages);
  std::printf("risk source: %s%s\n", o.risk.c_str(),
              o.oracle_risk ? " (overridden by --oracle-risk)" : "");
  std::printf("%8s %6s %9s\n", "coverage", "kept", "accuracy");
  for (double c : coverages) {
    const SelectivePrediction sp =
        selective_predict(preds, ss.labels, risk, c);
    std::printf("%8s %6zu %9s\n", fmt_fixed(c, 3).c_str(), sp.kept.size(),
                fmt_fixed(sp.accuracy, 3).c_str());
  }
  try {
    const ErrorDetection det = error_detection_eval(preds, ss.labels, risk);
    std::printf("error detection: AUROC %s, AUPRC %s (error rate %s)\n",
                fmt_fixed(det.auroc, 3).c_str(),
                fmt_fixed(det.auprc, 3).c_str(),
                fmt_fixed(det.error_rate, 3).c_str());
  } catch (const MetricError&) {
    std::printf("error detection: undefined (predictions all equal)\n");
  }

  std::vector<std::pair<double, double>> grid;
  for (int k = 1; k <= 100; ++k) {
    const double c = static_cast<double>(k) / 100.0;
    grid.emplace_back(c, selective_predict(preds, ss.labels, risk, c).accuracy);
  }
  const fs::path out = out_dir_for(g, rc, "risk_coverage");
  ensure_dir(out);
  write_text_file((out / "risk_coverage.csv").string(), curve_csv(grid));
  std::printf("wrote %s\n", (out / "risk_coverage.csv").string().c_str());
  return kExitOk;
}

int cmd_attention_export(const GlobalOptions& g,
                         const AttentionExportOptions& o) {
  if (o.format != "csv" && o.format != "svg")
    throw ConfigError("unknown format '" + o.format +
                      "' (expected csv | svg)");

  const ResolvedConfig rc = resolve_options(g);
  const Checkpoint ck = load_checkpoint(require_checkpoint_path(o.checkpoint));
  const std::string dir = o.data_dir.empty() ? rc.data_dir : o.data_dir;
  const Dataset ds =
      load_one_split(dir, rc.data_format, ck.stream_config, o.split);
  const ScaledSplit ss = scale_split(ds, split_from_string(o.split), ck.scaler);

  std::vector<std::size_t> rows;
  if (o.ids.empty()) {
    const std::size_t n =
        std::min<std::size_t>(ss.size(), o.first > 0 ? o.first : 4);
    for (std::size_t i = 0; i < n; ++i) rows.push_back(i);
  } else {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ss.size(); ++i) index[ss.ids[i]] = i;
    for (const std::string& id : o.ids) {
      const auto it = index.find(id);
      if (it == index.end()) {
        std::fprintf(stderr, "warning: id '%s' not found in split %s\n",
                     id.c_str(), o.split.c_str());
        continue;
      }
      rows.push_back(it->second);
    }
  }
  if (rows.empty()) {
    std::fprintf(stderr, "warning: nothing to export\n");
    return kExitOk;
  }

  const Model model = ck.restore();
  const Batch batch = ss.gather(rows);
  const EvalOutput eo = model.forward_eval(batch, ck.inference_tau());
  const std::vector<std::string> tokens =
      token_names(ck.model_config.active_streams);
  const std::size_t t = tokens.size();

  const fs::path out = out_dir_for(g, rc, "attention");
  ensure_dir(out);

  for (std::size_t i = 0; i < rows.size(); ++i) {
    Tensor m = Tensor::zeros(t, t);
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t c = 0; c < t; ++c) m.at(r, c) = eo.attention.at3(i, r, c);
    const double kl_s = kl_score(eo.kl[i]);
    const double mahal =
        ck.has_detector_global
            ? mahalanobis_score(ck.detector_global, mu_row(eo.mu, i))
            : std::numeric_limits<double>::quiet_NaN();
    const std::string& id = batch.ids[i];
    const std::string content =
        o.format == "csv" ? attention_csv(tokens, m, kl_s, mahal)
                          : attention_svg(id, tokens, m, kl_s, mahal);
    const fs::path p =
        out / ("attention_" + sanitize_filename(id) + "." + o.format);
    write_text_file(p.string(), content);
    std::printf("wrote %s (kl_score %s, mahalanobis %s)\n",
                p.string().c_str(), fmt_fixed(kl_s, 4).c_str(),
                fmt_fixed(mahal, 4).c_str());
  }
  return kExitOk;
}

int cmd_gradcheck(const GlobalOptions& g, const GradcheckOptions& o) {
  if (o.batch < 1) throw ConfigError("--batch must be >= 1");
  if (!(o.tolerance > 0.0)) throw ConfigError("--tolerance must be positive");

  const std::uint64_t seed = g.seed_given ? g.seed : 404;
  Model model = make_reference_model(seed);
  Batch batch = make_reference_batch(model, seed,
                                     static_cast<std::size_t>(o.batch));
  RngStream mix(seed, "mixup");
  const MixupResult mixed = mixup_batch(batch, 0.2, false, mix);
  const std::vector<double> targets = smooth_targets(mixed.batch.y, 0.1);
  LossWeights w;
  const LossWeights::Effective eff = w.at_epoch(100, 220);

  GradCheckOptions opts;
  opts.fd_step = o.fd_step;
  opts.rng_seed = seed + 1;
  opts.inject_flip = o.flip;

  const GradCheckReport report =
      check_model_gradients(model, mixed.batch, targets, eff, opts);

  std::printf("gradient check: reference model, batch %d, fd step %s, "
              "%zu loss evaluations\n",
              o.batch, fmt_double(o.fd_step).c_str(),
              report.loss_evaluations);
  if (!o.flip.empty())
    std::printf("injected sign flip into the backward rule of op '%s'\n",
                o.flip.c_str());
  std::vector<const GradCheckEntry*> failing;
  for (const GradCheckEntry& e : report.entries) {
    const bool ok = e.max_rel_err < o.tolerance;
    if (!ok) failing.push_back(&e);
    std::printf("  %-34s rel err %-13s max|grad| %-13s %s\n", e.param.c_str(),
                fmt_double(e.max_rel_err).c_str(),
                fmt_double(e.max_abs_grad).c_str(), ok ? "ok" : "FAIL");
  }
  std::printf("worst: %s (%s), tolerance %s\n",
              fmt_double(report.worst_rel_err).c_str(),
              report.worst_param.c_str(), fmt_double(o.tolerance).c_str());
  if (failing.empty()) {
    std::printf("PASS\n");
    return kExitOk;
  }
  std::printf("FAIL: %zu parameter group(s) exceed tolerance:\n",
              failing.size());
  for (const GradCheckEntry* e : failing)
    std::printf("  %s (rel err %s)\n", e->param.c_str(),
                fmt_double(e->max_rel_err).c_str());
  return kExitFailure;
}

int run_cli(int argc, const char* const* argv) {
  GlobalOptions g;
  GenDataOptions gen;
  TrainOptions tr;
  EvalOptions ev;
  CalibrateOptions cal;
  RiskCoverageOptions rcv;
  AttentionExportOptions att;
  GradcheckOptions gck;

  CLI::App app{"socially informed pedestrian crossing-intent model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(INTENTFUSE_VERSION));
  app.add_option("--config", g.config_path,
                 "configuration file (sectioned key = value)");
  app.add_option("--set", g.sets,
                 "override a config entry, e.g. --set model.d=32 (repeatable)");
  auto* seed_opt = app.add_option(
      "--seed", g.seed,
      "override synthetic.seed and collapse train.seeds to this one seed");
  app.add_option("--out", g.out, "output directory (overrides the default)");

  CLI::App* c_gen = app.add_subcommand(
      "gen-data", "generate synthetic splits plus the Bayes oracle");
  c_gen->fallthrough();
  c_gen->add_flag("--ood", gen.ood, "also write a shifted out-of-distribution set");
  c_gen->add_option("--ood-n", gen.ood_n,
                    "OOD record count (default: synthetic.n_test)");

  CLI::App* c_train = app.add_subcommand(
      "train", "run the multi-seed training protocol and write artifacts");
  c_train->fallthrough();
  c_train->add_option("--ablate", tr.ablate,
                      "streams to drop from the token set, e.g. 's' or 'si'");

  CLI::App* c_eval = app.add_subcommand(
      "eval", "evaluate a checkpoint: report, ROC/PR curves, risk scores");
  c_eval->fallthrough();
  c_eval->add_option("--checkpoint", ev.checkpoint, "checkpoint file")
      ->required();
  c_eval->add_option("--data", ev.data_dir, "dataset directory");
  c_eval->add_option("--split", ev.split, "train | val | test");

  CLI::App* c_cal = app.add_subcommand(
      "calibrate", "fit the post-hoc temperature on a held-out split");
  c_cal->fallthrough();
  c_cal->add_option("--checkpoint", cal.checkpoint, "checkpoint file")
      ->required();
  c_cal->add_option("--data", cal.data_dir, "dataset directory");
  c_cal->add_option("--split", cal.split, "train | val | test");

  CLI::App* c_risk = app.add_subcommand(
      "risk-coverage", "selective-prediction accuracy at target coverages");
  c_risk->fallthrough();
  c_risk->add_option("--checkpoint", rcv.checkpoint, "checkpoint file")
      ->required();
  c_risk->add_option("--data", rcv.data_dir, "dataset directory");
  c_risk->add_option("--split", rcv.split, "train | val | test");
  c_risk->add_option("--risk", rcv.risk,
                     "risk source: kl | mahalanobis | mahalanobis_cc");
  c_risk->add_option("--coverages", rcv.coverages,
                     "comma-separated target coverages");
  c_risk->add_flag("--oracle-risk", rcv.oracle_risk,
                   "debug: use 0/1 correctness as the risk (ideal curve)");

  CLI::App* c_att = app.add_subcommand(
      "attention-export", "export cross-stream attention heat-maps");
  c_att->fallthrough();
  c_att->add_option("--checkpoint", att.checkpoint, "checkpoint file")
      ->required();
  c_att->add_option("--data", att.data_dir, "dataset directory");
  c_att->add_option("--split", att.split, "train | val | test");
  c_att->add_option("--ids", att.ids, "sample ids (comma separated)")
      ->delimiter(',');
  c_att->add_option("--first", att.first,
                    "when no ids are given, export this many leading samples");
  c_att->add_option("--format", att.format, "csv | svg");

  CLI::App* c_gck = app.add_subcommand(
      "gradcheck", "finite-difference check of the full composite objective");
  c_gck->fallthrough();
  c_gck->add_option("--tolerance", gck.tolerance, "max relative error");
  c_gck->add_option("--fd-step", gck.fd_step, "central-difference step");
  c_gck->add_option("--batch", gck.batch, "reference batch size");
  c_gck->add_option("--flip", gck.flip,
                    "debug: sign-flip this op's backward rule");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (c_gen->parsed()) return cmd_gen_data(g, gen);
    if (c_train->parsed()) return cmd_train(g, tr);
    if (c_eval->parsed()) return cmd_eval(g, ev);
    if (c_cal->parsed()) return cmd_calibrate(g, cal);
    if (c_risk->parsed()) return cmd_risk_coverage(g, rcv);
    if (c_att->parsed()) return cmd_attention_export(g, att);
    if (c_gck->parsed()) return cmd_gradcheck(g, gck);
  } catch (const TrainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const MetricError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const CalibrationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitUsage;  // unreachable: require_subcommand(1)
}

}  // namespace cli
}  // namespace intentfuse
