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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "intentfuse/error.h"
#include "intentfuse/synthetic.h"
#include "intentfuse/trainer.h"

using namespace intentfuse;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(bool(f));
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

ModelConfig tiny_model_config() {
  ModelConfig mc;
  mc.d = 16;
  mc.layers = 1;
  mc.heads = 2;
  mc.ffn_mult = 2;
  mc.d_z = 4;
  return mc;
}

ModelConfig tiny_model_config_nodrop() {
  ModelConfig mc = tiny_model_config();
  mc.dropout_encoder = 0.0;
  mc.dropout_transformer = 0.0;
  mc.dropout_head = 0.0;
  return mc;
}

SyntheticData tiny_data(int n_train, int n_val, int n_test,
                        std::uint64_t seed) {
  SyntheticSpec spec = SyntheticSpec::defaults();
  spec.n_train = n_train;
  spec.n_val = n_val;
  spec.n_test = n_test;
  spec.seed = seed;
  return generate_synthetic(spec);
}

struct Prepared {
  RobustScaler scaler;
  ScaledSplit train, val, test;
};

Prepared prepare(const Dataset& ds) {
  Prepared p;
  p.scaler.fit(ds);
  p.train = scale_split(ds, Split::kTrain, p.scaler);
  p.val = scale_split(ds, Split::kVal, p.scaler);
  p.test = scale_split(ds, Split::kTest, p.scaler);
  return p;
}

std::vector<double> flatten_params(const Model& model) {
  std::vector<double> out;
  for (const Param& p : model.params().entries())
    for (std::size_t i = 0; i < p.value.size(); ++i) out.push_back(p.value[i]);
  return out;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

bool records_equal(const EpochRecord& a, const EpochRecord& b) {
  return a.epoch == b.epoch && a.step == b.step && a.lr == b.lr &&
         a.ce == b.ce && a.kl == b.kl && a.div == b.div &&
         a.temp_prior == b.temp_prior && a.total == b.total &&
         a.val_acc == b.val_acc && a.val_f1 == b.val_f1;
}

}  // namespace

TEST_CASE("train config validates its ranges and round-trips") {
  TrainConfig cfg;
  cfg.validate();

  SUBCASE("round trip") {
    cfg.epochs = 12;
    cfg.warmup_epochs = 3;
    cfg.peak_lr = 5e-4;
    cfg.seeds = {1, 2, 3};
    cfg.report_every = 4;
    const TrainConfig back = TrainConfig::from_json(cfg.to_json());
    CHECK(back.epochs == 12);
    CHECK(back.warmup_epochs == 3);
    CHECK(back.peak_lr == 5e-4);
    CHECK(back.seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(back.report_every == 4);
    CHECK(back.keep_best == cfg.keep_best);
  }
  SUBCASE("warmup must stay below epochs") {
    cfg.warmup_epochs = cfg.epochs;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("clip norm must be positive") {
    cfg.clip_norm = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("batch size must be positive") {
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("betas live in the unit interval") {
    cfg.beta2 = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("seeds cannot be empty") {
    cfg.seeds.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("learning rate schedule hits its closed-form anchors") {
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.warmup_epochs = 4;
  cfg.peak_lr = 2e-3;
  cfg.final_lr_factor = 0.01;
  const std::uint64_t spe = 10;
  const std::uint64_t warmup = 4 * spe;
  const std::uint64_t total = 20 * spe;

  SUBCASE("step zero gives zero") { CHECK(lr_at(0, cfg, spe) == 0.0); }
  SUBCASE("warmup is linear and ends exactly at peak") {
    CHECK(lr_at(warmup / 2, cfg, spe) == 0.5 * cfg.peak_lr);
    CHECK(lr_at(warmup, cfg, spe) == cfg.peak_lr);
  }
  SUBCASE("last step lands on peak times final factor") {
    CHECK(std::abs(lr_at(total, cfg, spe) -
                   cfg.peak_lr * cfg.final_lr_factor) < 1e-15);
  }
  SUBCASE("cosine midpoint halves the decayable range") {
    const double mid = lr_at(warmup + (total - warmup) / 2, cfg, spe);
    const double expect =
        cfg.peak_lr * (cfg.final_lr_factor + (1.0 - cfg.final_lr_factor) * 0.5);
    CHECK(std::abs(mid - expect) < 1e-12);
  }
  SUBCASE("continuous at the junction and monotone on both sides") {
    double prev = lr_at(0, cfg, spe);
    for (std::uint64_t k = 1; k <= warmup; ++k) {
      const double lr = lr_at(k, cfg, spe);
      CHECK(lr > prev);
      prev = lr;
    }
    // First cosine step barely moves off the peak.
    const double after = lr_at(warmup + 1, cfg, spe);
    CHECK(after <= cfg.peak_lr);
    CHECK(cfg.peak_lr - after < cfg.peak_lr * 1e-3);
    for (std::uint64_t k = warmup + 1; k <= total; ++k) {
      const double lr = lr_at(k, cfg, spe);
      CHECK(lr <= prev);
      prev = lr;
    }
  }
  SUBCASE("zero warmup starts at peak") {
    cfg.warmup_epochs = 0;
    CHECK(lr_at(0, cfg, spe) == cfg.peak_lr);
    CHECK(lr_at(1, cfg, spe) < cfg.peak_lr);
  }
}

TEST_CASE("gradient clipping rescales only above the threshold") {
  ParamStore store;
  Param& a = store.add("a", 5, 10);
  Param& b = store.add("b", 5, 10);

  SUBCASE("norm below threshold leaves gradients untouched") {
    a.grad.fill(1e-3);
    b.grad.fill(-2e-3);
    const Tensor before_a = a.grad, before_b = b.grad;
    const double norm = clip_gradients(store, 1.0);
    CHECK(norm == doctest::Approx(std::sqrt(50 * 1e-6 + 50 * 4e-6)));
    for (std::size_t i = 0; i < before_a.size(); ++i) {
      CHECK(a.grad[i] == before_a[i]);
      CHECK(b.grad[i] == before_b[i]);
    }
  }
  SUBCASE("one hundred ones scale to unit norm") {
    a.grad.fill(1.0);
    b.grad.fill(1.0);
    const double norm = clip_gradients(store, 1.0);
    CHECK(norm == doctest::Approx(10.0).epsilon(1e-12));
    double sq = 0.0;
    for (std::size_t i = 0; i < a.grad.size(); ++i)
      sq += a.grad[i] * a.grad[i] + b.grad[i] * b.grad[i];
    CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-12);
  }
  SUBCASE("direction is preserved") {
    RngStream rng(11, "clip");
    for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] = rng.normal();
    for (std::size_t i = 0; i < b.grad.size(); ++i) b.grad[i] = rng.normal();
    std::vector<double> pre;
    for (std::size_t i = 0; i < a.grad.size(); ++i) pre.push_back(a.grad[i]);
    for (std::size_t i = 0; i < b.grad.size(); ++i) pre.push_back(b.grad[i]);
    clip_gradients(store, 0.5);
    std::vector<double> post;
    for (std::size_t i = 0; i < a.grad.size(); ++i) post.push_back(a.grad[i]);
    for (std::size_t i = 0; i < b.grad.size(); ++i) post.push_back(b.grad[i]);
    double dot = 0, n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < pre.size(); ++i) {
      dot += pre[i] * post[i];
      n1 += pre[i] * pre[i];
      n2 += post[i] * post[i];
    }
    CHECK(std::abs(dot / std::sqrt(n1 * n2) - 1.0) < 1e-12);
  }
  SUBCASE("non-positive max norm is rejected") {
    CHECK_THROWS_AS(clip_gradients(store, 0.0), ConfigError);
  }
}

TEST_CASE("adamw step follows the decoupled update rule") {
  TrainConfig cfg;
  cfg.weight_decay = 0.0;

  SUBCASE("zero gradients and zero decay change nothing") {
    ParamStore store;
    Param& p = store.add("w", 3, 3);
    for (std::size_t i = 0; i < p.value.size(); ++i)
      p.value[i] = 0.1 * double(i + 1);
    const Tensor before = p.value;
    AdamState st;
    st.init(store);
    adamw_step(store, st, 0.05, cfg);
    adamw_step(store, st, 0.05, cfg);
    for (std::size_t i = 0; i < before.size(); ++i)
      CHECK(p.value[i] == before[i]);
    CHECK(st.step == 2);
  }
  SUBCASE("first step with unit gradient moves by about minus lr") {
    ParamStore store;
    Param& p = store.add("w", 1, 1);
    p.value.at(0, 0) = 0.3;
    p.grad.at(0, 0) = 1.0;
    AdamState st;
    st.init(store);
    adamw_step(store, st, 0.01, cfg);
    // Bias correction makes mhat = 1, vhat = 1 on the first step.
    const double expect = 0.3 - 0.01 * (1.0 / (1.0 + cfg.adam_eps));
    CHECK(p.value.at(0, 0) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(std::abs(p.value.at(0, 0) - (0.3 - 0.01)) < 1e-8);
  }
  SUBCASE("fifty steps settle a quadratic bowl") {
    ParamStore store;
    Param& p = store.add("x", 1, 1);
    p.value.at(0, 0) = 1.0;
    AdamState st;
    st.init(store);
    for (int k = 0; k < 50; ++k) {
      p.grad.at(0, 0) = p.value.at(0, 0);  // d/dx of x^2/2
      adamw_step(store, st, 0.1, cfg);
    }
    CHECK(std::abs(p.value.at(0, 0)) < 1e-2);
  }
  SUBCASE("decay multiplies before the update and skips log_tau") {
    cfg.weight_decay = 0.5;
    ParamStore store;
    Param& w = store.add("head.W", 1, 1);
    Param& t = store.add("temperature.log_tau", 1, 1);
    w.value.at(0, 0) = 2.0;
    t.value.at(0, 0) = 0.7;
    AdamState st;
    st.init(store);
    adamw_step(store, st, 0.1, cfg);
    // Zero gradient: the only effect on w is the decay factor.
    CHECK(w.value.at(0, 0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)));
    CHECK(t.value.at(0, 0) == 0.7);
  }
  SUBCASE("non-finite gradient aborts and names the parameter") {
    ParamStore store;
    store.add("ok", 2, 2);
    Param& bad = store.add("highway.a.W_g", 2, 2);
    bad.grad.at(0, 0) = std::nan("");
    AdamState st;
    st.init(store);
    CHECK_THROWS_WITH_AS(adamw_step(store, st, 0.01, cfg),
                         doctest::Contains("highway.a.W_g"), TrainError);
  }
  SUBCASE("state size mismatch is rejected") {
    ParamStore store;
    store.add("w", 2, 2);
    AdamState st;  // never initialised
    CHECK_THROWS_AS(adamw_step(store, st, 0.01, cfg), TrainError);
  }
}

TEST_CASE("history csv has the contract header and stable formatting") {
  EpochRecord r;
  r.epoch = 2;
  r.step = 30;
  r.lr = 0.001;
  r.ce = 0.5;
  r.kl = 1.25;
  r.div = -0.75;
  r.temp_prior = 0.125;
  r.total = 0.6;
  r.val_acc = 0.875;
  r.val_f1 = 0.9;
  const std::string csv = history_csv({r});
  CHECK(csv ==
        "epoch,step,lr,ce,kl,div,temp_prior,total,val_acc,val_f1\n"
        "2,30,0.001,0.5,1.25,-0.75,0.125,0.6,0.875,0.9\n");
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  const SyntheticData data = tiny_data(48, 16, 16, 21);
  const Prepared prep = prepare(data.dataset);
  Model model(tiny_model_config(), data.dataset.config);
  model.init_params(3);
  const std::vector<double> before = flatten_params(model);

  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.warmup_epochs = 1;
  cfg.peak_lr = 0.0;
  cfg.batch_size = 16;
  LossWeights weights;
  const TrainResult res =
      train(model, prep.train, prep.val, cfg, weights, 21);
  CHECK(res.history.size() == 2);
  CHECK(bitwise_equal(before, flatten_params(model)));
}

TEST_CASE("same seed trains to bitwise-identical histories and weights") {
  const SyntheticData data = tiny_data(96, 32, 32, 9);
  const Prepared prep = prepare(data.dataset);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.warmup_epochs = 1;
  cfg.batch_size = 32;
  LossWeights weights;

  auto run = [&](std::uint64_t seed) {
    Model model(tiny_model_config(), data.dataset.config);
    model.init_params(seed);
    const TrainResult res =
        train(model, prep.train, prep.val, cfg, weights, seed);
    return std::make_pair(res, flatten_params(model));
  };

  const auto [res_a, params_a] = run(5);
  const auto [res_b, params_b] = run(5);
  REQUIRE(res_a.history.size() == res_b.history.size());
  for (std::size_t i = 0; i < res_a.history.size(); ++i)
    CHECK(records_equal(res_a.history[i], res_b.history[i]));
  CHECK(bitwise_equal(params_a, params_b));

  // A different seed must actually change the trajectory.
  const auto [res_c, params_c] = run(6);
  CHECK_FALSE(bitwise_equal(params_a, params_c));
}

TEST_CASE("every epoch record satisfies the loss decomposition identity") {
  const SyntheticData data = tiny_data(64, 16, 16, 13);
  const Prepared prep = prepare(data.dataset);
  Model model(tiny_model_config(), data.dataset.config);
  model.init_params(1);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.warmup_epochs = 1;
  cfg.batch_size = 32;
  LossWeights weights;
  const TrainResult res = train(model, prep.train, prep.val, cfg, weights, 13);
  REQUIRE(res.history.size() == 4);
  for (const EpochRecord& r : res.history) {
    const LossWeights::Effective w = weights.at_epoch(r.epoch, cfg.epochs);
    const double rebuilt =
        r.ce + w.kl * r.kl + w.div * r.div + w.tau * r.temp_prior;
    CHECK(std::abs(r.total - rebuilt) < 1e-9);
    CHECK(r.step == std::uint64_t(r.epoch + 1) * 2);  // ceil(64/32) = 2
  }
}

TEST_CASE("interrupted training resumes bitwise") {
  const SyntheticData data = tiny_data(64, 24, 24, 17);
  const Prepared prep = prepare(data.dataset);
  const ModelConfig mc = tiny_model_config();
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.warmup_epochs = 2;
  cfg.batch_size = 32;
  LossWeights weights;
  const std::uint64_t seed = 23;

  // Uninterrupted reference run.
  Model ref(mc, data.dataset.config);
  ref.init_params(seed);
  const TrainResult ref_res =
      train(ref, prep.train, prep.val, cfg, weights, seed);

  // Split run: three epochs, a state file on disk, then the rest.
  Model first(mc, data.dataset.config);
  first.init_params(seed);
  TrainState st;
  train(first, prep.train, prep.val, cfg, weights, seed, &st, 3);
  CHECK(st.next_epoch == 3);
  const std::string path = tmp_path("intentfuse_resume_state.bin");
  save_train_state(path, first, st);

  Model second(mc, data.dataset.config);
  second.init_params(seed + 1000);  // overwritten by the loaded state
  TrainState resumed = load_train_state(path, second);
  CHECK(resumed.next_epoch == 3);
  CHECK(resumed.history.size() == 3);
  const TrainResult res =
      train(second, prep.train, prep.val, cfg, weights, seed, &resumed);

  REQUIRE(res.history.size() == ref_res.history.size());
  for (std::size_t i = 0; i < res.history.size(); ++i)
    CHECK(records_equal(res.history[i], ref_res.history[i]));
  CHECK(bitwise_equal(flatten_params(ref), flatten_params(second)));
  CHECK(res.best_epoch == ref_res.best_epoch);
  CHECK(res.best_val_f1 == ref_res.best_val_f1);
  std::filesystem::remove(path);
}

TEST_CASE("a 64-record dataset is memorised within 300 epochs") {
  SyntheticSpec spec = SyntheticSpec::defaults();
  spec.n_train = 64;
  spec.n_val = 64;
  spec.n_test = 16;
  spec.seed = 29;
  spec.noise_scale = 0.0;  // deterministic labels: memorisation target
  const SyntheticData data = generate_synthetic(spec);

  // The memorisation check scores the training records themselves.
  RobustScaler scaler;
  scaler.fit(data.dataset);
  const ScaledSplit tr = scale_split(data.dataset, Split::kTrain, scaler);

  Model model(tiny_model_config_nodrop(), data.dataset.config);
  model.init_params(2);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.warmup_epochs = 10;
  cfg.peak_lr = 3e-3;
  cfg.batch_size = 32;
  LossWeights weights;
  weights.mixup_alpha = 0.0;
  weights.label_smoothing = 0.05;

  const TrainResult res = train(model, tr, tr, cfg, weights, 29);
  double best_acc = 0.0;
  for (const EpochRecord& r : res.history)
    best_acc = std::max(best_acc, r.val_acc);
  CHECK(best_acc >= 0.98);

  // The restored best snapshot reproduces the memorised accuracy.
  const EvalOutput out =
      model.forward_eval(tr.range(0, tr.size()), model.temperature());
  const Confusion c = confusion(0.5, out.probs, tr.labels);
  CHECK(accuracy(c) >= 0.98);
}

TEST_CASE("threshold mapping keeps decisions identical across temperatures") {
  SUBCASE("closed forms") {
    CHECK(map_threshold(0.5, 1.0, 3.0) == doctest::Approx(0.5));
    // logit(0.8) = ln 4, halved gives ln 2, sigmoid(ln 2) = 2/3.
    CHECK(map_threshold(0.8, 1.0, 2.0) == doctest::Approx(2.0 / 3.0));
    CHECK(map_threshold(0.0, 1.0, 2.0) == 0.0);
    CHECK(map_threshold(1.0, 1.0, 2.0) == 1.0);
    CHECK(map_threshold(0.37, 1.7, 1.7) == doctest::Approx(0.37));
    CHECK_THROWS_AS(map_threshold(0.5, 0.0, 1.0), ConfigError);
  }
  SUBCASE("decision invariance on random logits") {
    RngStream rng(31, "map-threshold");
    const double tau_from = 0.9, tau_to = 2.4, t = 0.62;
    const double t_mapped = map_threshold(t, tau_from, tau_to);
    for (int i = 0; i < 500; ++i) {
      const double logit = 4.0 * rng.normal();
      const double p_from = 1.0 / (1.0 + std::exp(-logit / tau_from));
      const double p_to = 1.0 / (1.0 + std::exp(-logit / tau_to));
      CHECK((p_from >= t) == (p_to >= t_mapped));
    }
  }
}

TEST_CASE("run_seeds writes the full artifact tree deterministically") {
  const SyntheticData data = tiny_data(96, 32, 32, 37);
  const ModelConfig mc = tiny_model_config();
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.warmup_epochs = 1;
  cfg.batch_size = 32;
  cfg.seeds = {1, 2};
  LossWeights weights;

  const std::string dir_a = tmp_path("intentfuse_run_a");
  const std::string dir_b = tmp_path("intentfuse_run_b");
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);

  const RunSeedsResult ra = run_seeds(data.dataset, mc, cfg, weights, dir_a);
  const RunSeedsResult rb = run_seeds(data.dataset, mc, cfg, weights, dir_b);

  REQUIRE(ra.seeds.size() == 2);
  const std::vector<std::string> files = {"checkpoint", "history.csv",
                                          "report.json", "risk_scores.csv"};
  for (const std::string& seed_dir : {std::string("seed_1"), std::string("seed_2")}) {
    for (const std::string& f : files) {
      const std::string pa = dir_a + "/" + seed_dir + "/" + f;
      const std::string pb = dir_b + "/" + seed_dir + "/" + f;
      REQUIRE(std::filesystem::exists(pa));
      REQUIRE(std::filesystem::exists(pb));
      CHECK(read_bytes(pa) == read_bytes(pb));
    }
  }
  CHECK(read_bytes(dir_a + "/aggregate.json") ==
        read_bytes(dir_b + "/aggregate.json"));

  // Aggregate carries mean, std and the formatted string per metric.
  const nlohmann::json& agg = ra.aggregate;
  CHECK(agg.at("n_seeds").get<int>() == 2);
  const nlohmann::json& acc = agg.at("raw").at("metrics").at("accuracy");
  CHECK(acc.at("mean").is_number());
  CHECK(acc.at("std").is_number());
  const std::string formatted = acc.at("formatted").get<std::string>();
  CHECK(formatted.find(" ± ") != std::string::npos);
  CHECK(agg.at("tau_scaled").at("metrics").contains("ece"));
  CHECK(agg.at("per_seed").size() == 2);

  // The mapped threshold makes both report variants decide identically.
  for (const SeedRunResult& sr : ra.seeds) {
    CHECK(sr.raw.accuracy == sr.tau_scaled.accuracy);
    CHECK(sr.raw.f1 == sr.tau_scaled.f1);
    CHECK(std::abs(sr.raw.auc_roc - sr.tau_scaled.auc_roc) < 1e-12);
  }

  // The written checkpoint restores and reproduces the scaled report.
  const Checkpoint ckpt = load_checkpoint(dir_a + "/seed_1/checkpoint");
  CHECK(ckpt.has_tau_posthoc);
  CHECK(ckpt.has_detector_global);
  CHECK(ckpt.has_detector_cc);
  CHECK(ckpt.scaler.fitted());
  Model model = ckpt.restore();
  const ScaledSplit te = scale_split(data.dataset, Split::kTest, ckpt.scaler);
  const EvalOutput out =
      model.forward_eval(te.range(0, te.size()), ckpt.inference_tau());
  const double t_scaled = ckpt.extra.at("threshold_scaled").get<double>();
  const EvalReport rep = evaluate_binary(out.probs, te.labels, t_scaled);
  CHECK(rep.accuracy == ra.seeds[0].tau_scaled.accuracy);
  CHECK(rep.nll == ra.seeds[0].tau_scaled.nll);

  // Risk scores stay aligned with the test split.
  {
    std::ifstream f(dir_a + "/seed_1/risk_scores.csv");
    REQUIRE(bool(f));
    std::string header;
    std::getline(f, header);
    CHECK(header == "id,label,pred,prob,kl_score,mahalanobis");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(f, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 32);
  }

  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("a single seed aggregates with an undefined std") {
  const SyntheticData data = tiny_data(48, 24, 24, 41);
  const ModelConfig mc = tiny_model_config();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.warmup_epochs = 1;
  cfg.batch_size = 24;
  cfg.seeds = {5};
  LossWeights weights;

  const RunSeedsResult r = run_seeds(data.dataset, mc, cfg, weights, "");
  CHECK(r.seeds.size() == 1);
  const nlohmann::json& acc = r.aggregate.at("raw").at("metrics").at("accuracy");
  CHECK(acc.at("mean").get<double>() == r.seeds[0].raw.accuracy);
  CHECK(acc.at("std").is_null());
  CHECK(r.aggregate.at("n_seeds").get<int>() == 1);
}

TEST_CASE("train state files reject foreign or damaged input") {
  const SyntheticData data = tiny_data(32, 16, 16, 43);
  const Prepared prep = prepare(data.dataset);
  Model model(tiny_model_config(), data.dataset.config);
  model.init_params(1);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.warmup_epochs = 1;
  cfg.batch_size = 16;
  LossWeights weights;
  TrainState st;
  train(model, prep.train, prep.val, cfg, weights, 43, &st, 1);

  const std::string path = tmp_path("intentfuse_state_damage.bin");
  save_train_state(path, model, st);

  SUBCASE("round trip preserves counters and history") {
    Model fresh(tiny_model_config(), data.dataset.config);
    fresh.init_params(9);
    const TrainState back = load_train_state(path, fresh);
    CHECK(back.next_epoch == st.next_epoch);
    CHECK(back.adam.step == st.adam.step);
    CHECK(back.sampler_counter == st.sampler_counter);
    CHECK(back.mixup_counter == st.mixup_counter);
    CHECK(back.dropout_counter == st.dropout_counter);
    CHECK(back.reparam_counter == st.reparam_counter);
    REQUIRE(back.history.size() == st.history.size());
    for (std::size_t i = 0; i < st.history.size(); ++i)
      CHECK(records_equal(back.history[i], st.history[i]));
    CHECK(bitwise_equal(flatten_params(model), flatten_params(fresh)));
  }
  SUBCASE("a checkpoint magic is not a train state") {
    std::string bytes = read_bytes(path);
    for (int i = 0; i < 8; ++i) bytes[i] = kCheckpointMagic[i];
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.close();
    Model fresh(tiny_model_config(), data.dataset.config);
    fresh.init_params(9);
    CHECK_THROWS_AS(load_train_state(path, fresh), CheckpointError);
  }
  SUBCASE("a model of another shape is rejected") {
    ModelConfig other = tiny_model_config();
    other.d = 32;
    Model fresh(other, data.dataset.config);
    fresh.init_params(9);
    CHECK_THROWS_AS(load_train_state(path, fresh), CheckpointError);
  }

  std::filesystem::remove(path);
}
