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
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "intentfuse/data.h"
#include "intentfuse/error.h"
#include "intentfuse/rng.h"
#include "intentfuse/synthetic.h"

using namespace intentfuse;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// A small hand-built dataset with known medians/IQRs.
Dataset tiny_dataset() {
  StreamConfig cfg;
  cfg.d_a = 2;
  cfg.d_p = 1;
  cfg.d_s = 2;
  cfg.interaction_pairs = {{'a', 0, 'p', 0}, {'a', 1, 's', 1}};
  Dataset ds;
  ds.config = cfg;
  // a_0 over train: {1,2,3,4,5}; a_1 constant 7; p_0: {10,20,30,40,50}
  for (int i = 0; i < 5; ++i) {
    FeatureRecord r;
    r.id = "r" + std::to_string(i);
    r.video_id = "v0";
    r.track_id = "t" + std::to_string(i);
    r.split = Split::kTrain;
    r.label = i % 2;
    r.x_a = {double(i + 1), 7.0};
    r.x_p = {double((i + 1) * 10)};
    r.x_s = {double(i) - 2.0, 0.5 * double(i)};
    ds.records.push_back(r);
  }
  FeatureRecord v;
  v.id = "val0";
  v.video_id = "v1";
  v.track_id = "t9";
  v.split = Split::kVal;
  v.label = 1;
  v.x_a = {100.0, 100.0};  // extreme: must not influence the scaler fit
  v.x_p = {100.0};
  v.x_s = {100.0, 100.0};
  ds.records.push_back(v);
  return ds;
}

}  // namespace

// ---- quantile / scaler --------------------------------------------------------

TEST_CASE("quantile with linear interpolation") {
  CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({1, 2, 3, 4, 5}, 0.25) == 2.0);
  CHECK(quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({5}, 0.75) == 5.0);
  CHECK(quantile({3, 1}, 0.0) == 1.0);
  CHECK(quantile({3, 1}, 1.0) == 3.0);
  CHECK_THROWS_AS(quantile({}, 0.5), DataError);
}

TEST_CASE("robust scaler: median/IQR from train split only, floored IQR") {
  Dataset ds = tiny_dataset();
  RobustScaler sc;
  sc.fit(ds);
  // a_0: median 3, q75=4, q25=2 -> IQR 2
  CHECK(sc.medians('a')[0] == 3.0);
  CHECK(sc.iqrs('a')[0] == 2.0);
  // a_1 constant: IQR 0, divisor floored
  CHECK(sc.iqrs('a')[1] == 0.0);
  auto ta = sc.transform({5.0, 7.0}, 'a');
  CHECK(ta[0] == doctest::Approx(1.0));   // (5-3)/2
  CHECK(ta[1] == doctest::Approx(0.0));   // (7-7)/floor = 0
  auto tb = sc.transform({5.0, 7.0 + 1e-6}, 'a');
  CHECK(tb[1] == doctest::Approx(1.0));   // floor divisor 1e-6
  // p_0: median 30, IQR 20
  CHECK(sc.medians('p')[0] == 30.0);
  CHECK(sc.iqrs('p')[0] == 20.0);

  // Scaled train features have median 0 and IQR 1 per feature.
  std::vector<double> col;
  for (int i = 0; i < 5; ++i) {
    col.push_back(sc.transform(ds.records[std::size_t(i)].x_a, 'a')[0]);
  }
  CHECK(quantile(col, 0.5) == doctest::Approx(0.0));
  CHECK(quantile(col, 0.75) - quantile(col, 0.25) == doctest::Approx(1.0));

  CHECK_THROWS_AS(sc.transform({1.0}, 'a'), DataError);  // width mismatch
  RobustScaler unfit;
  CHECK_THROWS_AS(unfit.transform({1.0, 2.0}, 'a'), DataError);

  // Round-trips through JSON.
  RobustScaler sc2 = RobustScaler::from_json(sc.to_json());
  auto t1 = sc.transform({2.5, 7.0}, 'a');
  auto t2 = sc2.transform({2.5, 7.0}, 'a');
  CHECK(t1[0] == t2[0]);
  CHECK(t1[1] == t2[1]);
}

TEST_CASE("interactions follow configured pairs of scaled features") {
  Dataset ds = tiny_dataset();
  RobustScaler sc;
  sc.fit(ds);
  auto sa = sc.transform(ds.records[4].x_a, 'a');
  auto sp = sc.transform(ds.records[4].x_p, 'p');
  auto ss = sc.transform(ds.records[4].x_s, 's');
  auto inter = build_interactions(sa, sp, ss, ds.config);
  REQUIRE(inter.size() == 2);
  CHECK(inter[0] == doctest::Approx(sa[0] * sp[0]));
  CHECK(inter[1] == doctest::Approx(sa[1] * ss[1]));

  StreamConfig bad = ds.config;
  bad.interaction_pairs.push_back({'a', 5, 'p', 0});  // out of range
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  StreamConfig bad2 = ds.config;
  bad2.interaction_pairs.push_back({'i', 0, 'p', 0});  // derived stream
  CHECK_THROWS_AS(bad2.validate(), ConfigError);

  auto pairs = StreamConfig::cross('a', 3, 'p', 2);
  CHECK(pairs.size() == 6);
  CHECK(pairs[0].left_index == 0);
  CHECK(pairs[5].left_index == 2);
  CHECK(pairs[5].right_index == 1);
}

TEST_CASE("scale_split produces aligned matrices") {
  Dataset ds = tiny_dataset();
  RobustScaler sc;
  sc.fit(ds);
  ScaledSplit tr = scale_split(ds, Split::kTrain, sc);
  CHECK(tr.size() == 5);
  CHECK(tr.x_a.rows() == 5);
  CHECK(tr.x_a.cols() == 2);
  CHECK(tr.x_i.cols() == 2);
  CHECK(tr.labels[1] == 1);
  CHECK(tr.ids[0] == "r0");
  // Row 2 is record r2: a_0 = 3 -> scaled 0
  CHECK(tr.x_a.at(2, 0) == doctest::Approx(0.0));

  Batch b = tr.gather({4, 0});
  CHECK(b.size() == 2);
  CHECK(b.ids[0] == "r4");
  CHECK(b.x_a.at(0, 0) == doctest::Approx(1.0));
  CHECK(b.y[1] == 0.0);

  ScaledSplit va = scale_split(ds, Split::kVal, sc);
  CHECK(va.size() == 1);
  CHECK_THROWS_AS(scale_split(ds, Split::kTest, sc), DataError);
}

// ---- weighted sampler -----------------------------------------------------------

TEST_CASE("weighted sampler balances a 90/10 dataset") {
  std::vector<int> labels;
  for (int i = 0; i < 900; ++i) labels.push_back(0);
  for (int i = 0; i < 100; ++i) labels.push_back(1);
  WeightedSampler sampler(labels);
  RngStream rng(17, "sampler");
  int pos = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    std::size_t ix = sampler.draw(rng);
    REQUIRE(ix < labels.size());
    pos += labels[ix];
  }
  double frac = double(pos) / n;
  CHECK(frac == doctest::Approx(0.5).epsilon(0.02));

  // Deterministic for a fixed stream.
  RngStream r1(5, "s");
  RngStream r2(5, "s");
  CHECK(sampler.draw_batch(32, r1) == sampler.draw_batch(32, r2));

  WeightedSampler single(std::vector<int>(10, 1));
  CHECK(single.positive_fraction_weighted() == 1.0);
  RngStream r3(1, "s");
  CHECK(labels[sampler.draw(r3)] >= 0);
  CHECK_THROWS_AS(WeightedSampler({}), DataError);
}

// ---- file io ----------------------------------------------------------------------

TEST_CASE("csv round trip preserves every bit") {
  Dataset ds = tiny_dataset();
  // Exercise shortest-round-trip float formatting.
  ds.records[0].x_a[0] = 0.1;
  ds.records[1].x_a[1] = -1.0 / 3.0;
  ds.records[2].x_p[0] = 1e-17;
  std::string path = tmp_path("roundtrip.csv");
  save_dataset(path, DataFormat::kCsv, ds);
  Dataset back = load_dataset(path, DataFormat::kCsv, ds.config);
  REQUIRE(back.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& a = ds.records[i];
    const auto& b = back.records[i];
    CHECK(a.id == b.id);
    CHECK(a.video_id == b.video_id);
    CHECK(a.track_id == b.track_id);
    CHECK(a.split == b.split);
    CHECK(a.label == b.label);
    CHECK(a.x_a == b.x_a);  // exact, not approximate
    CHECK(a.x_p == b.x_p);
    CHECK(a.x_s == b.x_s);
  }
  // Two writes are byte-identical.
  std::string path2 = tmp_path("roundtrip2.csv");
  save_dataset(path2, DataFormat::kCsv, ds);
  std::ifstream f1(path), f2(path2);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
}

TEST_CASE("jsonl round trip") {
  Dataset ds = tiny_dataset();
  std::string path = tmp_path("roundtrip.jsonl");
  save_dataset(path, DataFormat::kJsonl, ds);
  Dataset back = load_dataset(path, DataFormat::kJsonl, ds.config);
  REQUIRE(back.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(ds.records[i].id == back.records[i].id);
    CHECK(ds.records[i].x_a == back.records[i].x_a);
    CHECK(ds.records[i].x_s == back.records[i].x_s);
  }
}

TEST_CASE("malformed inputs are rejected with parse errors") {
  StreamConfig cfg = tiny_dataset().config;
  auto write_and_try = [&](const std::string& name, const std::string& body) {
    std::string p = tmp_path(name);
    std::ofstream(p) << body;
    return p;
  };
  // Wrong header.
  std::string p1 = write_and_try("bad1.csv", "id,video,oops\n");
  CHECK_THROWS_AS(load_dataset(p1, DataFormat::kCsv, cfg), ParseError);
  // Field count mismatch.
  std::string good_header =
      "id,video_id,track_id,split,label,a_0,a_1,p_0,s_0,s_1";
  std::string p2 = write_and_try("bad2.csv", good_header + "\nr0,v,t,train,1,1,2\n");
  CHECK_THROWS_AS(load_dataset(p2, DataFormat::kCsv, cfg), ParseError);
  // Bad label.
  std::string p3 = write_and_try(
      "bad3.csv", good_header + "\nr0,v,t,train,2,1,2,3,4,5\n");
  CHECK_THROWS_AS(load_dataset(p3, DataFormat::kCsv, cfg), DataError);
  // Bad split.
  std::string p4 = write_and_try(
      "bad4.csv", good_header + "\nr0,v,t,holdout,1,1,2,3,4,5\n");
  CHECK_THROWS_AS(load_dataset(p4, DataFormat::kCsv, cfg), DataError);
  // Non-numeric feature.
  std::string p5 = write_and_try(
      "bad5.csv", good_header + "\nr0,v,t,train,1,1,x,3,4,5\n");
  CHECK_THROWS_AS(load_dataset(p5, DataFormat::kCsv, cfg), ParseError);
  // Non-finite feature.
  std::string p6 = write_and_try(
      "bad6.csv", good_header + "\nr0,v,t,train,1,1,inf,3,4,5\n");
  CHECK_THROWS_AS(load_dataset(p6, DataFormat::kCsv, cfg), ParseError);
  // Duplicate ids.
  std::string p7 = write_and_try(
      "bad7.csv", good_header + "\nr0,v,t,train,1,1,2,3,4,5\nr0,v,t,train,0,1,2,3,4,5\n");
  CHECK_THROWS_AS(load_dataset(p7, DataFormat::kCsv, cfg), DataError);
  // Empty file.
  std::string p8 = write_and_try("bad8.csv", "");
  CHECK_THROWS_AS(load_dataset(p8, DataFormat::kCsv, cfg), ParseError);
  // Header only.
  std::string p9 = write_and_try("bad9.csv", good_header + "\n");
  CHECK_THROWS_AS(load_dataset(p9, DataFormat::kCsv, cfg), DataError);
  // Truncated JSONL line.
  std::string p10 = write_and_try("bad10.jsonl", "{\"id\": \"r0\", \"video\n");
  CHECK_THROWS_AS(load_dataset(p10, DataFormat::kJsonl, cfg), ParseError);
  // JSONL with wrong stream width.
  std::string p11 = write_and_try(
      "bad11.jsonl",
      R"({"id":"r0","video_id":"v","track_id":"t","split":"train","label":1,"x_a":[1],"x_p":[1],"x_s":[1,2]})"
      "\n");
  CHECK_THROWS_AS(load_dataset(p11, DataFormat::kJsonl, cfg), DataError);
  CHECK(fingerprint_file(p11).size() == 16);
  CHECK(fingerprint_file(p11) == fingerprint_file(p11));
}

// ---- synthetic generator -------------------------------------------------------------

TEST_CASE("synthetic generation is deterministic and well-formed") {
  SyntheticSpec spec = SyntheticSpec::defaults();
  spec.n_train = 300;
  spec.n_val = 80;
  spec.n_test = 80;
  auto d1 = generate_synthetic(spec);
  auto d2 = generate_synthetic(spec);
  REQUIRE(d1.dataset.records.size() == 460);
  CHECK(d1.oracle.size() == 460);
  CHECK(d1.dataset.split_indices(Split::kTrain).size() == 300);
  CHECK(d1.dataset.split_indices(Split::kVal).size() == 80);
  CHECK(d1.dataset.split_indices(Split::kTest).size() == 80);
  for (std::size_t i = 0; i < d1.dataset.records.size(); ++i) {
    const auto& a = d1.dataset.records[i];
    const auto& b = d2.dataset.records[i];
    CHECK(a.x_a == b.x_a);
    CHECK(a.x_p == b.x_p);
    CHECK(a.x_s == b.x_s);
    CHECK(a.label == b.label);
    CHECK(d1.oracle[i] == d2.oracle[i]);
    CHECK(a.x_a.size() == std::size_t(spec.streams.dim('a')));
    CHECK(d1.oracle[i] >= 0.0);
    CHECK(d1.oracle[i] <= 1.0);
  }
  // Different seed, different data.
  SyntheticSpec spec2 = spec;
  spec2.seed = 8;
  auto d3 = generate_synthetic(spec2);
  CHECK(d3.dataset.records[0].x_a != d1.dataset.records[0].x_a);
}

TEST_CASE("synthetic labels are consistent with the closed-form oracle") {
  SyntheticSpec spec = SyntheticSpec::defaults();
  auto data = generate_synthetic(spec);
  const std::size_t n = data.dataset.records.size();
  // Empirical positive rate tracks the mean oracle probability.
  double pos = 0, mean_p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    pos += data.dataset.records[i].label;
    mean_p += data.oracle[i];
  }
  pos /= double(n);
  mean_p /= double(n);
  CHECK(std::fabs(pos - mean_p) < 0.03);
  CHECK(std::fabs(pos - spec.class_balance) < 0.03);

  // Conditioned on high/low oracle probability, labels follow suit.
  double hi_n = 0, hi_pos = 0, lo_n = 0, lo_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (data.oracle[i] > 0.9) {
      hi_n++;
      hi_pos += data.dataset.records[i].label;
    } else if (data.oracle[i] < 0.1) {
      lo_n++;
      lo_pos += data.dataset.records[i].label;
    }
  }
  REQUIRE(hi_n > 100);
  REQUIRE(lo_n > 100);
  CHECK(hi_pos / hi_n > 0.9);
  CHECK(lo_pos / lo_n < 0.1);

  // Default spec lands near the documented Bayes accuracy.
  CHECK(bayes_accuracy(data.oracle) == doctest::Approx(0.92).epsilon(0.01));
}

TEST_CASE("zero noise gives deterministic labels") {
  SyntheticSpec spec = SyntheticSpec::defaults();
  spec.n_train = 200;
  spec.n_val = 50;
  spec.n_test = 50;
  spec.noise_scale = 0.0;
  auto data = generate_synthetic(spec);
  CHECK(bayes_accuracy(data.oracle) == doctest::Approx(1.0));
  for (std::size_t i = 0; i < data.oracle.size(); ++i) {
    if (data.oracle[i] == 1.0) CHECK(data.dataset.records[i].label == 1);
    if (data.oracle[i] == 0.0) CHECK(data.dataset.records[i].label == 0);
  }
}

TEST_CASE("ood generation shifts features but not the label rule") {
  SyntheticSpec spec = SyntheticSpec::defaults();
  spec.n_train = 400;
  spec.n_val = 100;
  spec.n_test = 100;
  auto base = generate_synthetic(spec);
  auto ood = generate_ood(spec, 300);
  REQUIRE(ood.dataset.records.size() == 300);
  for (const auto& r : ood.dataset.records) CHECK(r.split == Split::kTest);

  // Mean of every feature moves by ~ mean_sigmas * sigma.
  double base_m = 0, ood_m = 0;
  for (const auto& r : base.dataset.records) base_m += r.x_a[0];
  for (const auto& r : ood.dataset.records) ood_m += r.x_a[0];
  base_m /= double(base.dataset.records.size());
  ood_m /= double(ood.dataset.records.size());
  CHECK(ood_m - base_m > 1.0);  // sigma_a0 >= 0.5, 3 sigmas

  // Oracle distribution is not degenerate: labels still follow u.
  double mean_p = 0;
  for (double p : ood.oracle) mean_p += p;
  mean_p /= double(ood.oracle.size());
  CHECK(mean_p > 0.2);
  CHECK(mean_p < 0.6);
}

TEST_CASE("oracle file round trip") {
  SyntheticSpec spec = SyntheticSpec::defaults();
  spec.n_train = 50;
  spec.n_val = 20;
  spec.n_test = 20;
  auto data = generate_synthetic(spec);
  std::string path = tmp_path("oracle.csv");
  write_oracle(path, data.dataset, data.oracle);
  auto back = load_oracle(path);
  REQUIRE(back.size() == data.oracle.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i] == data.oracle[i]);  // exact round trip
  }
}

TEST_CASE("spec validation") {
  SyntheticSpec s = SyntheticSpec::defaults();
  s.class_balance = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = SyntheticSpec::defaults();
  s.noise_scale = -0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = SyntheticSpec::defaults();
  s.linear_terms.clear();
  s.product_terms.clear();
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = SyntheticSpec::defaults();
  s.linear_terms.push_back({'a', 99, 1.0});
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = SyntheticSpec::defaults();
  s.n_val = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}
