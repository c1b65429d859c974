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

#include "intentfuse/synthetic.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "intentfuse/error.h"
#include "intentfuse/numfmt.h"

namespace intentfuse {

namespace {

// Per-feature location/scale, a fixed varied pattern so that robust
// scaling has real work to do. Stable across runs by construction.
struct FeatureDist {
  double mu;
  double sigma;
};

FeatureDist feature_dist(char stream, int index) {
  int base = stream == 'a' ? 0 : (stream == 'p' ? 100 : 200);
  int h = base + index;
  double mu = 0.3 * static_cast<double>((7 * h) % 11 - 5);
  double sigma = 0.5 + 0.35 * static_cast<double>((13 * h) % 7);
  return {mu, sigma};
}

// Latent log-odds from standardised draws; this is what makes the Bayes
// posterior exact: u depends only on z, never on the noise channel.
double latent_u(const SyntheticSpec& spec,
                const std::map<std::pair<char, int>, double>& z) {
  double u = 0.0;
  for (const auto& t : spec.linear_terms) {
    u += t.weight * z.at({t.stream, t.index});
  }
  for (const auto& t : spec.product_terms) {
    u += t.weight * z.at({t.stream_a, t.index_a}) *
         z.at({t.stream_b, t.index_b});
  }
  return u;
}

std::vector<std::pair<char, int>> all_features(const StreamConfig& cfg) {
  std::vector<std::pair<char, int>> out;
  for (char s : {'a', 'p', 's'}) {
    for (int j = 0; j < cfg.dim(s); ++j) out.push_back({s, j});
  }
  return out;
}

// The intercept fixes the positive rate near class_balance. It is a
// property of the process, not of a particular sample, so it is derived
// from a large fixed calibration draw and therefore identical for the
// base and OOD sets of the same spec.
double fit_intercept(const SyntheticSpec& spec) {
  constexpr int kCalibration = 20000;
  RngStream rng(spec.seed, "intercept-calibration");
  auto feats = all_features(spec.streams);
  std::vector<double> u(kCalibration);
  std::map<std::pair<char, int>, double> z;
  for (int i = 0; i < kCalibration; ++i) {
    for (const auto& f : feats) z[f] = rng.normal();
    u[static_cast<std::size_t>(i)] = latent_u(spec, z);
  }
  return -quantile(std::move(u), 1.0 - spec.class_balance);
}

double oracle_prob(double u_shifted, double noise_scale) {
  if (noise_scale == 0.0) {
    if (u_shifted > 0.0) return 1.0;
    if (u_shifted < 0.0) return 0.0;
    return 0.5;
  }
  return 1.0 / (1.0 + std::exp(-u_shifted / noise_scale));
}

SyntheticData generate(const SyntheticSpec& spec, int n_total, bool ood,
                       const char* feature_purpose, const char* label_purpose) {
  spec.validate();
  const double c0 = fit_intercept(spec);
  RngStream feat_rng(spec.seed, feature_purpose);
  RngStream label_rng(spec.seed, label_purpose);
  auto feats = all_features(spec.streams);

  SyntheticData out;
  out.dataset.config = spec.streams;
  out.dataset.records.reserve(static_cast<std::size_t>(n_total));
  out.oracle.reserve(static_cast<std::size_t>(n_total));

  std::map<std::pair<char, int>, double> z;
  for (int i = 0; i < n_total; ++i) {
    for (const auto& f : feats) z[f] = feat_rng.normal();
    const double u = latent_u(spec, z) + c0;
    const double p = oracle_prob(u, spec.noise_scale);
    FeatureRecord rec;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%06d", ood ? "ood_" : "syn_", i);
    rec.id = buf;
    std::snprintf(buf, sizeof(buf), "vid_%04d", i / 25);
    rec.video_id = buf;
    std::snprintf(buf, sizeof(buf), "trk_%04d_%02d", i / 25, i % 25);
    rec.track_id = buf;
    if (ood) {
      rec.split = Split::kTest;
    } else if (i < spec.n_train) {
      rec.split = Split::kTrain;
    } else if (i < spec.n_train + spec.n_val) {
      rec.split = Split::kVal;
    } else {
      rec.split = Split::kTest;
    }
    rec.label = label_rng.bernoulli(p) ? 1 : 0;
    for (const auto& f : feats) {
      FeatureDist d = feature_dist(f.first, f.second);
      double shift = ood ? spec.ood.mean_sigmas * d.sigma : 0.0;
      double scl = ood ? spec.ood.scale_mult : 1.0;
      double x = d.mu + shift + d.sigma * scl * z[f];
      switch (f.first) {
        case 'a': rec.x_a.push_back(x); break;
        case 'p': rec.x_p.push_back(x); break;
        default: rec.x_s.push_back(x); break;
      }
    }
    out.dataset.records.push_back(std::move(rec));
    out.oracle.push_back(p);
  }
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_train <= 0 || n_val <= 0 || n_test <= 0) {
    throw ConfigError("synthetic split sizes must be positive");
  }
  if (class_balance <= 0.0 || class_balance >= 1.0) {
    throw ConfigError("class_balance must lie in (0,1)");
  }
  if (noise_scale < 0.0) throw ConfigError("noise_scale must be >= 0");
  if (ood.scale_mult <= 0.0) throw ConfigError("ood scale_mult must be > 0");
  streams.validate();
  if (linear_terms.empty() && product_terms.empty()) {
    throw ConfigError("synthetic spec needs at least one latent term");
  }
  auto check_feature = [&](char s, int ix) {
    if (s != 'a' && s != 'p' && s != 's') {
      throw ConfigError("latent term references unknown stream");
    }
    if (ix < 0 || ix >= streams.dim(s)) {
      throw ConfigError("latent term index out of range");
    }
  };
  for (const auto& t : linear_terms) check_feature(t.stream, t.index);
  for (const auto& t : product_terms) {
    check_feature(t.stream_a, t.index_a);
    check_feature(t.stream_b, t.index_b);
  }
}

SyntheticSpec SyntheticSpec::defaults() {
  SyntheticSpec s;
  s.linear_terms = {{'a', 0, 1.0},  {'a', 1, 0.8}, {'a', 2, -0.6},
                    {'p', 0, 0.9},  {'p', 1, -0.7}, {'s', 0, 1.0},
                    {'s', 1, 0.8},  {'s', 2, -0.5}};
  s.product_terms = {{'a', 0, 'p', 0, 0.9},
                     {'a', 1, 'p', 1, -0.7},
                     {'a', 0, 's', 0, 0.6}};
  return s;
}

nlohmann::json SyntheticSpec::to_json() const {
  nlohmann::json lin = nlohmann::json::array();
  for (const auto& t : linear_terms) {
    lin.push_back({std::string(1, t.stream), t.index, t.weight});
  }
  nlohmann::json prod = nlohmann::json::array();
  for (const auto& t : product_terms) {
    prod.push_back({std::string(1, t.stream_a), t.index_a,
                    std::string(1, t.stream_b), t.index_b, t.weight});
  }
  return {{"n_train", n_train},
          {"n_val", n_val},
          {"n_test", n_test},
          {"class_balance", class_balance},
          {"noise_scale", noise_scale},
          {"seed", seed},
          {"ood", {{"mean_sigmas", ood.mean_sigmas}, {"scale_mult", ood.scale_mult}}},
          {"streams", streams.to_json()},
          {"linear_terms", lin},
          {"product_terms", prod}};
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  return generate(spec, spec.n_train + spec.n_val + spec.n_test,
                  /*ood=*/false, "features", "labels");
}

SyntheticData generate_ood(const SyntheticSpec& spec, int n) {
  if (n <= 0) throw ConfigError("ood set size must be positive");
  return generate(spec, n, /*ood=*/true, "ood-features", "ood-labels");
}

double bayes_accuracy(const std::vector<double>& oracle) {
  if (oracle.empty()) throw DataError("bayes_accuracy: empty oracle");
  double s = 0.0;
  for (double p : oracle) s += std::max(p, 1.0 - p);
  return s / static_cast<double>(oracle.size());
}

void write_oracle(const std::string& path, const Dataset& dataset,
                  const std::vector<double>& oracle) {
  if (dataset.records.size() != oracle.size()) {
    throw DataError("oracle length does not match dataset");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "id,oracle_p\n";
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    out << dataset.records[i].id << ',' << fmt_double(oracle[i]) << "\n";
  }
}

std::vector<double> load_oracle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || std::string(trim(line)) != "id,oracle_p") {
    throw ParseError(path + ": bad oracle header");
  }
  std::vector<double> out;
  while (std::getline(in, line)) {
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    auto fields = split_csv(sv);
    if (fields.size() != 2) throw ParseError(path + ": bad oracle row");
    out.push_back(parse_double(fields[1]));
  }
  return out;
}

}  // namespace intentfuse
