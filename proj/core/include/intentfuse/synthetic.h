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

#ifndef INTENTFUSE_SYNTHETIC_H_
#define INTENTFUSE_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "intentfuse/data.h"

namespace intentfuse {

// Mean/scale perturbation applied to features (never to labels) when
// generating out-of-distribution sets, expressed in per-feature sigmas.
struct OodShift {
  double mean_sigmas = 3.0;
  double scale_mult = 1.0;
};

// Fully specified generative process. The label's log-odds are a linear +
// multiplicative function of standardised latent feature draws, so the
// Bayes-optimal posterior of every record is available in closed form.
struct SyntheticSpec {
  int n_train = 2000;
  int n_val = 500;
  int n_test = 500;
  double class_balance = 0.4;   // target positive fraction
  double noise_scale = 0.4;     // label noise; 0 => deterministic labels
  std::uint64_t seed = 7;
  OodShift ood;
  StreamConfig streams = StreamConfig::defaults();

  struct Term {
    char stream;
    int index;
    double weight;
  };
  struct ProductTerm {
    char stream_a;
    int index_a;
    char stream_b;
    int index_b;
    double weight;
  };
  std::vector<Term> linear_terms;
  std::vector<ProductTerm> product_terms;

  void validate() const;
  static SyntheticSpec defaults();

  nlohmann::json to_json() const;
};

struct SyntheticData {
  Dataset dataset;
  // Bayes-optimal P(label=1 | features), aligned with dataset.records.
  std::vector<double> oracle;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Same latent process and label rule, but every feature is shifted by
// ood.mean_sigmas sigmas and scaled by ood.scale_mult after the label has
// been decided. Records carry split=test.
SyntheticData generate_ood(const SyntheticSpec& spec, int n);

double bayes_accuracy(const std::vector<double>& oracle);

void write_oracle(const std::string& path, const Dataset& dataset,
                  const std::vector<double>& oracle);
std::vector<double> load_oracle(const std::string& path);

}  // namespace intentfuse

#endif  // INTENTFUSE_SYNTHETIC_H_
