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

#ifndef INTENTFUSE_DATA_H_
#define INTENTFUSE_DATA_H_

#include <string>
#include <vector>

#include <json.hpp>

#include "intentfuse/rng.h"
#include "intentfuse/tensor.h"

namespace intentfuse {

enum class Split { kTrain, kVal, kTest };

Split split_from_string(const std::string& s);
std::string split_to_string(Split s);

// One multiplicative cross term between two scaled input features.
struct InteractionPair {
  char left_stream;  // 'a', 'p' or 's'
  int left_index;
  char right_stream;
  int right_index;
};

// Widths of the three observed streams plus the derived interaction
// stream. A text embedding block, when configured, is appended to the
// situational stream and treated like any other situational feature.
struct StreamConfig {
  int d_a = 8;
  int d_p = 6;
  int d_s = 10;
  int text_embedding_dim = 0;
  std::vector<InteractionPair> interaction_pairs;

  int d_i() const { return static_cast<int>(interaction_pairs.size()); }
  int dim(char stream) const;  // 'a' | 'p' | 's' (incl. text block) | 'i'
  void validate() const;

  // All left x right feature products between two streams.
  static std::vector<InteractionPair> cross(char left, int left_dim,
                                            char right, int right_dim);
  static StreamConfig defaults();

  nlohmann::json to_json() const;
  static StreamConfig from_json(const nlohmann::json& j);
};

struct FeatureRecord {
  std::string id;
  std::string video_id;
  std::string track_id;
  Split split = Split::kTrain;
  int label = 0;
  std::vector<double> x_a;
  std::vector<double> x_p;
  std::vector<double> x_s;
};

struct Dataset {
  StreamConfig config;
  std::vector<FeatureRecord> records;

  std::vector<std::size_t> split_indices(Split s) const;
};

// Median / IQR scaling fitted on the training split only. The stored IQR
// is the raw quantile difference; the divisor applied at transform time
// is max(iqr, floor).
class RobustScaler {
 public:
  static constexpr double kDefaultIqrFloor = 1e-6;

  void fit(const Dataset& dataset, double iqr_floor = kDefaultIqrFloor);

  std::vector<double> transform(const std::vector<double>& x,
                                char stream) const;

  bool fitted() const { return fitted_; }
  double iqr_floor() const { return iqr_floor_; }
  const std::vector<double>& medians(char stream) const;
  const std::vector<double>& iqrs(char stream) const;

  nlohmann::json to_json() const;
  static RobustScaler from_json(const nlohmann::json& j);

 private:
  bool fitted_ = false;
  double iqr_floor_ = kDefaultIqrFloor;
  std::vector<double> med_a_, med_p_, med_s_;
  std::vector<double> iqr_a_, iqr_p_, iqr_s_;
};

// Lower median / upper linear-interpolation quantile helpers shared with
// the scaler; q in [0,1] over a copy of the values (type-7 interpolation).
double quantile(std::vector<double> values, double q);

// Products of already-scaled features per configured pair, in pair order.
std::vector<double> build_interactions(const std::vector<double>& xa,
                                       const std::vector<double>& xp,
                                       const std::vector<double>& xs,
                                       const StreamConfig& config);

// One model-ready mini-batch. Labels are doubles because MixUp produces
// fractional targets.
struct Batch {
  Tensor x_a, x_p, x_s, x_i;
  std::vector<double> y;
  std::vector<std::string> ids;
  std::size_t size() const { return y.size(); }
};

// A whole split scaled once: feature matrices plus aligned labels/ids.
struct ScaledSplit {
  Tensor x_a, x_p, x_s, x_i;
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return labels.size(); }
  Batch gather(const std::vector<std::size_t>& rows) const;
  Batch range(std::size_t begin, std::size_t end) const;
};

ScaledSplit scale_split(const Dataset& dataset, Split split,
                        const RobustScaler& scaler);

// Inverse-class-frequency sampling with replacement: both classes appear
// with equal expected frequency regardless of the raw imbalance.
class WeightedSampler {
 public:
  explicit WeightedSampler(const std::vector<int>& labels);
  std::size_t draw(RngStream& rng) const;
  std::vector<std::size_t> draw_batch(std::size_t n, RngStream& rng) const;
  double positive_fraction_weighted() const;

 private:
  std::vector<std::size_t> class_members_[2];
};

enum class DataFormat { kCsv, kJsonl };

DataFormat data_format_from_string(const std::string& s);
std::string data_format_to_string(DataFormat f);

Dataset load_dataset(const std::string& path, DataFormat format,
                     const StreamConfig& config);
void save_dataset(const std::string& path, DataFormat format,
                  const Dataset& dataset);

// FNV-1a over raw file bytes, hex-encoded; recorded in run manifests.
std::string fingerprint_file(const std::string& path);

}  // namespace intentfuse

#endif  // INTENTFUSE_DATA_H_
