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

#ifndef INTENTFUSE_CHECKPOINT_H_
#define INTENTFUSE_CHECKPOINT_H_

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "intentfuse/data.h"
#include "intentfuse/model.h"
#include "intentfuse/uncertainty.h"

namespace intentfuse {

// On-disk layout: 8-byte magic, little-endian u32 manifest length, JSON
// manifest, then one little-endian f64 array per parameter in manifest
// order (the ParamStore's canonical insertion order).
inline constexpr char kCheckpointMagic[] = "IFCKPT01";

struct Checkpoint {
  ModelConfig model_config;
  StreamConfig stream_config;
  RobustScaler scaler;  // may be unfitted for a bare model snapshot

  double threshold = 0.5;
  double tau_learned = 1.0;
  bool has_tau_posthoc = false;
  double tau_posthoc = 1.0;

  bool has_detector_global = false;
  MahalanobisDetector detector_global;
  bool has_detector_cc = false;
  MahalanobisDetector detector_cc;

  // Free-form provenance (resolved config, dataset fingerprint, seed).
  nlohmann::json extra = nlohmann::json::object();

  std::vector<std::pair<std::string, Tensor>> params;

  // Post-hoc temperature when fitted, else the learned one.
  double inference_tau() const;

  static Checkpoint from_model(const Model& model);
  // Copies parameters into a model of matching architecture; every name
  // and shape must agree.
  void apply_to(Model& model) const;
  // Convenience: construct the model and load the weights.
  Model restore() const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Shared low-level container: magic + JSON manifest + named f64 blobs.
// The trainer reuses it for optimizer state files.
void write_blob_file(const std::string& path, const char magic[8],
                     const nlohmann::json& manifest,
                     const std::vector<std::pair<std::string, const Tensor*>>&
                         arrays);
struct BlobFile {
  nlohmann::json manifest;
  std::vector<std::pair<std::string, Tensor>> arrays;
};
BlobFile read_blob_file(const std::string& path, const char magic[8]);

}  // namespace intentfuse

#endif  // INTENTFUSE_CHECKPOINT_H_
