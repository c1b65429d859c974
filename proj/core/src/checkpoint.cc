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

#include "intentfuse/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "intentfuse/error.h"

namespace intentfuse {

namespace {

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
  return v;
}

}  // namespace

void write_blob_file(
    const std::string& path, const char magic[8], const nlohmann::json& base,
    const std::vector<std::pair<std::string, const Tensor*>>& arrays) {
  nlohmann::json manifest = base;
  manifest["arrays"] = nlohmann::json::array();
  for (const auto& [name, t] : arrays) {
    manifest["arrays"].push_back({{"name", name},
                                  {"rows", t->rows()},
                                  {"cols", t->cols()}});
  }
  const std::string mjson = manifest.dump();
  if (mjson.size() > 0xffffffffull) {
    throw CheckpointError("manifest too large");
  }

  std::string out;
  out.append(magic, 8);
  put_u32_le(out, std::uint32_t(mjson.size()));
  out.append(mjson);
  for (const auto& [name, t] : arrays) {
    (void)name;
    for (std::size_t i = 0; i < t->size(); ++i) {
      put_u64_le(out, std::bit_cast<std::uint64_t>(t->data()[i]));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open '" + path + "' for writing");
  f.write(out.data(), std::streamsize(out.size()));
  f.flush();
  if (!f) throw CheckpointError("failed writing '" + path + "'");
}

BlobFile read_blob_file(const std::string& path, const char magic[8]) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 12) throw CheckpointError("file too short: " + path);
  if (std::memcmp(bytes.data(), magic, 8) != 0) {
    throw CheckpointError("bad magic in '" + path + "'");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t mlen = get_u32_le(raw + 8);
  if (12ull + mlen > bytes.size()) {
    throw CheckpointError("truncated manifest in '" + path + "'");
  }
  BlobFile out;
  try {
    out.manifest = nlohmann::json::parse(bytes.substr(12, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt manifest in '" + path + "': " + e.what());
  }

  std::size_t offset = 12 + mlen;
  try {
    for (const auto& desc : out.manifest.at("arrays")) {
      const std::string name = desc.at("name").get<std::string>();
      const std::size_t rows = desc.at("rows").get<std::size_t>();
      const std::size_t cols = desc.at("cols").get<std::size_t>();
      const std::size_t count = rows * cols;
      if (offset + 8 * count > bytes.size()) {
        throw CheckpointError("truncated array '" + name + "' in '" + path +
                              "'");
      }
      Tensor t = Tensor::zeros(rows, cols);
      for (std::size_t i = 0; i < count; ++i) {
        t.data()[i] =
            std::bit_cast<double>(get_u64_le(raw + offset + 8 * i));
      }
      offset += 8 * count;
      out.arrays.emplace_back(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt array table in '" + path + "': " +
                          e.what());
  }
  if (offset != bytes.size()) {
    throw CheckpointError("trailing bytes in '" + path + "'");
  }
  return out;
}

double Checkpoint::inference_tau() const {
  return has_tau_posthoc ? tau_posthoc : tau_learned;
}

Checkpoint Checkpoint::from_model(const Model& model) {
  Checkpoint c;
  c.model_config = model.config();
  c.stream_config = model.streams();
  c.tau_learned = model.temperature();
  for (const Param& p : model.params().entries()) {
    c.params.emplace_back(p.name, p.value);
  }
  return c;
}

void Checkpoint::apply_to(Model& model) const {
  const std::deque<Param>& entries = model.params().entries();
  if (entries.size() != params.size()) {
    throw CheckpointError(
        "parameter count mismatch: model has " +
        std::to_string(entries.size()) + ", checkpoint has " +
        std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, value] = params[i];
    Param& dst = model.params().entries()[i];
    if (dst.name != name) {
      throw CheckpointError("parameter order mismatch at index " +
                            std::to_string(i) + ": model '" + dst.name +
                            "' vs checkpoint '" + name + "'");
    }
    if (!dst.value.same_shape(value)) {
      throw CheckpointError("shape mismatch for '" + name + "': model " +
                            dst.value.shape_str() + " vs checkpoint " +
                            value.shape_str());
    }
    dst.value = value;
  }
}

Model Checkpoint::restore() const {
  Model m(model_config, stream_config);
  apply_to(m);
  return m;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["model_config"] = ckpt.model_config.to_json();
  manifest["stream_config"] = ckpt.stream_config.to_json();
  manifest["scaler"] =
      ckpt.scaler.fitted() ? ckpt.scaler.to_json() : nlohmann::json();
  manifest["threshold"] = ckpt.threshold;
  manifest["tau_learned"] = ckpt.tau_learned;
  manifest["tau_posthoc"] =
      ckpt.has_tau_posthoc ? nlohmann::json(ckpt.tau_posthoc)
                           : nlohmann::json();
  manifest["detector_global"] = ckpt.has_detector_global
                                    ? ckpt.detector_global.to_json()
                                    : nlohmann::json();
  manifest["detector_cc"] =
      ckpt.has_detector_cc ? ckpt.detector_cc.to_json() : nlohmann::json();
  manifest["extra"] = ckpt.extra;

  std::vector<std::pair<std::string, const Tensor*>> arrays;
  arrays.reserve(ckpt.params.size());
  for (const auto& [name, t] : ckpt.params) arrays.emplace_back(name, &t);
  write_blob_file(path, kCheckpointMagic, manifest, arrays);
}

Checkpoint load_checkpoint(const std::string& path) {
  BlobFile blob = read_blob_file(path, kCheckpointMagic);
  Checkpoint c;
  try {
    const nlohmann::json& m = blob.manifest;
    if (m.at("format_version").get<int>() != 1) {
      throw CheckpointError("unsupported checkpoint version in '" + path +
                            "'");
    }
    c.model_config = ModelConfig::from_json(m.at("model_config"));
    c.stream_config = StreamConfig::from_json(m.at("stream_config"));
    if (!m.at("scaler").is_null()) {
      c.scaler = RobustScaler::from_json(m.at("scaler"));
    }
    c.threshold = m.at("threshold").get<double>();
    c.tau_learned = m.at("tau_learned").get<double>();
    if (!m.at("tau_posthoc").is_null()) {
      c.has_tau_posthoc = true;
      c.tau_posthoc = m.at("tau_posthoc").get<double>();
    }
    if (!m.at("detector_global").is_null()) {
      c.has_detector_global = true;
      c.detector_global =
          MahalanobisDetector::from_json(m.at("detector_global"));
    }
    if (!m.at("detector_cc").is_null()) {
      c.has_detector_cc = true;
      c.detector_cc = MahalanobisDetector::from_json(m.at("detector_cc"));
    }
    c.extra = m.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt checkpoint manifest in '" + path +
                          "': " + e.what());
  }
  c.params = std::move(blob.arrays);
  return c;
}

}  // namespace intentfuse
