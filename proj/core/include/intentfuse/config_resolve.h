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

#ifndef INTENTFUSE_CONFIG_RESOLVE_H_
#define INTENTFUSE_CONFIG_RESOLVE_H_

#include <string>

#include <json.hpp>

#include "intentfuse/config_file.h"
#include "intentfuse/data.h"
#include "intentfuse/model.h"
#include "intentfuse/objective.h"
#include "intentfuse/synthetic.h"
#include "intentfuse/trainer.h"

namespace intentfuse {

// Every knob of a run with defaults made explicit. to_json() is the
// manifest's "resolved configuration" stanza: no silent defaults.
struct ResolvedConfig {
  ModelConfig model;
  StreamConfig streams;
  LossWeights loss;
  TrainConfig train;
  SyntheticSpec synthetic;

  std::string run_name = "run";
  std::string out_dir = "runs";
  std::string data_dir = "data";
  DataFormat data_format = DataFormat::kCsv;

  void validate() const;
  nlohmann::json to_json() const;
};

// Applies a parsed config file over the defaults. Unknown sections or
// keys raise ConfigError naming the offender, so typos never silently
// fall back. Recognised sections: [model], [streams], [loss], [train],
// [synthetic], [run].
ResolvedConfig resolve_config(const ConfigFile& file);

// "a0*p1, s2*s3" -> pairs; "none" -> empty list.
std::vector<InteractionPair> parse_interaction_pairs(const std::string& text);

}  // namespace intentfuse

#endif  // INTENTFUSE_CONFIG_RESOLVE_H_
