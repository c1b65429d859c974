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

#ifndef INTENTFUSE_TOOLS_CLI_H_
#define INTENTFUSE_TOOLS_CLI_H_

#include <cstdint>
#include <string>
#include <vector>

#include "intentfuse/config_resolve.h"

namespace intentfuse {
namespace cli {

// Exit code contract shared by every subcommand.
inline constexpr int kExitOk = 0;       // success
inline constexpr int kExitFailure = 1;  // assertion / tolerance failure
inline constexpr int kExitUsage = 2;    // usage or input error

// Flags accepted by every subcommand. `out` overrides the command's
// output directory; `seed` overrides both synthetic.seed and the
// training seed list (collapsed to that single seed).
struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> sets;  // repeated --set section.key=value
  bool seed_given = false;
  std::uint64_t seed = 0;
  std::string out;
};

// Config file + --set overrides + --seed, resolved with every default
// made explicit. Precedence: CLI > file > defaults.
ResolvedConfig resolve_options(const GlobalOptions& g);

struct GenDataOptions {
  bool ood = false;
  int ood_n = 0;  // 0 => synthetic.n_test
};

struct TrainOptions {
  std::string ablate;  // streams to drop, e.g. "s" or "si"
};

struct EvalOptions {
  std::string checkpoint;
  std::string data_dir;  // empty => run.data_dir
  std::string split = "test";
};

struct CalibrateOptions {
  std::string checkpoint;
  std::string data_dir;
  std::string split = "val";
};

struct RiskCoverageOptions {
  std::string checkpoint;
  std::string data_dir;
  std::string split = "test";
  std::string risk = "mahalanobis_cc";  // kl | mahalanobis | mahalanobis_cc
  std::string coverages = "1.0,0.9,0.8";
  bool oracle_risk = false;  // debug: 0/1 correctness as the risk
};

struct AttentionExportOptions {
  std::string checkpoint;
  std::string data_dir;
  std::string split = "test";
  std::vector<std::string> ids;  // empty => first `first` records
  int first = 4;
  std::string format = "svg";  // csv | svg
};

struct GradcheckOptions {
  double tolerance = 1e-4;
  double fd_step = 1e-5;
  int batch = 6;
  std::string flip;  // debug: sign-flip this op's backward rule
};

int cmd_gen_data(const GlobalOptions& g, const GenDataOptions& o);
int cmd_train(const GlobalOptions& g, const TrainOptions& o);
int cmd_eval(const GlobalOptions& g, const EvalOptions& o);
int cmd_calibrate(const GlobalOptions& g, const CalibrateOptions& o);
int cmd_risk_coverage(const GlobalOptions& g, const RiskCoverageOptions& o);
int cmd_attention_export(const GlobalOptions& g,
                         const AttentionExportOptions& o);
int cmd_gradcheck(const GlobalOptions& g, const GradcheckOptions& o);

// Full entry point: parses argv, dispatches, and maps exceptions onto
// the exit-code contract. main() is a one-line wrapper around this.
int run_cli(int argc, const char* const* argv);

}  // namespace cli
}  // namespace intentfuse

#endif  // INTENTFUSE_TOOLS_CLI_H_
