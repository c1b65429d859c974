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

#ifndef INTENTFUSE_TOOLS_SVG_EXPORT_H_
#define INTENTFUSE_TOOLS_SVG_EXPORT_H_

#include <string>
#include <vector>

#include "intentfuse/tensor.h"

namespace intentfuse {
namespace cli {

std::string xml_escape(const std::string& s);

// Header of token names, then one row of shortest-round-trip values per
// query token, then a trailing "# caption: ..." comment carrying the
// uncertainty scores.
std::string attention_csv(const std::vector<std::string>& tokens,
                          const Tensor& matrix, double kl_score,
                          double mahalanobis);

// Standalone color-mapped grid with axis labels and in-cell values;
// kl/Mahalanobis go into <desc> and a caption line under the grid.
std::string attention_svg(const std::string& sample_id,
                          const std::vector<std::string>& tokens,
                          const Tensor& matrix, double kl_score,
                          double mahalanobis);

}  // namespace cli
}  // namespace intentfuse

#endif  // INTENTFUSE_TOOLS_SVG_EXPORT_H_
