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

#ifndef INTENTFUSE_NUMFMT_H_
#define INTENTFUSE_NUMFMT_H_

#include <string>
#include <string_view>
#include <vector>

namespace intentfuse {

// Shortest decimal representation that round-trips to the same double.
// Used for every numeric value written to CSV so that repeated runs
// produce byte-identical artifacts.
std::string fmt_double(double v);

// Fixed-precision formatting for human-facing tables.
std::string fmt_fixed(double v, int precision);

// Strict double parser. Rejects trailing garbage, empty fields and
// (by default) non-finite values.
double parse_double(std::string_view s, bool allow_nonfinite = false);

long parse_long(std::string_view s);

// Splits one CSV line on commas. No quoting: the formats written and read
// here never emit quoted fields.
std::vector<std::string> split_csv(std::string_view line);

std::string_view trim(std::string_view s);

}  // namespace intentfuse

#endif  // INTENTFUSE_NUMFMT_H_
