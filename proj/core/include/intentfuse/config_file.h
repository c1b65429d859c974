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

#ifndef INTENTFUSE_CONFIG_FILE_H_
#define INTENTFUSE_CONFIG_FILE_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace intentfuse {

// Sectioned key-value configuration:
//
//   # comment (also ';'); values are raw text, no quoting
//   [train]
//   epochs = 220
//
// Keys must appear under a section header; a repeated key overwrites the
// earlier value. Section and key names are case-sensitive.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text);
  static ConfigFile load(const std::string& path);

  // One "--set section.key=value" override; highest precedence.
  void set(const std::string& dotted_assignment);
  void set(const std::string& section, const std::string& key,
           const std::string& value);

  bool has(const std::string& section, const std::string& key) const;
  // nullptr when absent.
  const std::string* find(const std::string& section,
                          const std::string& key) const;

  // Typed getters fall back to the given default when the key is absent
  // and throw ConfigError when the value does not parse.
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  long get_int(const std::string& section, const std::string& key,
               long fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  std::vector<std::uint64_t> get_u64_list(const std::string& section,
                                          const std::string& key,
                                          std::vector<std::uint64_t>
                                              fallback) const;

  std::vector<std::string> sections() const;
  std::vector<std::string> keys(const std::string& section) const;

  // Raw section -> key -> string map, for manifests and diffs.
  nlohmann::json to_json() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace intentfuse

#endif  // INTENTFUSE_CONFIG_FILE_H_
