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

#include "intentfuse/config_file.h"

#include <fstream>
#include <sstream>

#include "intentfuse/error.h"
#include "intentfuse/numfmt.h"

namespace intentfuse {

namespace {

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("config line " + std::to_string(lineno) +
                         ": unterminated section header");
      const std::string_view name = trim(line.substr(1, line.size() - 2));
      if (!valid_name(name))
        throw ParseError("config line " + std::to_string(lineno) +
                         ": invalid section name");
      section = std::string(name);
      cfg.values_[section];  // a section may legitimately stay empty
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("config line " + std::to_string(lineno) +
                       ": expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!valid_name(key))
      throw ParseError("config line " + std::to_string(lineno) +
                       ": invalid key name");
    if (section.empty())
      throw ParseError("config line " + std::to_string(lineno) +
                       ": key '" + std::string(key) +
                       "' appears before any [section]");
    cfg.values_[section][std::string(key)] = std::string(value);
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void ConfigFile::set(const std::string& dotted_assignment) {
  const std::size_t eq = dotted_assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects section.key=value, got '" +
                      dotted_assignment + "'");
  const std::string dotted(trim(dotted_assignment.substr(0, eq)));
  const std::string value(trim(dotted_assignment.substr(eq + 1)));
  const std::size_t dot = dotted.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == dotted.size())
    throw ConfigError("--set expects section.key=value, got '" +
                      dotted_assignment + "'");
  set(dotted.substr(0, dot), dotted.substr(dot + 1), value);
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     const std::string& value) {
  if (!valid_name(section) || !valid_name(key))
    throw ConfigError("invalid override target '" + section + "." + key +
                      "'");
  values_[section][key] = value;
}

bool ConfigFile::has(const std::string& section,
                     const std::string& key) const {
  return find(section, key) != nullptr;
}

const std::string* ConfigFile::find(const std::string& section,
                                    const std::string& key) const {
  const auto sit = values_.find(section);
  if (sit == values_.end()) return nullptr;
  const auto kit = sit->second.find(key);
  if (kit == sit->second.end()) return nullptr;
  return &kit->second;
}

std::string ConfigFile::get_string(const std::string& section,
                                   const std::string& key,
                                   const std::string& fallback) const {
  const std::string* v = find(section, key);
  return v ? *v : fallback;
}

long ConfigFile::get_int(const std::string& section, const std::string& key,
                         long fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  try {
    return parse_long(*v);
  } catch (const ParseError&) {
    throw ConfigError("config value " + section + "." + key + " = '" + *v +
                      "' is not an integer");
  }
}

double ConfigFile::get_double(const std::string& section,
                              const std::string& key, double fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  try {
    return parse_double(*v);
  } catch (const ParseError&) {
    throw ConfigError("config value " + section + "." + key + " = '" + *v +
                      "' is not a number");
  }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("config value " + section + "." + key + " = '" + *v +
                    "' is not a boolean");
}

std::vector<std::uint64_t> ConfigFile::get_u64_list(
    const std::string& section, const std::string& key,
    std::vector<std::uint64_t> fallback) const {
  const std::string* v = find(section, key);
  if (!v) return fallback;
  std::vector<std::uint64_t> out;
  for (const std::string& field : split_csv(*v)) {
    const std::string_view t = trim(field);
    try {
      const long parsed = parse_long(t);
      if (parsed < 0) throw ParseError("negative");
      out.push_back(static_cast<std::uint64_t>(parsed));
    } catch (const ParseError&) {
      throw ConfigError("config value " + section + "." + key + " = '" + *v +
                        "' is not a list of non-negative integers");
    }
  }
  if (out.empty())
    throw ConfigError("config value " + section + "." + key + " is empty");
  return out;
}

std::vector<std::string> ConfigFile::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, keys] : values_) out.push_back(name);
  return out;
}

std::vector<std::string> ConfigFile::keys(const std::string& section) const {
  std::vector<std::string> out;
  const auto sit = values_.find(section);
  if (sit == values_.end()) return out;
  for (const auto& [key, value] : sit->second) out.push_back(key);
  return out;
}

nlohmann::json ConfigFile::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [section, keys] : values_) {
    nlohmann::json s = nlohmann::json::object();
    for (const auto& [key, value] : keys) s[key] = value;
    j[section] = s;
  }
  return j;
}

}  // namespace intentfuse
