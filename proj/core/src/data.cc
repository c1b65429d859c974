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

#include "intentfuse/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "intentfuse/error.h"
#include "intentfuse/numfmt.h"

namespace intentfuse {

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split: '" + s + "'");
}

std::string split_to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  throw DataError("invalid split enum");
}

// ---- StreamConfig -----------------------------------------------------------

int StreamConfig::dim(char stream) const {
  switch (stream) {
    case 'a': return d_a;
    case 'p': return d_p;
    case 's': return d_s + text_embedding_dim;
    case 'i': return d_i();
  }
  throw ConfigError(std::string("unknown stream '") + stream + "'");
}

void StreamConfig::validate() const {
  if (d_a <= 0 || d_p <= 0 || d_s <= 0) {
    throw ConfigError("stream dims must be positive");
  }
  if (text_embedding_dim < 0) {
    throw ConfigError("text_embedding_dim must be >= 0");
  }
  for (const InteractionPair& p : interaction_pairs) {
    for (auto [st, ix] : {std::pair<char, int>{p.left_stream, p.left_index},
                          {p.right_stream, p.right_index}}) {
      if (st != 'a' && st != 'p' && st != 's') {
        throw ConfigError(std::string("interaction pair references stream '") +
                          st + "'; only a/p/s are allowed");
      }
      if (ix < 0 || ix >= dim(st)) {
        throw ConfigError("interaction index " + std::to_string(ix) +
                          " out of range for stream " + std::string(1, st));
      }
    }
  }
}

std::vector<InteractionPair> StreamConfig::cross(char left, int left_dim,
                                                 char right, int right_dim) {
  std::vector<InteractionPair> out;
  out.reserve(static_cast<std::size_t>(left_dim) * right_dim);
  for (int i = 0; i < left_dim; ++i) {
    for (int j = 0; j < right_dim; ++j) {
      out.push_back({left, i, right, j});
    }
  }
  return out;
}

StreamConfig StreamConfig::defaults() {
  StreamConfig c;
  c.interaction_pairs = cross('a', c.d_a, 'p', c.d_p);
  return c;
}

nlohmann::json StreamConfig::to_json() const {
  nlohmann::json pairs = nlohmann::json::array();
  for (const InteractionPair& p : interaction_pairs) {
    pairs.push_back({std::string(1, p.left_stream), p.left_index,
                     std::string(1, p.right_stream), p.right_index});
  }
  return {{"d_a", d_a},
          {"d_p", d_p},
          {"d_s", d_s},
          {"text_embedding_dim", text_embedding_dim},
          {"interaction_pairs", pairs}};
}

StreamConfig StreamConfig::from_json(const nlohmann::json& j) {
  StreamConfig c;
  c.d_a = j.at("d_a").get<int>();
  c.d_p = j.at("d_p").get<int>();
  c.d_s = j.at("d_s").get<int>();
  c.text_embedding_dim = j.at("text_embedding_dim").get<int>();
  c.interaction_pairs.clear();
  for (const auto& e : j.at("interaction_pairs")) {
    c.interaction_pairs.push_back({e.at(0).get<std::string>().at(0),
                                   e.at(1).get<int>(),
                                   e.at(2).get<std::string>().at(0),
                                   e.at(3).get<int>()});
  }
  c.validate();
  return c;
}

std::vector<std::size_t> Dataset::split_indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == s) out.push_back(i);
  }
  return out;
}

// ---- quantiles and scaling -----------------------------------------------------

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of empty vector");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
  const double frac = h - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

namespace {

void fit_stream(const Dataset& ds, const std::vector<std::size_t>& rows,
                char stream, std::vector<double>& med,
                std::vector<double>& iqr) {
  const int d = ds.config.dim(stream);
  med.assign(static_cast<std::size_t>(d), 0.0);
  iqr.assign(static_cast<std::size_t>(d), 0.0);
  std::vector<double> col(rows.size());
  for (int j = 0; j < d; ++j) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const FeatureRecord& rec = ds.records[rows[r]];
      const std::vector<double>& x =
          stream == 'a' ? rec.x_a : (stream == 'p' ? rec.x_p : rec.x_s);
      col[r] = x[static_cast<std::size_t>(j)];
    }
    med[static_cast<std::size_t>(j)] = quantile(col, 0.5);
    iqr[static_cast<std::size_t>(j)] = quantile(col, 0.75) - quantile(col, 0.25);
  }
}

}  // namespace

void RobustScaler::fit(const Dataset& dataset, double iqr_floor) {
  if (iqr_floor <= 0.0) throw ConfigError("iqr_floor must be positive");
  auto rows = dataset.split_indices(Split::kTrain);
  if (rows.empty()) throw DataError("robust scaler: empty training split");
  fit_stream(dataset, rows, 'a', med_a_, iqr_a_);
  fit_stream(dataset, rows, 'p', med_p_, iqr_p_);
  fit_stream(dataset, rows, 's', med_s_, iqr_s_);
  iqr_floor_ = iqr_floor;
  fitted_ = true;
}

const std::vector<double>& RobustScaler::medians(char stream) const {
  switch (stream) {
    case 'a': return med_a_;
    case 'p': return med_p_;
    case 's': return med_s_;
  }
  throw ConfigError("medians: unknown stream");
}

const std::vector<double>& RobustScaler::iqrs(char stream) const {
  switch (stream) {
    case 'a': return iqr_a_;
    case 'p': return iqr_p_;
    case 's': return iqr_s_;
  }
  throw ConfigError("iqrs: unknown stream");
}

std::vector<double> RobustScaler::transform(const std::vector<double>& x,
                                            char stream) const {
  if (!fitted_) throw DataError("robust scaler used before fit");
  const std::vector<double>& med = medians(stream);
  const std::vector<double>& iqr = iqrs(stream);
  if (x.size() != med.size()) {
    throw DataError("scaler: feature width mismatch on stream " +
                    std::string(1, stream));
  }
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = (x[j] - med[j]) / std::max(iqr[j], iqr_floor_);
  }
  return out;
}

nlohmann::json RobustScaler::to_json() const {
  return {{"iqr_floor", iqr_floor_}, {"median_a", med_a_},
          {"median_p", med_p_},      {"median_s", med_s_},
          {"iqr_a", iqr_a_},         {"iqr_p", iqr_p_},
          {"iqr_s", iqr_s_}};
}

RobustScaler RobustScaler::from_json(const nlohmann::json& j) {
  RobustScaler s;
  s.iqr_floor_ = j.at("iqr_floor").get<double>();
  s.med_a_ = j.at("median_a").get<std::vector<double>>();
  s.med_p_ = j.at("median_p").get<std::vector<double>>();
  s.med_s_ = j.at("median_s").get<std::vector<double>>();
  s.iqr_a_ = j.at("iqr_a").get<std::vector<double>>();
  s.iqr_p_ = j.at("iqr_p").get<std::vector<double>>();
  s.iqr_s_ = j.at("iqr_s").get<std::vector<double>>();
  s.fitted_ = true;
  return s;
}

std::vector<double> build_interactions(const std::vector<double>& xa,
                                       const std::vector<double>& xp,
                                       const std::vector<double>& xs,
                                       const StreamConfig& config) {
  auto pick = [&](char stream, int index) -> double {
    const std::vector<double>& v =
        stream == 'a' ? xa : (stream == 'p' ? xp : xs);
    return v[static_cast<std::size_t>(index)];
  };
  std::vector<double> out;
  out.reserve(config.interaction_pairs.size());
  for (const InteractionPair& p : config.interaction_pairs) {
    out.push_back(pick(p.left_stream, p.left_index) *
                  pick(p.right_stream, p.right_index));
  }
  return out;
}

// ---- scaled splits and batching ---------------------------------------------------

namespace {

Tensor gather_rows(const Tensor& src, const std::vector<std::size_t>& rows) {
  Tensor out = Tensor::zeros(rows.size(), src.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < src.cols(); ++c) {
      out.at(r, c) = src.at(rows[r], c);
    }
  }
  return out;
}

}  // namespace

Batch ScaledSplit::gather(const std::vector<std::size_t>& rows) const {
  if (rows.empty()) throw DataError("gather: empty batch");
  Batch b;
  b.x_a = gather_rows(x_a, rows);
  b.x_p = gather_rows(x_p, rows);
  b.x_s = gather_rows(x_s, rows);
  b.x_i = gather_rows(x_i, rows);
  b.y.reserve(rows.size());
  b.ids.reserve(rows.size());
  for (std::size_t r : rows) {
    b.y.push_back(static_cast<double>(labels[r]));
    b.ids.push_back(ids[r]);
  }
  return b;
}

Batch ScaledSplit::range(std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> rows;
  rows.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) rows.push_back(i);
  return gather(rows);
}

ScaledSplit scale_split(const Dataset& dataset, Split split,
                        const RobustScaler& scaler) {
  auto rows = dataset.split_indices(split);
  if (rows.empty()) {
    throw DataError("scale_split: no records in split " +
                    split_to_string(split));
  }
  const StreamConfig& cfg = dataset.config;
  ScaledSplit out;
  out.x_a = Tensor::zeros(rows.size(), static_cast<std::size_t>(cfg.dim('a')));
  out.x_p = Tensor::zeros(rows.size(), static_cast<std::size_t>(cfg.dim('p')));
  out.x_s = Tensor::zeros(rows.size(), static_cast<std::size_t>(cfg.dim('s')));
  const std::size_t di = std::max<std::size_t>(1, cfg.interaction_pairs.size());
  out.x_i = Tensor::zeros(rows.size(), di);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const FeatureRecord& rec = dataset.records[rows[r]];
    auto sa = scaler.transform(rec.x_a, 'a');
    auto sp = scaler.transform(rec.x_p, 'p');
    auto ss = scaler.transform(rec.x_s, 's');
    auto si = build_interactions(sa, sp, ss, cfg);
    for (std::size_t j = 0; j < sa.size(); ++j) out.x_a.at(r, j) = sa[j];
    for (std::size_t j = 0; j < sp.size(); ++j) out.x_p.at(r, j) = sp[j];
    for (std::size_t j = 0; j < ss.size(); ++j) out.x_s.at(r, j) = ss[j];
    for (std::size_t j = 0; j < si.size(); ++j) out.x_i.at(r, j) = si[j];
    out.labels.push_back(rec.label);
    out.ids.push_back(rec.id);
  }
  return out;
}

// ---- weighted sampling ---------------------------------------------------------------

WeightedSampler::WeightedSampler(const std::vector<int>& labels) {
  if (labels.empty()) throw DataError("weighted sampler: no labels");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    class_members_[labels[i] == 1 ? 1 : 0].push_back(i);
  }
}

double WeightedSampler::positive_fraction_weighted() const {
  const bool has0 = !class_members_[0].empty();
  const bool has1 = !class_members_[1].empty();
  if (has0 && has1) return 0.5;
  return has1 ? 1.0 : 0.0;
}

std::size_t WeightedSampler::draw(RngStream& rng) const {
  // With weights 1/n_c every class carries equal total mass, so drawing
  // reduces to: fair class coin, then a uniform member of that class.
  const bool has0 = !class_members_[0].empty();
  const bool has1 = !class_members_[1].empty();
  int cls;
  if (has0 && has1) {
    cls = rng.bernoulli(0.5) ? 1 : 0;
  } else {
    cls = has1 ? 1 : 0;
  }
  const auto& members = class_members_[cls];
  return members[rng.index_below(members.size())];
}

std::vector<std::size_t> WeightedSampler::draw_batch(std::size_t n,
                                                     RngStream& rng) const {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = draw(rng);
  return out;
}

// ---- serialisation ---------------------------------------------------------------------

DataFormat data_format_from_string(const std::string& s) {
  if (s == "csv") return DataFormat::kCsv;
  if (s == "jsonl") return DataFormat::kJsonl;
  throw ConfigError("unknown data format: '" + s + "'");
}

std::string data_format_to_string(DataFormat f) {
  return f == DataFormat::kCsv ? "csv" : "jsonl";
}

namespace {

std::string expected_csv_header(const StreamConfig& cfg) {
  std::string h = "id,video_id,track_id,split,label";
  for (int j = 0; j < cfg.dim('a'); ++j) h += ",a_" + std::to_string(j);
  for (int j = 0; j < cfg.dim('p'); ++j) h += ",p_" + std::to_string(j);
  for (int j = 0; j < cfg.dim('s'); ++j) h += ",s_" + std::to_string(j);
  return h;
}

int parse_label(std::string_view field, const std::string& where) {
  long v = parse_long(field);
  if (v != 0 && v != 1) {
    throw DataError(where + ": label must be 0 or 1, got " +
                    std::to_string(v));
  }
  return static_cast<int>(v);
}

void check_unique_ids(const Dataset& ds, const std::string& path) {
  std::unordered_set<std::string> seen;
  for (const FeatureRecord& r : ds.records) {
    if (!seen.insert(r.id).second) {
      throw DataError(path + ": duplicate record id '" + r.id + "'");
    }
  }
}

Dataset load_csv(const std::string& path, const StreamConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  Dataset ds;
  ds.config = cfg;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (std::string(trim(line)) != expected_csv_header(cfg)) {
    throw ParseError(path + ": header does not match configured streams");
  }
  const std::size_t want =
      5 + static_cast<std::size_t>(cfg.dim('a') + cfg.dim('p') + cfg.dim('s'));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    auto fields = split_csv(sv);
    const std::string where = path + ":" + std::to_string(lineno);
    if (fields.size() != want) {
      throw ParseError(where + ": expected " + std::to_string(want) +
                       " fields, got " + std::to_string(fields.size()));
    }
    FeatureRecord rec;
    rec.id = fields[0];
    rec.video_id = fields[1];
    rec.track_id = fields[2];
    rec.split = split_from_string(fields[3]);
    rec.label = parse_label(fields[4], where);
    std::size_t k = 5;
    for (int j = 0; j < cfg.dim('a'); ++j) rec.x_a.push_back(parse_double(fields[k++]));
    for (int j = 0; j < cfg.dim('p'); ++j) rec.x_p.push_back(parse_double(fields[k++]));
    for (int j = 0; j < cfg.dim('s'); ++j) rec.x_s.push_back(parse_double(fields[k++]));
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.empty()) throw DataError(path + ": no records");
  check_unique_ids(ds, path);
  return ds;
}

Dataset load_jsonl(const std::string& path, const StreamConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  Dataset ds;
  ds.config = cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(sv);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    try {
      FeatureRecord rec;
      rec.id = j.at("id").get<std::string>();
      rec.video_id = j.at("video_id").get<std::string>();
      rec.track_id = j.at("track_id").get<std::string>();
      rec.split = split_from_string(j.at("split").get<std::string>());
      long lbl = j.at("label").get<long>();
      if (lbl != 0 && lbl != 1) throw DataError(where + ": label must be 0 or 1");
      rec.label = static_cast<int>(lbl);
      rec.x_a = j.at("x_a").get<std::vector<double>>();
      rec.x_p = j.at("x_p").get<std::vector<double>>();
      rec.x_s = j.at("x_s").get<std::vector<double>>();
      for (auto [v, st] : {std::pair<const std::vector<double>*, char>{&rec.x_a, 'a'},
                           {&rec.x_p, 'p'},
                           {&rec.x_s, 's'}}) {
        if (static_cast<int>(v->size()) != cfg.dim(st)) {
          throw DataError(where + ": stream " + std::string(1, st) +
                          " has width " + std::to_string(v->size()) +
                          ", expected " + std::to_string(cfg.dim(st)));
        }
        for (double x : *v) {
          if (!std::isfinite(x)) throw DataError(where + ": non-finite feature");
        }
      }
      ds.records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  if (ds.records.empty()) throw DataError(path + ": no records");
  check_unique_ids(ds, path);
  return ds;
}

}  // namespace

Dataset load_dataset(const std::string& path, DataFormat format,
                     const StreamConfig& config) {
  config.validate();
  return format == DataFormat::kCsv ? load_csv(path, config)
                                    : load_jsonl(path, config);
}

void save_dataset(const std::string& path, DataFormat format,
                  const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  const StreamConfig& cfg = dataset.config;
  if (format == DataFormat::kCsv) {
    out << expected_csv_header(cfg) << "\n";
    for (const FeatureRecord& r : dataset.records) {
      out << r.id << ',' << r.video_id << ',' << r.track_id << ','
          << split_to_string(r.split) << ',' << r.label;
      for (double v : r.x_a) out << ',' << fmt_double(v);
      for (double v : r.x_p) out << ',' << fmt_double(v);
      for (double v : r.x_s) out << ',' << fmt_double(v);
      out << "\n";
    }
  } else {
    for (const FeatureRecord& r : dataset.records) {
      nlohmann::json j = {{"id", r.id},
                          {"video_id", r.video_id},
                          {"track_id", r.track_id},
                          {"split", split_to_string(r.split)},
                          {"label", r.label},
                          {"x_a", r.x_a},
                          {"x_p", r.x_p},
                          {"x_s", r.x_s}};
      out << j.dump() << "\n";
    }
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

std::string fingerprint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for fingerprinting");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string bytes = ss.str();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string(buf);
}

}  // namespace intentfuse
