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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "intentfuse/config_resolve.h"
#include "intentfuse/error.h"

using namespace intentfuse;

TEST_CASE("config parsing handles sections, comments and whitespace") {
  const std::string text =
      "# leading comment\n"
      "[model]\n"
      "d = 32\n"
      "  layers=3  \n"
      "; another comment style\n"
      "\n"
      "[train]\r\n"
      "peak_lr = 5e-4\r\n"
      "seeds = 1, 2, 3\n"
      "[empty-section]\n";
  const ConfigFile cfg = ConfigFile::parse(text);
  CHECK(cfg.get_int("model", "d", 0) == 32);
  CHECK(cfg.get_int("model", "layers", 0) == 3);
  CHECK(cfg.get_double("train", "peak_lr", 0.0) == 5e-4);
  CHECK(cfg.get_u64_list("train", "seeds", {}) ==
        std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.keys("empty-section").empty());
  CHECK(cfg.sections() ==
        std::vector<std::string>{"empty-section", "model", "train"});

  SUBCASE("repeated keys: last one wins") {
    const ConfigFile c2 = ConfigFile::parse("[a]\nx = 1\nx = 2\n");
    CHECK(c2.get_int("a", "x", 0) == 2);
  }
  SUBCASE("raw map export") {
    const nlohmann::json j = cfg.to_json();
    CHECK(j.at("model").at("d").get<std::string>() == "32");
    CHECK(j.at("train").at("seeds").get<std::string>() == "1, 2, 3");
  }
}

TEST_CASE("config parsing rejects malformed input") {
  CHECK_THROWS_AS(ConfigFile::parse("x = 1\n"), ParseError);
  CHECK_THROWS_AS(ConfigFile::parse("[model\nd = 1\n"), ParseError);
  CHECK_THROWS_AS(ConfigFile::parse("[model]\njust a line\n"), ParseError);
  CHECK_THROWS_AS(ConfigFile::parse("[mo del]\n"), ParseError);
  CHECK_THROWS_AS(ConfigFile::parse("[model]\nbad key! = 1\n"), ParseError);
  CHECK_THROWS_AS(ConfigFile::load("/nonexistent/intentfuse.ini"), DataError);
}

TEST_CASE("typed getters validate and fall back") {
  const ConfigFile cfg = ConfigFile::parse(
      "[t]\n"
      "i = 12\n"
      "f = 0.25\n"
      "b1 = yes\n"
      "b2 = off\n"
      "bad = zebra\n"
      "list = 4,5\n");
  CHECK(cfg.get_int("t", "i", -1) == 12);
  CHECK(cfg.get_int("t", "missing", -1) == -1);
  CHECK(cfg.get_double("t", "f", 0.0) == 0.25);
  CHECK(cfg.get_bool("t", "b1", false));
  CHECK_FALSE(cfg.get_bool("t", "b2", true));
  CHECK(cfg.get_bool("t", "missing", true));
  CHECK(cfg.get_string("t", "bad", "") == "zebra");
  CHECK(cfg.get_u64_list("t", "list", {9}) ==
        std::vector<std::uint64_t>{4, 5});
  CHECK(cfg.get_u64_list("t", "missing", {9}) ==
        std::vector<std::uint64_t>{9});

  CHECK_THROWS_AS(cfg.get_int("t", "bad", 0), ConfigError);
  CHECK_THROWS_AS(cfg.get_double("t", "bad", 0.0), ConfigError);
  CHECK_THROWS_AS(cfg.get_bool("t", "bad", false), ConfigError);
  CHECK_THROWS_AS(cfg.get_u64_list("t", "bad", {}), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("t", "f", 0), ConfigError);
}

TEST_CASE("set overrides take precedence over the file") {
  ConfigFile cfg = ConfigFile::parse("[train]\nepochs = 10\n");
  cfg.set("train.epochs=20");
  CHECK(cfg.get_int("train", "epochs", 0) == 20);
  cfg.set(" train.batch_size = 16 ");
  CHECK(cfg.get_int("train", "batch_size", 0) == 16);
  cfg.set("model.d=8");  // sections may be created by overrides
  CHECK(cfg.get_int("model", "d", 0) == 8);

  CHECK_THROWS_AS(cfg.set("no-equals"), ConfigError);
  CHECK_THROWS_AS(cfg.set("nodot=1"), ConfigError);
  CHECK_THROWS_AS(cfg.set(".key=1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("train.=1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("tr ain.epochs=1"), ConfigError);
}

TEST_CASE("an empty config resolves to the documented defaults") {
  const ResolvedConfig rc = resolve_config(ConfigFile::parse(""));
  CHECK(rc.model.d == 64);
  CHECK(rc.model.layers == 2);
  CHECK(rc.model.active_streams == "apsi");
  CHECK(rc.streams.d_a == 8);
  CHECK(rc.streams.d_p == 6);
  CHECK(rc.streams.d_i() == 48);  // full a x p cross
  CHECK(rc.loss.lambda_tau == 0.01);
  CHECK(rc.loss.mixup_alpha == 0.2);
  CHECK(rc.train.epochs == 220);
  CHECK(rc.train.warmup_epochs == 15);
  CHECK(rc.train.peak_lr == 1e-3);
  CHECK(rc.train.seeds == std::vector<std::uint64_t>{7});
  CHECK(rc.synthetic.n_train == 2000);
  CHECK(rc.synthetic.seed == 7);
  CHECK(rc.run_name == "run");
  CHECK(rc.data_format == DataFormat::kCsv);

  SUBCASE("manifest stanza spells out every effective value") {
    const nlohmann::json j = rc.to_json();
    CHECK(j.at("model").at("d").get<int>() == 64);
    CHECK(j.at("train").at("weight_decay").get<double>() == 0.01);
    CHECK(j.at("train").at("beta1").get<double>() == 0.9);
    CHECK(j.at("loss").at("label_smoothing").get<double>() == 0.1);
    CHECK(j.at("synthetic").at("noise_scale").get<double>() == 0.4);
    CHECK(j.at("run").at("data_format").get<std::string>() == "csv");
  }
}

TEST_CASE("a populated config lands in every typed field") {
  const std::string text =
      "[model]\n"
      "d = 32\n"
      "layers = 1\n"
      "heads = 2\n"
      "d_z = 8\n"
      "active_streams = aps\n"
      "[streams]\n"
      "d_a = 4\n"
      "d_p = 3\n"
      "interaction_pairs = a0*p1, a1*s2\n"
      "[loss]\n"
      "lambda_tau = 0.02\n"
      "mixup_alpha = 0\n"
      "[train]\n"
      "epochs = 30\n"
      "warmup_epochs = 5\n"
      "seeds = 1,2,3,4,5\n"
      "batch_size = 16\n"
      "[synthetic]\n"
      "n_train = 256\n"
      "n_val = 64\n"
      "n_test = 64\n"
      "seed = 11\n"
      "[run]\n"
      "name = ablate-s\n"
      "data_format = jsonl\n";
  const ResolvedConfig rc = resolve_config(ConfigFile::parse(text));
  CHECK(rc.model.d == 32);
  CHECK(rc.model.active_streams == "aps");
  CHECK(rc.streams.d_a == 4);
  CHECK(rc.streams.d_p == 3);
  REQUIRE(rc.streams.d_i() == 2);
  CHECK(rc.streams.interaction_pairs[0].left_stream == 'a');
  CHECK(rc.streams.interaction_pairs[0].left_index == 0);
  CHECK(rc.streams.interaction_pairs[0].right_stream == 'p');
  CHECK(rc.streams.interaction_pairs[0].right_index == 1);
  CHECK(rc.streams.interaction_pairs[1].right_stream == 's');
  CHECK(rc.loss.lambda_tau == 0.02);
  CHECK(rc.loss.mixup_alpha == 0.0);
  CHECK(rc.train.epochs == 30);
  CHECK(rc.train.seeds.size() == 5);
  CHECK(rc.synthetic.n_train == 256);
  CHECK(rc.synthetic.seed == 11);
  CHECK(rc.synthetic.streams.d_a == 4);  // generator follows the streams
  CHECK(rc.run_name == "ablate-s");
  CHECK(rc.data_format == DataFormat::kJsonl);
}

TEST_CASE("unknown sections and keys fail loudly") {
  CHECK_THROWS_WITH_AS(resolve_config(ConfigFile::parse("[modle]\nd = 32\n")),
                       doctest::Contains("modle"), ConfigError);
  CHECK_THROWS_WITH_AS(
      resolve_config(ConfigFile::parse("[model]\ndepth = 3\n")),
      doctest::Contains("model.depth"), ConfigError);
  CHECK_THROWS_WITH_AS(
      resolve_config(ConfigFile::parse("[train]\nepochs = -4\n")),
      doctest::Contains("train.epochs"), ConfigError);
}

TEST_CASE("resolution rebuilds default interactions when widths shrink") {
  const ResolvedConfig rc = resolve_config(
      ConfigFile::parse("[streams]\nd_a = 2\nd_p = 3\n"));
  CHECK(rc.streams.d_i() == 6);
  for (const InteractionPair& p : rc.streams.interaction_pairs) {
    CHECK(p.left_index < 2);
    CHECK(p.right_index < 3);
  }

  SUBCASE("an explicit 'none' clears them instead") {
    const ResolvedConfig r2 = resolve_config(ConfigFile::parse(
        "[streams]\nd_a = 2\ninteraction_pairs = none\n"
        "[model]\nactive_streams = aps\n"));
    CHECK(r2.streams.d_i() == 0);
    CHECK(r2.model.tokens() == 3);
  }
  SUBCASE("out-of-range indices are caught by validation") {
    CHECK_THROWS_AS(resolve_config(ConfigFile::parse(
                        "[streams]\nd_a = 2\ninteraction_pairs = a5*p0\n")),
                    ConfigError);
  }
  SUBCASE("pair grammar") {
    CHECK(parse_interaction_pairs("none").empty());
    const auto pairs = parse_interaction_pairs("s2*s3");
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].left_stream == 's');
    CHECK(pairs[0].right_index == 3);
    CHECK_THROWS_AS(parse_interaction_pairs("a0p1"), ConfigError);
    CHECK_THROWS_AS(parse_interaction_pairs("q0*p1"), ConfigError);
    CHECK_THROWS_AS(parse_interaction_pairs("a*p1"), ConfigError);
    CHECK_THROWS_AS(parse_interaction_pairs("a0*p-1"), ConfigError);
    CHECK_THROWS_AS(parse_interaction_pairs(""), ConfigError);
  }
}

TEST_CASE("config files load from disk") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "intentfuse_cfg_test.ini")
          .string();
  {
    std::ofstream out(path, std::ios::trunc);
    out << "[train]\nepochs = 3\nwarmup_epochs = 1\n";
  }
  const ConfigFile cfg = ConfigFile::load(path);
  CHECK(cfg.get_int("train", "epochs", 0) == 3);
  const ResolvedConfig rc = resolve_config(cfg);
  CHECK(rc.train.epochs == 3);
  std::filesystem::remove(path);
}
