/* Copyright 2026 The VRDial Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/fixtures.hpp"
#include "doctest.h"
#include "json.hpp"
#include "vrdial/cli/cli.hpp"

namespace vrdial::cli {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = run_cli(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sample_tsv() { return std::string(VRDIAL_SOURCE_DIR) + "/data/sample_kg.tsv"; }

// One small trained run shared by the tests below.
struct Workspace {
  fs::path dir;
  std::string kg;
  std::string corpus;
  std::string checkpoint;

  Workspace() {
    dir = fs::temp_directory_path() / "vrdial_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    kg = (dir / "kg.json").string();
    corpus = (dir / "corpus.jsonl").string();
    REQUIRE(run({"build-kg", "--triplets", sample_tsv(), "--out", kg}).code == kOk);
    REQUIRE(run({"synth", "--kg", kg, "--seed", "4", "--sessions", "10", "--out", corpus}).code == kOk);
    std::ofstream cfg(dir / "run.cfg");
    cfg << "embed_width=8\nhidden_width=8\ngraph_hidden=6\ngraph_out=8\nspan_len_S=4\n"
           "span_len_A=2\nbeam_width=2\nmax_response_len=8\nmax_steps=3\nbatch_size=4\n"
           "val_fraction=0.2\n";
    cfg.close();
    auto r = run({"train", "--config", (dir / "run.cfg").string(), "--corpus", corpus, "--kg", kg,
                  "--out", (dir / "run").string()});
    REQUIRE(r.code == kOk);
    REQUIRE(r.err.empty());
    checkpoint = (dir / "run" / "checkpoint.ckpt").string();
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

TEST_CASE("usage errors exit 2") {
  CHECK(run({}).code == kUsage);
  CHECK(run({"frobnicate"}).code == kUsage);
  CHECK(run({"synth", "--seed", "1"}).code == kUsage);  // --out is required
  CHECK(run({"inspect", "--checkpoint", "x", "--bogus", "1"}).code == kUsage);
  CHECK(run({"synth", "--sessions", "many", "--out", "x"}).code == kUsage);
  CHECK(run({"--help"}).code == kOk);
}

TEST_CASE("build-kg prints counts") {
  auto out = (fs::temp_directory_path() / "vrdial_cli_kg.json").string();
  auto r = run({"build-kg", "--triplets", sample_tsv(), "--out", out});
  REQUIRE(r.code == kOk);
  CHECK(r.err.empty());
  CHECK(r.out.find("entities 88") != std::string::npos);
  CHECK(r.out.find("edges 94") != std::string::npos);
  auto missing = run({"build-kg", "--triplets", "/nonexistent.tsv", "--out", out});
  CHECK(missing.code == kFailure);
  CHECK_FALSE(missing.err.empty());
  fs::remove(out);
}

TEST_CASE("synth is byte identical for a fixed seed") {
  auto& w = workspace();
  auto a = (w.dir / "a.jsonl").string();
  auto b = (w.dir / "b.jsonl").string();
  auto c = (w.dir / "c.jsonl").string();
  REQUIRE(run({"synth", "--kg", w.kg, "--seed", "7", "--sessions", "5", "--out", a}).code == kOk);
  REQUIRE(run({"synth", "--kg", w.kg, "--seed", "7", "--sessions", "5", "--out", b}).code == kOk);
  REQUIRE(run({"synth", "--kg", w.kg, "--seed", "8", "--sessions", "5", "--out", c}).code == kOk);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE("data directory from the environment") {
  auto& w = workspace();
  auto data = w.dir / "data";
  fs::create_directories(data);
  fs::copy_file(w.kg, data / "kg.json", fs::copy_options::overwrite_existing);
  ::setenv(kDataDirEnv, data.string().c_str(), 1);
  CHECK(data_dir() == data.string());
  auto out = (w.dir / "env.jsonl").string();
  auto r = run({"synth", "--seed", "7", "--sessions", "5", "--out", out});
  ::unsetenv(kDataDirEnv);
  CHECK(r.code == kOk);
  CHECK(slurp(out) == slurp(w.dir / "a.jsonl"));
  CHECK(data_dir() == "data");
}

TEST_CASE("inspect echoes config and step") {
  auto& w = workspace();
  auto r = run({"inspect", "--checkpoint", w.checkpoint});
  REQUIRE(r.code == kOk);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["step"] == 3);
  CHECK(j["config"]["span_len_S"] == 4);
  CHECK(j["extra"]["run_config"]["max_steps"] == 3);
  CHECK(run({"inspect", "--checkpoint", w.corpus}).code == kMismatch);
}

TEST_CASE("eval prints the report keys in order and is deterministic") {
  auto& w = workspace();
  auto a = run({"eval", "--checkpoint", w.checkpoint, "--corpus", w.corpus, "--kg", w.kg});
  auto b = run({"eval", "--checkpoint", w.checkpoint, "--corpus", w.corpus, "--kg", w.kg});
  REQUIRE(a.code == kOk);
  CHECK(a.err.empty());
  CHECK(a.out == b.out);
  auto j = nlohmann::ordered_json::parse(a.out);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"b2", "r2", "d1", "d2", "ma_p", "ma_r", "ma_f1", "mi_p",
                                         "mi_r", "mi_f1", "ea", "eg"});
  auto csv = (w.dir / "turns.csv").string();
  REQUIRE(run({"eval", "--checkpoint", w.checkpoint, "--corpus", w.corpus, "--kg", w.kg, "--csv",
               csv}).code == kOk);
  CHECK(slurp(csv).find("session") == 0);
}

TEST_CASE("eval failure classes") {
  auto& w = workspace();
  auto empty = (w.dir / "empty.jsonl").string();
  std::ofstream(empty).close();
  CHECK(run({"eval", "--checkpoint", w.checkpoint, "--corpus", empty, "--kg", w.kg}).code ==
        kEmptySplit);
  CHECK(run({"train", "--corpus", empty, "--kg", w.kg, "--out", (w.dir / "x").string()}).code ==
        kEmptySplit);
  auto other = (w.dir / "other.tsv").string();
  std::ofstream(other) << "fever\tcauses\tflu\tsymptom\tdisease\n";
  auto other_kg = (w.dir / "other.json").string();
  REQUIRE(run({"build-kg", "--triplets", other, "--out", other_kg}).code == kOk);
  CHECK(run({"eval", "--checkpoint", w.checkpoint, "--corpus", w.corpus, "--kg", other_kg}).code ==
        kMismatch);
  CHECK(run({"chat", "--checkpoint", w.checkpoint, "--kg", other_kg}, "/quit\n").code == kMismatch);
  CHECK(run({"train", "--set", "nonsense", "--corpus", w.corpus, "--kg", w.kg, "--out",
             (w.dir / "x").string()}).code == kUsage);
}

TEST_CASE("chat transcript") {
  auto& w = workspace();
  auto quit = run({"chat", "--checkpoint", w.checkpoint, "--kg", w.kg}, "/quit\nhello\n");
  CHECK(quit.code == kOk);
  CHECK(quit.out.empty());
  CHECK(quit.err.empty());

  auto r = run({"chat", "--checkpoint", w.checkpoint, "--kg", w.kg},
               "i suffer from nausea these days\n/reset\ni suffer from nausea these days\n");
  REQUIRE(r.code == kOk);
  std::istringstream lines(r.out);
  std::vector<std::string> turns[2];
  int at = 0;
  std::string line;
  while (std::getline(lines, line)) {
    if (line == "(reset)") {
      at = 1;
      continue;
    }
    turns[at].push_back(line);
  }
  REQUIRE(!turns[0].empty());
  CHECK(turns[0].front().rfind("state: ", 0) == 0);
  CHECK(turns[0][1].rfind("action: ", 0) == 0);
  CHECK(turns[0].back().rfind("response: ", 0) == 0);
  CHECK(turns[0].size() <= 6);
  // After a reset the same opening line reproduces the first turn.
  CHECK(turns[0] == turns[1]);
}

}  // namespace
}  // namespace vrdial::cli
