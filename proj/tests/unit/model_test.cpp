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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include "../support/fixtures.hpp"
#include "doctest.h"
#include "vrdial/error.hpp"
#include "vrdial/model/beam.hpp"
#include "vrdial/model/checkpoint.hpp"
#include "vrdial/model/infer.hpp"

namespace vrdial::model {
namespace {

using testing::small_config;
using testing::small_world;

double row_sum(const Tape& t, Var row) {
  auto v = t.value(row);
  return std::accumulate(v.begin(), v.end(), 0.0);
}

struct TurnRows {
  std::vector<Var> rows;
  std::vector<const Columns*> columns;
};

// Runs every network once on turn `ti` with categorical draws.
void run_networks(const Model& m, const kg::KnowledgeGraph& kg, const EncodedSession& s, int ti,
                  Tape& t, Rng& rng, const std::function<void(Var, const Columns*)>& visit) {
  Sampler smp{SampleMode::kCategorical, 1.0, &rng};
  TokenChooser choose = [&](Tape& tt, int, Var row, const Columns& c) {
    return m.sample_token(tt, row, c, smp, s.space);
  };
  CategoryChooser cat = [&](Tape& tt, Var p) { return m.sample_category(tt, p, smp); };
  const auto& turn = s.turns[ti];
  std::vector<int> r_prev = ti > 0 ? s.turns[ti - 1].physician : std::vector<int>{};
  EncodedSpan s0 = m.encode_span(t, m.initial_state(t));
  TurnContext ctx = m.context_encode(t, r_prev, turn.patient, Var{}, s0, s.space);
  nn::SpanEncoding r_enc;
  m.encode_response(t, turn.physician, s.space, &r_enc);
  Span sp;
  auto ps = m.prior_state(t, ctx, choose, &sp);
  for (Var r : ps.rows) visit(r, &ps.columns);
  auto qs = m.posterior_state(t, ctx, turn.physician, r_enc, choose, nullptr);
  for (Var r : qs.rows) visit(r, &qs.columns);
  EncodedSpan state = m.encode_span(t, sp);
  GraphContext g = m.build_graph(t, kg, sp.tokens, s.space);
  ActionSample a;
  auto pa = m.prior_action(t, ctx, state, g, cat, choose, &a);
  visit(pa.category, nullptr);
  for (Var r : pa.keywords.rows) visit(r, &pa.keywords.columns);
  auto qa = m.posterior_action(t, ctx, state, turn.physician, r_enc, cat, choose, nullptr);
  visit(qa.category, nullptr);
  for (Var r : qa.keywords.rows) visit(r, &qa.keywords.columns);
  EncodedSpan kw = m.encode_span(t, a.keywords);
  auto dec = m.response_start(t, ctx, state, a, kw);
  int prev = corpus::Vocabulary::kBos;
  for (int tok : turn.physician) {
    visit(m.response_step(t, dec, prev, s.space), &dec.columns);
    prev = tok;
  }
}

TEST_CASE("every network emits normalized rows") {
  auto w = small_world(small_config(), 3);
  Rng rng(5);
  int rows = 0;
  for (const auto& s : w.encoded) {
    for (int ti = 0; ti < static_cast<int>(s.turns.size()); ++ti) {
      Tape t(w.model->params());
      run_networks(*w.model, w.kg, s, ti, t, rng, [&](Var r, const Columns* c) {
        CHECK(row_sum(t, r) == doctest::Approx(1.0).epsilon(1e-12));
        if (c != nullptr) CHECK(t.size(r) == c->size());
        ++rows;
      });
    }
  }
  CHECK(rows > 50);
}

TEST_CASE("folded rows put exactly zero mass outside the declared support") {
  auto w = small_world(small_config(), 2);
  auto& s = w.encoded[0];
  const int oov = s.space.intern("never_seen_token");
  Rng rng(9);
  Tape t(w.model->params());
  run_networks(*w.model, w.kg, s, 0, t, rng, [&](Var r, const Columns* c) {
    if (c == nullptr) return;
    auto f = Model::fold_row(t, r, *c, s.space.size());
    CHECK(f[oov] == 0.0);
  });
}

TEST_CASE("zero parameters give uniform response rows over vocabulary plus copy positions") {
  auto w = small_world(small_config(), 1);
  auto& m = *w.model;
  for (int p = 0; p < m.params().size(); ++p) {
    auto v = m.params().value(p);
    std::fill(v.begin(), v.end(), 0.0);
  }
  const auto& s = w.encoded[0];
  Rng rng(1);
  Tape t(m.params());
  run_networks(m, w.kg, s, 1, t, rng, [&](Var r, const Columns* c) {
    auto v = t.value(r);
    for (double x : v) CHECK(x == doctest::Approx(1.0 / static_cast<double>(v.size())));
    if (c != nullptr) {
      CHECK(c->generate == m.vocab().size());
    }
  });
}

TEST_CASE("zero parameters give uniform prior keywords over vocabulary plus graph columns") {
  auto w = small_world(small_config(), 1);
  auto& m = *w.model;
  for (int p = 0; p < m.params().size(); ++p) {
    auto v = m.params().value(p);
    std::fill(v.begin(), v.end(), 0.0);
  }
  const auto& s = w.encoded[0];
  Tape t(m.params());
  EncodedSpan s0 = m.encode_span(t, m.initial_state(t));
  TurnContext ctx = m.context_encode(t, {}, s.turns[0].patient, Var{}, s0, s.space);
  EncodedSpan state = m.encode_span(t, m.fixed_span(t, *s.turns[1].state, s.space));
  GraphContext g = m.build_graph(t, w.kg, state.span.tokens, s.space);
  REQUIRE(!g.empty());
  REQUIRE(!g.column_node.empty());
  Sampler smp{SampleMode::kGreedy, 1.0, nullptr};
  ActionSample a;
  auto pa = m.prior_action(
      t, ctx, state, g, [&](Tape& tt, Var p) { return m.sample_category(tt, p, smp); },
      [&](Tape& tt, int, Var row, const Columns& c) { return m.sample_token(tt, row, c, smp, s.space); },
      &a);
  const int expected = m.vocab().size() + static_cast<int>(g.column_node.size());
  for (Var r : pa.keywords.rows) {
    REQUIRE(t.size(r) == expected);
    for (double x : t.value(r)) CHECK(x == doctest::Approx(1.0 / expected));
  }
}

TEST_CASE("ablating the context detector leaves only NULL and graph columns") {
  auto cfg = small_config();
  cfg.use_context_detector = false;
  auto w = small_world(cfg, 2);
  Rng rng(3);
  const auto& s = w.encoded[0];
  Tape t(w.model->params());
  EncodedSpan s0 = w.model->encode_span(t, w.model->initial_state(t));
  TurnContext ctx = w.model->context_encode(t, {}, s.turns[0].patient, Var{}, s0, s.space);
  EncodedSpan state = w.model->encode_span(t, w.model->fixed_span(t, *s.turns[1].state, s.space));
  GraphContext g = w.model->build_graph(t, w.kg, state.span.tokens, s.space);
  Sampler smp{SampleMode::kCategorical, 1.0, &rng};
  auto pa = w.model->prior_action(
      t, ctx, state, g, [&](Tape& tt, Var p) { return w.model->sample_category(tt, p, smp); },
      [&](Tape& tt, int, Var row, const Columns& c) {
        return w.model->sample_token(tt, row, c, smp, s.space);
      },
      nullptr);
  CHECK(pa.keywords.columns.generate == 1);
  CHECK(pa.keywords.columns.token[0] == corpus::Vocabulary::kNull);
  CHECK(pa.keywords.columns.graph == static_cast<int>(g.column_node.size()));
}

TEST_CASE("padding embedding stays zero") {
  auto w = small_world(small_config(), 1);
  const int e = w.model->params().find("embedding");
  auto v = w.model->params().value(e);
  for (int i = 0; i < w.model->config().embed_width; ++i) CHECK(v[i] == 0.0);
}

// --- beam search -------------------------------------------------------------

// Next-token rows depend on the previous token only; 3 tokens, 0 is EOS.
struct Bigram {
  std::map<int, std::vector<double>> rows;
  std::vector<double> operator()(int& steps, int prev) const {
    ++steps;
    return rows.at(prev);
  }
};

Bigram hand_model() {
  Bigram b;
  b.rows[-1] = {0.0, 0.55, 0.45};  // start
  b.rows[1] = {0.35, 0.25, 0.4};
  b.rows[2] = {0.99, 0.005, 0.005};
  return b;
}

double normalized(const Bigram& b, const std::vector<int>& seq) {
  double lp = 0.0;
  int prev = -1;
  for (int tok : seq) {
    lp += std::log(b.rows.at(prev)[tok]);
    prev = tok;
  }
  return lp / static_cast<double>(seq.size());
}

TEST_CASE("beam search matches exhaustive enumeration on a hand-built model") {
  const Bigram b = hand_model();
  auto step = [&](int& s, int prev) { return b(s, prev); };
  // Exhaustive: sequences with up to 3 content tokens ending in EOS, or
  // truncated at 3 content tokens.
  std::vector<std::vector<int>> all;
  std::vector<std::vector<int>> frontier{{}};
  for (int len = 0; len <= 3; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& p : frontier) {
      auto with_eos = p;
      with_eos.push_back(0);
      if (!p.empty() || b.rows.at(-1)[0] > 0.0) all.push_back(with_eos);
      if (len == 3) {
        all.push_back(p);
        continue;
      }
      for (int k : {1, 2}) {
        auto q = p;
        q.push_back(k);
        next.push_back(q);
      }
    }
    frontier = next;
  }
  double best = -1e300;
  std::vector<int> best_seq;
  for (const auto& seq : all) {
    if (seq.empty()) continue;
    bool valid = true;
    int prev = -1;
    for (int tok : seq) {
      if (b.rows.at(prev)[tok] <= 0.0) valid = false;
      prev = tok;
    }
    if (!valid) continue;
    const double sc = normalized(b, seq);
    if (sc > best) {
      best = sc;
      best_seq = seq;
    }
  }
  if (!best_seq.empty() && best_seq.back() == 0) best_seq.pop_back();
  auto r = beam_search(0, step, 2, 3, -1, 0);
  CHECK(r.tokens == best_seq);
  CHECK(r.score == doctest::Approx(best));
  // Greedy follows 1 -> 2 -> EOS here; beam 2 finds the better 2 -> EOS.
  auto g = beam_search(0, step, 1, 3, -1, 0);
  CHECK(g.tokens == std::vector<int>{1, 2});
  CHECK(r.tokens == std::vector<int>{2});
}

TEST_CASE("beam width 1 is greedy decoding and respects max_len") {
  Bigram b;
  b.rows[-1] = {0.1, 0.5, 0.4};
  b.rows[1] = {0.2, 0.5, 0.3};
  b.rows[2] = {0.2, 0.3, 0.5};
  auto step = [&](int& s, int prev) { return b(s, prev); };
  auto r = beam_search(0, step, 1, 4, -1, 0);
  CHECK(r.tokens == std::vector<int>{1, 1, 1, 1});
  for (int beam : {1, 2, 3, 5}) {
    for (int len : {0, 1, 2, 5}) {
      CHECK(static_cast<int>(beam_search(0, step, beam, len, -1, 0).tokens.size()) <= len);
    }
  }
  CHECK_THROWS_AS(beam_search(0, step, 0, 4, -1, 0), ValidationError);
}

// --- inference ---------------------------------------------------------------

TEST_CASE("inference runs prior networks only and is deterministic") {
  auto w = small_world(small_config(), 2);
  const auto& s = w.encoded[0];
  w.model->reset_counters();
  DialogueHistory h;
  auto a = infer_turn(*w.model, w.kg, s.space, h, s.turns[0].patient);
  auto b = infer_turn(*w.model, w.kg, s.space, h, s.turns[0].patient);
  CHECK(w.model->counters().posterior_state == 0);
  CHECK(w.model->counters().posterior_action == 0);
  CHECK(w.model->counters().prior_state == 2);
  CHECK(w.model->counters().prior_action == 2);
  CHECK(a.response == b.response);
  CHECK(a.state == b.state);
  CHECK(a.keywords == b.keywords);
  CHECK(static_cast<int>(a.response.size()) <= w.model->config().max_response_len);
  for (const auto& p : a.trace) {
    CHECK(p.weight == doctest::Approx(a.keyword_graph_weight[p.position]));
  }
  advance(h, a, s.turns[0].physician);
  auto c = infer_turn(*w.model, w.kg, s.space, h, s.turns[1].patient);
  CHECK(c.summary.size() == static_cast<std::size_t>(w.model->config().hidden_width));
}

TEST_CASE("a state without linkable entities yields an empty subgraph and a response") {
  auto cfg = small_config();
  auto w = small_world(cfg, 1);
  const auto& s = w.encoded[0];
  // Zero parameters make the prior state uniform: greedy picks the lowest
  // id, PAD, which links to nothing.
  for (int p = 0; p < w.model->params().size(); ++p) {
    auto v = w.model->params().value(p);
    std::fill(v.begin(), v.end(), 0.0);
  }
  auto r = infer_turn(*w.model, w.kg, s.space, DialogueHistory{}, s.turns[0].patient);
  CHECK(r.subgraph.empty());
  CHECK(r.trace.empty());
  CHECK(static_cast<int>(r.response.size()) <= cfg.max_response_len);
}

TEST_CASE("reasoning paths follow graph edges from a seed") {
  ReasoningPath p;
  p.weight = 0.0912;
  p.seed = "allergic rhinitis";
  p.hops.push_back(PathHop{"allergic rhinitis", "treated_by", "montelukast", false});
  CHECK(format_path(p) == "allergic rhinitis ▸ treated_by ▸ montelukast (0.09)");
  p.hops[0].inverse = true;
  CHECK(format_path(p) == "allergic rhinitis ▸ treated_by^-1 ▸ montelukast (0.09)");
  ReasoningPath seed_only;
  seed_only.seed = "flu";
  seed_only.weight = 0.5;
  CHECK(format_path(seed_only) == "flu (0.50)");
}

// --- checkpoints -------------------------------------------------------------

TEST_CASE("checkpoint round trip restores parameters and refuses mismatches") {
  auto w = small_world(small_config(), 2);
  const auto dir = std::filesystem::temp_directory_path() / "vrdial_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();
  CheckpointMeta meta;
  meta.step = 42;
  meta.rng_state = "abc";
  save_checkpoint(path, *w.model, meta);
  auto loaded = load_checkpoint(path);
  CHECK(loaded.meta.step == 42);
  CHECK(loaded.meta.rng_state == "abc");
  CHECK(loaded.model->params().flatten() == w.model->params().flatten());
  CHECK(loaded.model->config() == w.model->config());
  const auto& s = w.encoded[0];
  EncodedSession again = loaded.model->encode(w.sessions[0]);
  auto a = infer_turn(*w.model, w.kg, s.space, {}, s.turns[0].patient);
  auto b = infer_turn(*loaded.model, w.kg, again.space, {}, again.turns[0].patient);
  CHECK(a.response == b.response);

  auto other = w.model->config();
  other.hidden_width += 1;
  CHECK_THROWS_AS(load_checkpoint(path, &other), ConfigMismatch);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const std::uint32_t bad = 99;
    f.write(reinterpret_cast<const char*>(&bad), sizeof(bad));
  }
  CHECK_THROWS_AS(load_checkpoint(path), ConfigMismatch);
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ConfigMismatch);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a graph with different relations is rejected") {
  auto w = small_world(small_config(), 1);
  std::vector<kg::Triplet> tr = {{"a", "other_rel", "b", kg::EntityType::kDisease, kg::EntityType::kSymptom}};
  auto g = kg::build_global_graph(tr);
  CHECK_THROWS_AS(w.model->check_graph(g), ConfigMismatch);
  CHECK_NOTHROW(w.model->check_graph(w.kg));
}

}  // namespace
}  // namespace vrdial::model
