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

#include <algorithm>
#include <cmath>
#include <set>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "doctest.h"
#include "vrdial/error.hpp"
#include "vrdial/eval/metrics.hpp"
#include "vrdial/eval/runner.hpp"

namespace vrdial::eval {
namespace {

Sentence S(const std::string& text) { return corpus::tokenize(text); }

kg::KnowledgeGraph hand_kg() {
  std::vector<kg::Triplet> t = {
      {"cough", "symptom_of", "flu", kg::EntityType::kSymptom, kg::EntityType::kDisease},
      {"fever", "symptom_of", "flu", kg::EntityType::kSymptom, kg::EntityType::kDisease},
      {"flu", "treated_by", "aspirin", kg::EntityType::kDisease, kg::EntityType::kMedicine},
      {"flu", "treated_by", "ibuprofen", kg::EntityType::kDisease, kg::EntityType::kMedicine}};
  return kg::build_global_graph(t);
}

TEST_CASE("bleu2") {
  const std::vector<Sentence> a = {S("a b c d")};
  CHECK(bleu2(a, a) == doctest::Approx(1.0));
  const std::vector<Sentence> h = {S("a b c")};
  const std::vector<Sentence> r = {S("a b d")};
  CHECK(bleu2(h, r) == doctest::Approx(testing::bleu2_oracle(h, r)).epsilon(1e-4));
  CHECK(bleu2(h, r) == doctest::Approx(std::sqrt(2.0 / 3.0 * 1.0 / 2.0)).epsilon(1e-4));
  const std::vector<Sentence> z = {S("a c")};
  const std::vector<Sentence> zr = {S("a b")};
  CHECK(bleu2(z, zr) < 1e-4);
  const std::vector<Sentence> two = {S("a"), S("b")};
  CHECK_THROWS_AS(bleu2(h, two), ValidationError);
}

TEST_CASE("bleu2 agrees with the reference formula on random corpora") {
  Rng rng(4);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Sentence> h, r;
    const int n = 1 + static_cast<int>(uniform_index(rng, 4));
    for (int i = 0; i < n; ++i) {
      Sentence x, y;
      for (std::uint64_t k = 0, m = 1 + uniform_index(rng, 6); k < m; ++k) x.push_back(words[uniform_index(rng, 5)]);
      for (std::uint64_t k = 0, m = 1 + uniform_index(rng, 6); k < m; ++k) y.push_back(words[uniform_index(rng, 5)]);
      h.push_back(x);
      r.push_back(y);
    }
    CHECK(bleu2(h, r) == doctest::Approx(testing::bleu2_oracle(h, r)).epsilon(1e-9));
  }
}

TEST_CASE("rouge2") {
  const std::vector<Sentence> a = {S("a b c")};
  CHECK(rouge2(a, a) == doctest::Approx(1.0));
  const std::vector<Sentence> d = {S("d e f")};
  CHECK(rouge2(a, d) == 0.0);
  // hyp bigrams {ab, bc}; ref bigrams {ab, bc, cd, de}: P = 1, R = 1/2.
  const std::vector<Sentence> h = {S("a b c")};
  const std::vector<Sentence> r = {S("a b c d e")};
  const double p = 1.0, rec = 0.5, b2 = 1.2 * 1.2;
  CHECK(rouge2(h, r) == doctest::Approx((1 + b2) * p * rec / (rec + b2 * p)).epsilon(1e-4));
}

TEST_CASE("distinct_n") {
  const std::vector<Sentence> a = {S("a a a")};
  CHECK(distinct_n(a, 1) == doctest::Approx(1.0 / 3.0));
  const std::vector<Sentence> u = {S("a b c"), S("d e")};
  CHECK(distinct_n(u, 1) == 1.0);
  const std::vector<Sentence> t = {S("a b"), S("a b")};
  CHECK(distinct_n(t, 2) == 0.5);
  std::vector<Sentence> dup = u;
  dup.insert(dup.end(), u.begin(), u.end());
  CHECK(distinct_n(dup, 1) <= distinct_n(u, 1));
  CHECK(distinct_n({}, 1) == 0.0);
}

TEST_CASE("entity_prf perfect, empty and hand-counted cases") {
  const auto kg = hand_kg();
  const std::vector<Sentence> g = {S("you have flu"), S("take aspirin for the cough")};
  auto perfect = entity_prf(g, g, kg);
  for (double v : {perfect.ma_p, perfect.ma_r, perfect.ma_f1, perfect.mi_p, perfect.mi_r, perfect.mi_f1}) {
    CHECK(v == doctest::Approx(100.0));
  }
  const std::vector<Sentence> none = {S("hello"), S("ok")};
  auto empty = entity_prf(none, g, kg);
  CHECK(empty.mi_p == 0.0);
  CHECK(empty.mi_r == 0.0);
  CHECK(empty.mi_f1 == 0.0);

  // Turn 1: pred {flu, fever}, gold {flu}. Turn 2: pred {ibuprofen}, gold
  // {aspirin, cough}. Totals: tp 1, pred 3, gold 3.
  const std::vector<Sentence> h = {S("flu with fever"), S("take ibuprofen")};
  auto s = entity_prf(h, g, kg);
  CHECK(s.mi_p == doctest::Approx(100.0 / 3.0));
  CHECK(s.mi_r == doctest::Approx(100.0 / 3.0));
  CHECK(s.mi_f1 == doctest::Approx(100.0 / 3.0));
  // Per type: disease tp1 p1 g1 -> P 100 R 100; symptom tp0 p1 g1 -> 0, 0;
  // medicine tp0 p1 g1 -> 0, 0.
  CHECK(s.ma_p == doctest::Approx(100.0 / 3.0));
  CHECK(s.ma_r == doctest::Approx(100.0 / 3.0));
  CHECK(s.ma_f1 == doctest::Approx(100.0 / 3.0));
}

TEST_CASE("entity micro F1 matches an independent set intersection on random sessions") {
  const auto kg = testing::sample_kg();
  std::vector<std::string> names;
  for (int e = 0; e < kg.entity_count(); ++e) names.push_back(kg.entity(e).name);
  names.push_back("filler");
  names.push_back("words");
  Rng rng(31);
  std::vector<Sentence> h, r;
  for (int i = 0; i < 50; ++i) {
    Sentence x, y;
    for (std::uint64_t k = 0, m = uniform_index(rng, 5); k < m; ++k) x.push_back(names[uniform_index(rng, names.size())]);
    for (std::uint64_t k = 0, m = uniform_index(rng, 5); k < m; ++k) y.push_back(names[uniform_index(rng, names.size())]);
    h.push_back(x);
    r.push_back(y);
  }
  double tp = 0, np = 0, ng = 0;
  for (int i = 0; i < 50; ++i) {
    std::set<std::string> ps, gs;
    for (const auto& w : h[i]) if (w != "filler" && w != "words") ps.insert(w);
    for (const auto& w : r[i]) if (w != "filler" && w != "words") gs.insert(w);
    for (const auto& w : ps) tp += gs.count(w);
    np += ps.size();
    ng += gs.size();
  }
  const double p = np > 0 ? tp / np : 0, rc = ng > 0 ? tp / ng : 0;
  const double f1 = p + rc > 0 ? 200 * p * rc / (p + rc) : 0;
  CHECK(entity_prf(h, r, kg).mi_f1 == doctest::Approx(f1).epsilon(1e-12));
}

TEST_CASE("embedding metrics") {
  EmbeddingTable t;
  t.add("x", {1, 0});
  t.add("y", {0, 1});
  t.add("z", {1, 1});
  t.add("zero", {0, 0});
  const std::vector<Sentence> a = {S("x z")};
  auto same = embedding_metrics(a, a, t);
  CHECK(same.ea == doctest::Approx(1.0));
  CHECK(same.eg == doctest::Approx(1.0));
  auto orth = embedding_metrics(std::vector<Sentence>{S("x")}, std::vector<Sentence>{S("y")}, t);
  CHECK(orth.ea == doctest::Approx(0.0));
  CHECK(orth.eg == doctest::Approx(0.0));
  // 2x2 case: hyp {x, y}, ref {z, unknown}. Means (.5,.5) and (1,1): EA 1.
  // Greedy hyp->ref: each of x, y best cos with z = 1/sqrt2; ref->hyp: z
  // best 1/sqrt2. EG = 1/sqrt2.
  auto hand = embedding_metrics(std::vector<Sentence>{S("x y")}, std::vector<Sentence>{S("z unknown")}, t);
  CHECK(hand.ea == doctest::Approx(1.0));
  CHECK(hand.eg == doctest::Approx(1.0 / std::sqrt(2.0)));
  auto zero = embedding_metrics(std::vector<Sentence>{S("zero")}, std::vector<Sentence>{S("x")}, t);
  CHECK(zero.ea == 0.0);
  CHECK(zero.eg == 0.0);
}

TEST_CASE("metrics are permutation invariant over turns") {
  const auto kg = hand_kg();
  EmbeddingTable t;
  t.add("flu", {1, 0.5});
  t.add("aspirin", {0.2, 1});
  std::vector<Sentence> h = {S("flu is bad"), S("take aspirin now"), S("cough cough")};
  std::vector<Sentence> r = {S("you have flu"), S("take aspirin"), S("any fever ?")};
  auto base = score(h, r, kg, t);
  std::rotate(h.begin(), h.begin() + 1, h.end());
  std::rotate(r.begin(), r.begin() + 1, r.end());
  auto rotated = score(h, r, kg, t);
  CHECK(base.b2 == doctest::Approx(rotated.b2));
  CHECK(base.r2 == doctest::Approx(rotated.r2));
  CHECK(base.d2 == doctest::Approx(rotated.d2));
  CHECK(base.mi_f1 == doctest::Approx(rotated.mi_f1));
  CHECK(base.ea == doctest::Approx(rotated.ea));
  auto j = to_json(base);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"b2", "r2", "d1", "d2", "ma_p", "ma_r", "ma_f1", "mi_p",
                                         "mi_r", "mi_f1", "ea", "eg"});
}

TEST_CASE("span accuracies") {
  TurnOutput a;
  a.state = S("flu <null> cough");
  a.gold_state = S("flu fever <null>");
  a.category = 1;
  a.gold_category = 1;
  TurnOutput b;
  b.state = S("<null> <null>");
  b.gold_state = S("cough <null>");
  b.category = 0;
  b.gold_category = 2;
  const std::vector<TurnOutput> outs = {a, b};
  // tp 1, predicted 2, gold 3.
  CHECK(state_token_f1(outs) == doctest::Approx(2 * 0.5 * (1.0 / 3) / (0.5 + 1.0 / 3)));
  CHECK(category_accuracy(outs) == 0.5);
}

TEST_CASE("corpus prediction follows the gold history and is deterministic") {
  auto w = testing::small_world(testing::small_config(), 3);
  auto a = predict_corpus(*w.model, w.kg, w.sessions);
  auto b = predict_corpus(*w.model, w.kg, w.sessions);
  REQUIRE(a.size() == 12);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].hypothesis == b[i].hypothesis);
  CHECK(a[5].reference == w.sessions[1].turns[1].physician);
  const double acc = teacher_forced_accuracy(*w.model, w.kg, w.sessions);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(teacher_forced_accuracy(*w.model, w.kg, w.sessions, true) >= 0.0);
  auto table = model_embeddings(*w.model);
  CHECK(table.size() == static_cast<std::size_t>(w.model->vocab().size() - corpus::Vocabulary::kReserved));
}

}  // namespace
}  // namespace vrdial::eval
