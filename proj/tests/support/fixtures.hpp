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

#ifndef VRDIAL_TESTS_FIXTURES_HPP_
#define VRDIAL_TESTS_FIXTURES_HPP_

#include <memory>
#include <string>
#include <vector>

#include "vrdial/corpus/corpus.hpp"
#include "vrdial/kg/graph.hpp"
#include "vrdial/model/model.hpp"

#ifndef VRDIAL_SOURCE_DIR
#define VRDIAL_SOURCE_DIR "."
#endif

namespace vrdial::testing {

inline kg::KnowledgeGraph sample_kg() {
  return kg::load_graph_file(std::string(VRDIAL_SOURCE_DIR) + "/data/sample_kg.tsv");
}

inline model::ModelConfig small_config() {
  model::ModelConfig c;
  c.embed_width = 8;
  c.hidden_width = 8;
  c.graph_hidden = 6;
  c.graph_out = 8;
  c.span_len_S = 4;
  c.span_len_A = 2;
  c.hops = 2;
  c.beam_width = 2;
  c.max_response_len = 10;
  return c;
}

// Synthetic sessions over the sample graph plus a model sized for tests.
struct SmallWorld {
  kg::KnowledgeGraph kg;
  std::vector<corpus::DialogueSession> sessions;
  std::unique_ptr<model::Model> model;
  std::vector<model::EncodedSession> encoded;
};

inline SmallWorld small_world(model::ModelConfig cfg, int sessions = 4, std::uint64_t seed = 11,
                              int turns = 4) {
  SmallWorld w;
  w.kg = sample_kg();
  corpus::SynthParams p;
  p.sessions = sessions;
  p.turns_per_session = turns;
  w.sessions = corpus::synth_corpus(w.kg, seed, p);
  auto vocab = corpus::build_vocab(w.sessions, w.kg, 400);
  w.model = std::make_unique<model::Model>(cfg, vocab, model::Model::relations_of(w.kg));
  w.model->init(seed);
  for (const auto& s : w.sessions) w.encoded.push_back(w.model->encode(s));
  return w;
}

// Enumerable world: vocabulary of 6 (5 reserved + "w"), |S| = 2, |A| = 1,
// two categories, a graph where "w" is an entity.
inline SmallWorld tiny_world(std::uint64_t seed) {
  SmallWorld w;
  std::vector<kg::Triplet> triplets = {
      {"w", "symptom_of", "flu", kg::EntityType::kSymptom, kg::EntityType::kDisease},
      {"flu", "treated_by", "rest", kg::EntityType::kDisease, kg::EntityType::kMedicine}};
  w.kg = kg::build_global_graph(triplets);
  corpus::DialogueSession s;
  s.id = "tiny";
  s.turns.push_back(corpus::Turn{{"w"}, corpus::Tokens{"w", "w"}});
  w.sessions.push_back(s);
  model::ModelConfig c;
  c.embed_width = 4;
  c.hidden_width = 4;
  c.graph_hidden = 3;
  c.graph_out = 4;
  c.span_len_S = 2;
  c.span_len_A = 1;
  c.hops = 1;
  c.action_categories = 2;
  c.beam_width = 1;
  c.max_response_len = 4;
  const std::vector<std::string> tokens = {"w"};
  w.model = std::make_unique<model::Model>(c, corpus::Vocabulary(tokens),
                                           model::Model::relations_of(w.kg));
  w.model->init(seed);
  w.encoded.push_back(w.model->encode(s));
  return w;
}

}  // namespace vrdial::testing

#endif  // VRDIAL_TESTS_FIXTURES_HPP_
