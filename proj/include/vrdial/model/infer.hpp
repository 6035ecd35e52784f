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

// Test-time execution: prior networks only, greedy latent decoding, beam
// search for the response, and a reasoning trace for graph keywords.

#ifndef VRDIAL_MODEL_INFER_HPP_
#define VRDIAL_MODEL_INFER_HPP_

#include <span>
#include <string>
#include <vector>

#include "vrdial/kg/graph.hpp"
#include "vrdial/model/model.hpp"

namespace vrdial::model {

struct DialogueHistory {
  std::vector<double> summary;     // carried context summary; empty at the first turn
  std::vector<int> prev_state;     // previous state span; empty means S_0
  std::vector<int> prev_response;  // previous physician response
  void reset() { *this = DialogueHistory{}; }
};

struct PathHop {
  std::string head;
  std::string relation;
  std::string tail;
  bool inverse = false;  // edge walked from its tail to its head
};

struct ReasoningPath {
  int position = 0;  // keyword position
  std::string keyword;
  double weight = 0.0;  // graph-column probability of the keyword in its row
  std::string seed;
  std::vector<PathHop> hops;  // empty when the keyword is itself a seed
};

// "head ▸ relation ▸ tail (0.09)"; inverse hops print "relation^-1".
std::string format_path(const ReasoningPath& p);

struct TurnPrediction {
  std::vector<int> state;
  int category = 0;
  std::vector<int> keywords;
  std::vector<int> response;
  double response_score = 0.0;
  std::vector<double> keyword_graph_weight;  // per keyword position
  std::vector<ReasoningPath> trace;          // descending weight
  kg::LocalSubgraph subgraph;
  std::vector<double> summary;
};

// Pure function of (parameters, inputs). `space` must know every id in
// `history` and `patient`.
TurnPrediction infer_turn(const Model& m, const kg::KnowledgeGraph& kg, const TokenSpace& space,
                          const DialogueHistory& history, std::span<const int> patient);

// Moves `h` past a turn whose physician response was `response`.
void advance(DialogueHistory& h, const TurnPrediction& p, std::span<const int> response);

}  // namespace vrdial::model

#endif  // VRDIAL_MODEL_INFER_HPP_
