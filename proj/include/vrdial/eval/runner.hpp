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

// Model-driven evaluation: test-time inference over a corpus with gold
// dialogue history, then the metric suite and latent-span accuracies.

#ifndef VRDIAL_EVAL_RUNNER_HPP_
#define VRDIAL_EVAL_RUNNER_HPP_

#include <span>
#include <string>
#include <vector>

#include "vrdial/corpus/corpus.hpp"
#include "vrdial/eval/metrics.hpp"
#include "vrdial/model/model.hpp"

namespace vrdial::eval {

struct TurnOutput {
  std::string session;
  int turn = 0;
  Sentence hypothesis;
  Sentence reference;
  Sentence state;  // predicted state span
  Sentence keywords;
  int category = 0;
  std::optional<Sentence> gold_state;
  std::optional<int> gold_category;
  std::optional<Sentence> gold_keywords;
};

// Runs test-time inference on every turn. Each turn sees the gold previous
// response; the carried summary and previous state are the model's own.
// Sessions run in parallel; output order follows the input.
std::vector<TurnOutput> predict_corpus(const model::Model& m, const kg::KnowledgeGraph& kg,
                                       std::span<const corpus::DialogueSession> sessions);

// Content-token rows of the model's embedding table.
EmbeddingTable model_embeddings(const model::Model& m);

EvalReport score_outputs(std::span<const TurnOutput> outputs, const kg::KnowledgeGraph& kg,
                         const EmbeddingTable& table);

// Micro token F1 of predicted against gold state spans, NULL excluded.
double state_token_f1(std::span<const TurnOutput> outputs);
double category_accuracy(std::span<const TurnOutput> outputs);

// Fraction of gold response tokens (EOS included) that are the argmax of
// the response distribution given the gold prefix. Latents come from the
// prior networks (greedy) or, with `gold_latents`, from the labels.
double teacher_forced_accuracy(const model::Model& m, const kg::KnowledgeGraph& kg,
                               std::span<const corpus::DialogueSession> sessions,
                               bool gold_latents = false);

// Per-turn CSV: session, turn, hypothesis, reference, state, category, keywords.
void write_csv(std::ostream& out, std::span<const TurnOutput> outputs);

}  // namespace vrdial::eval

#endif  // VRDIAL_EVAL_RUNNER_HPP_
