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

// Automatic response metrics: BLEU-2, ROUGE-2, Distinct-n, entity
// precision/recall/F1 and embedding similarity.

#ifndef VRDIAL_EVAL_METRICS_HPP_
#define VRDIAL_EVAL_METRICS_HPP_

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "vrdial/kg/graph.hpp"

namespace vrdial::eval {

using Sentence = std::vector<std::string>;

// Corpus-level BLEU over uni- and bi-grams with uniform weights, brevity
// penalty, and `eps` in place of a zero match count. Throws
// ValidationError when the lists differ in length or are empty.
double bleu2(std::span<const Sentence> hyps, std::span<const Sentence> refs, double eps = 1e-9);

// Mean per-pair bigram F-measure (recall weighted by beta). A pair where
// either side has no bigram scores 1 when both sentences are equal, else 0.
double rouge2(std::span<const Sentence> hyps, std::span<const Sentence> refs, double beta = 1.2);

// Distinct n-grams over all hypotheses divided by the total n-gram count;
// 0 when there are no n-grams.
double distinct_n(std::span<const Sentence> hyps, int n);

struct EntityScores {
  double ma_p = 0, ma_r = 0, ma_f1 = 0;
  double mi_p = 0, mi_r = 0, mi_f1 = 0;
};

// Entities linked in each hypothesis against those linked in its reference,
// as percentages. Micro scores pool every turn; macro scores average the
// per-type micro precision and recall over entity types that occur in some
// prediction or reference. Precision is 0 without predictions, recall 0
// without gold entities.
EntityScores entity_prf(std::span<const Sentence> hyps, std::span<const Sentence> refs,
                        const kg::KnowledgeGraph& kg);

class EmbeddingTable {
 public:
  void add(std::string token, std::vector<double> vec);
  const std::vector<double>* find(const std::string& token) const;
  std::size_t size() const { return vectors_.size(); }
  // Whitespace-separated "token v1 v2 ..." lines.
  static EmbeddingTable load_text(const std::string& path);

 private:
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

struct EmbeddingScores {
  double ea = 0.0;
  double eg = 0.0;
};

// Embedding Average and symmetric Embedding Greedy, averaged over pairs.
EmbeddingScores embedding_metrics(std::span<const Sentence> hyps, std::span<const Sentence> refs,
                                  const EmbeddingTable& table);

double harmonic(double p, double r);

struct EvalReport {
  double b2 = 0, r2 = 0, d1 = 0, d2 = 0;
  double ma_p = 0, ma_r = 0, ma_f1 = 0, mi_p = 0, mi_r = 0, mi_f1 = 0;
  double ea = 0, eg = 0;
  bool operator==(const EvalReport&) const = default;
};

EvalReport score(std::span<const Sentence> hyps, std::span<const Sentence> refs,
                 const kg::KnowledgeGraph& kg, const EmbeddingTable& table);
nlohmann::ordered_json to_json(const EvalReport& r);

}  // namespace vrdial::eval

#endif  // VRDIAL_EVAL_METRICS_HPP_
