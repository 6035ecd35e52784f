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

// Variational objectives: the joint bound, the two collapsed-inference
// losses, the unsupervised schedule, the supervised auxiliary loss and the
// exhaustive-enumeration oracles used to verify them.

#ifndef VRDIAL_OBJECTIVE_OBJECTIVE_HPP_
#define VRDIAL_OBJECTIVE_OBJECTIVE_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "vrdial/kg/graph.hpp"
#include "vrdial/model/model.hpp"
#include "vrdial/nn/tape.hpp"

namespace vrdial::objective {

using model::EncodedSession;
using model::Model;
using model::SampleMode;
using nn::Tape;
using nn::Var;

struct LossBreakdown {
  double reconstruction = 0.0;
  double kl_state = 0.0;
  double kl_action_category = 0.0;
  double kl_action_keywords = 0.0;
  double supervised = 0.0;
  double total = 0.0;
  bool finite = true;  // false when some term is infinite or undefined
  int turns = 0;
  int supervised_turns = 0;
};

enum class LossKind {
  kNone,    // no unsupervised term
  kJoint,   // joint bound
  kStage1,  // state-side bound
  kStage2,  // action-side bound
  kUnsupStage1,
  kUnsupStage2,  // state-side plus action-side bound
};

// Replaces the posterior draws of the first turn (enumeration oracles).
struct TurnForcing {
  std::vector<int> state;
  int category = 0;
  std::vector<int> keywords;
};

struct ObjectiveSpec {
  LossKind unsup = LossKind::kJoint;
  bool supervised = false;  // add the auxiliary loss on labeled sessions
  double sup_weight = 1.0;
  SampleMode mode = SampleMode::kGumbelST;
  double tau = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  // Condition the prior policy of the joint bound on a prior state draw
  // instead of the posterior one.
  bool prior_state_for_prior_action = false;
  // Multiplies every KL term of the unsupervised bound in the objective;
  // the breakdown keeps the unweighted values.
  double kl_weight = 1.0;
  const TurnForcing* forcing = nullptr;
};

struct Normalizer {
  double unsup_turns = 1.0;
  double sup_turns = 1.0;
};

struct SessionTerms {
  Var objective;          // normalized contribution to the batch objective
  LossBreakdown sums;     // unnormalized per-term sums over the session's turns
  double log_q_path = 0;  // log posterior probability of forced first-turn draws
};

// Builds the objective of one session on `t`. `session_index` keys the rng
// streams, so replays with equal (seed, step, index) draw identical samples.
SessionTerms session_terms(const Model& m, Tape& t, const kg::KnowledgeGraph& kg,
                           const EncodedSession& s, std::uint64_t session_index,
                           const ObjectiveSpec& spec, Normalizer norm);

// Evaluates a batch; sessions run in parallel when OpenMP has more than one
// thread. Gradients of the batch objective are added to `grad` when given.
// Results are bitwise independent of the thread count.
class BatchEvaluator {
 public:
  BatchEvaluator(const Model& m, const kg::KnowledgeGraph& kg);
  ~BatchEvaluator();

  LossBreakdown evaluate(std::span<const EncodedSession* const> sessions,
                         std::span<const std::uint64_t> indices, const ObjectiveSpec& spec,
                         nn::GradBuffer* grad);

 private:
  const Model* model_;
  const kg::KnowledgeGraph* kg_;
  std::vector<std::unique_ptr<Tape>> tapes_;
  std::vector<nn::GradBuffer> scratch_;
};

// Convenience wrappers over BatchEvaluator (sessions indexed 0..n-1).
LossBreakdown evaluate(const Model& m, const kg::KnowledgeGraph& kg,
                       std::span<const EncodedSession> sessions, const ObjectiveSpec& spec,
                       nn::GradBuffer* grad = nullptr);
LossBreakdown loss_joint(const Model& m, const kg::KnowledgeGraph& kg,
                         std::span<const EncodedSession> sessions, ObjectiveSpec spec);
LossBreakdown loss_stage1(const Model& m, const kg::KnowledgeGraph& kg,
                          std::span<const EncodedSession> sessions, ObjectiveSpec spec);
LossBreakdown loss_stage2(const Model& m, const kg::KnowledgeGraph& kg,
                          std::span<const EncodedSession> sessions, ObjectiveSpec spec);
LossBreakdown loss_unsup(const Model& m, const kg::KnowledgeGraph& kg,
                         std::span<const EncodedSession> sessions, int stage, ObjectiveSpec spec);
// Throws ValidationError when a session lacks gold labels.
LossBreakdown loss_sup(const Model& m, const kg::KnowledgeGraph& kg,
                       std::span<const EncodedSession> sessions, ObjectiveSpec spec);

// Sum over positions of KL(q_i || p_i) after folding copy and graph columns
// into token totals. Tokens outside the prior's support are folded into the
// prior's fallback token (UNK, or NULL when generation is ablated).
Var kl_span(Tape& t, const model::SpanDistribution& q, const model::SpanDistribution& p,
            int outcomes);
// Numeric form over explicit probability rows (and an optional category
// pair appended as one more row). Throws ValidationError when p is zero
// where q is positive.
double kl_factorized(std::span<const std::vector<double>> q, std::span<const std::vector<double>> p);

// log sum_{S,A} p(R|S,A) p(S) p(A|S) for the first turn of `s`, by
// exhaustive enumeration. Throws ValidationError beyond 8 outcomes, |S| > 2,
// |A| > 1 or more than 4 categories.
double exact_log_marginal(const Model& m, const kg::KnowledgeGraph& kg, const EncodedSession& s);
// Exact expectation of the single-sample joint loss of the first turn under
// the posterior, by enumerating every posterior draw.
double expected_loss_joint(const Model& m, const kg::KnowledgeGraph& kg, const EncodedSession& s,
                           const ObjectiveSpec& spec);

}  // namespace vrdial::objective

#endif  // VRDIAL_OBJECTIVE_OBJECTIVE_HPP_
