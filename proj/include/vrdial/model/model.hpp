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

// The dual-latent dialogue model: context encoder, prior and posterior state
// trackers, prior and posterior policy networks and the copy-augmented
// response generator. Every network is a function from tape variables to
// row-stochastic distributions; sampling strategy is injected by callers.

#ifndef VRDIAL_MODEL_MODEL_HPP_
#define VRDIAL_MODEL_MODEL_HPP_

#include <atomic>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vrdial/corpus/corpus.hpp"
#include "vrdial/kg/graph.hpp"
#include "vrdial/model/config.hpp"
#include "vrdial/nn/layers.hpp"
#include "vrdial/nn/random.hpp"
#include "vrdial/nn/tape.hpp"

namespace vrdial::model {

using nn::Tape;
using nn::Var;
using corpus::Vocabulary;

// Vocabulary extended with session-local out-of-vocabulary tokens, which get
// ids >= vocab size. Such tokens can only be produced by copying.
class TokenSpace {
 public:
  explicit TokenSpace(const Vocabulary& vocab) : vocab_(&vocab) {}

  int intern(const std::string& token);
  int find(const std::string& token) const;  // -1 when unknown
  const std::string& text(int id) const;
  int size() const { return vocab_->size() + static_cast<int>(extra_.size()); }
  int vocab_size() const { return vocab_->size(); }
  // Row of the embedding table used for `id`.
  int embed_id(int id) const { return id < vocab_->size() ? id : Vocabulary::kUnk; }
  std::vector<std::string> texts(std::span<const int> ids) const;

 private:
  const Vocabulary* vocab_;
  std::vector<std::string> extra_;
};

struct EncodedTurn {
  std::vector<int> patient;
  std::vector<int> physician;
  std::optional<std::vector<int>> state;     // gold, fitted to |S|
  std::optional<int> category;               // gold
  std::optional<std::vector<int>> keywords;  // gold, fitted to |A|
};

struct EncodedSession {
  std::string id;
  TokenSpace space;
  std::vector<EncodedTurn> turns;
  bool labeled = false;
};

// Column layout shared by all rows of one span distribution: generation
// columns first (one per vocabulary token, or a single NULL column when the
// context detector is ablated), then copy columns (one per source
// position), then graph columns (one per single-token subgraph entity).
struct Columns {
  std::vector<int> token;  // extended token id behind every column
  int generate = 0;
  int copy = 0;
  int graph = 0;
  std::vector<int> graph_node;  // local subgraph index per graph column
  // Columns [span_offset, span_offset + span_size) copy from a sampled span
  // whose relaxed samples (rows of span_identity) stand in for their token
  // identity in the relaxed output. Invalid when identities are fixed.
  Var span_identity;
  int span_offset = 0;
  int span_size = 0;
  int size() const { return static_cast<int>(token.size()); }
};

struct SpanDistribution {
  Columns columns;
  std::vector<Var> rows;  // one probability row per position
};

struct ActionDistribution {
  Var category;  // action_categories probabilities
  SpanDistribution keywords;
};

// A sampled span. `inputs` are the embeddings fed to downstream networks;
// under straight-through sampling they carry the relaxed gradient path.
struct Span {
  std::vector<int> tokens;
  std::vector<Var> inputs;
  // Vocabulary-space sample per position (forward value one-hot under hard
  // sampling); empty or invalid entries mean the identity is fixed.
  std::vector<Var> relaxed;
};

struct ActionSample {
  int category = 0;
  Var category_onehot;  // forward value is one-hot under hard sampling
  Var category_embedding;
  Span keywords;
};

// One sampling decision: token identity plus its downstream embedding.
struct Choice {
  int token = 0;
  Var input;
  Var relaxed;  // see Span::relaxed
};
struct CategoryChoice {
  int index = 0;
  Var onehot;
};

using TokenChooser = std::function<Choice(Tape&, int position, Var row, const Columns&)>;
using CategoryChooser = std::function<CategoryChoice(Tape&, Var probs)>;

struct TurnContext {
  Var per_token;  // H_t over [R_{t-1}; U_t]
  Var summary;    // h^c_t, carried to the next turn
  std::vector<int> source_tokens;  // tokens behind the rows of per_token
  Span prev_state;
  nn::SpanEncoding prev_state_encoding;
};

struct EncodedSpan {
  Span span;
  nn::SpanEncoding encoding;
};

struct GraphContext {
  kg::LocalSubgraph subgraph;
  Var nodes;  // G, invalid when the subgraph is empty
  std::vector<int> column_node;   // local index per graph column
  std::vector<int> column_token;  // vocabulary id per graph column
  nn::Attention::Keys keys;       // valid when nodes is valid
  Var node_proj;                  // graph-detector projection of the column nodes
  bool empty() const { return !nodes.valid(); }
};

struct ResponseDecoder {
  Var hidden;
  nn::Attention::Keys context_keys;
  nn::Attention::Keys state_keys;
  nn::Attention::Keys action_keys;
  Var copy_keys;  // encodings of W = R_{t-1} o U_t o S o A^k
  Columns columns;
  // Token identity of the state and keyword copy columns as a matrix over
  // the vocabulary, so that copy mass reaches the span samples' gradients.
  // Invalid when every identity is fixed.
  Var span_identity;
  int span_offset = 0;
  int span_size = 0;
};

enum class SampleMode { kGumbelST, kGumbelSoft, kGreedy, kCategorical };
SampleMode parse_sample_mode(const std::string& s);

struct Sampler {
  SampleMode mode = SampleMode::kGreedy;
  double tau = 1.0;
  Rng* rng = nullptr;  // required for stochastic modes
};

struct CallCounters {
  std::atomic<long> prior_state{0};
  std::atomic<long> posterior_state{0};
  std::atomic<long> prior_action{0};
  std::atomic<long> posterior_action{0};
  std::atomic<long> response{0};
};

class Model {
 public:
  // `relations` are the extended relation names of the knowledge graph the
  // model reasons over (fixes the relation-specific graph parameters).
  Model(ModelConfig config, Vocabulary vocab, std::vector<std::string> relations);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  static std::vector<std::string> relations_of(const kg::KnowledgeGraph& kg);
  // Throws ConfigMismatch when `kg` defines different relations.
  void check_graph(const kg::KnowledgeGraph& kg) const;

  void init(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<std::string>& relations() const { return relations_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  CallCounters& counters() const { return counters_; }
  void reset_counters() const;

  EncodedSession encode(const corpus::DialogueSession& session) const;

  // --- leaves -------------------------------------------------------------
  Var embed(Tape& t, int token, const TokenSpace& space) const;
  // S_0: |S| NULL tokens.
  Span initial_state(Tape& t) const;
  Span fixed_span(Tape& t, std::span<const int> tokens, const TokenSpace& space) const;
  EncodedSpan encode_span(Tape& t, Span span) const;
  Var encode_response(Tape& t, std::span<const int> response, const TokenSpace& space,
                      nn::SpanEncoding* out) const;

  // --- networks -----------------------------------------------------------
  TurnContext context_encode(Tape& t, std::span<const int> r_prev, std::span<const int> u_cur,
                             Var carried_summary, const EncodedSpan& prev_state,
                             const TokenSpace& space) const;

  // Autoregressive state decoders. `choose` decides each position's token.
  SpanDistribution prior_state(Tape& t, const TurnContext& ctx, const TokenChooser& choose,
                               Span* sample) const;
  SpanDistribution posterior_state(Tape& t, const TurnContext& ctx, std::span<const int> r_cur,
                                   const nn::SpanEncoding& r_enc, const TokenChooser& choose,
                                   Span* sample) const;

  GraphContext build_graph(Tape& t, const kg::KnowledgeGraph& kg, std::span<const int> state,
                           const TokenSpace& space) const;

  ActionDistribution prior_action(Tape& t, const TurnContext& ctx, const EncodedSpan& state,
                                  const GraphContext& graph, const CategoryChooser& choose_cat,
                                  const TokenChooser& choose, ActionSample* sample) const;
  ActionDistribution posterior_action(Tape& t, const TurnContext& ctx, const EncodedSpan& state,
                                      std::span<const int> r_cur, const nn::SpanEncoding& r_enc,
                                      const CategoryChooser& choose_cat,
                                      const TokenChooser& choose, ActionSample* sample) const;
  // Fixed action used when the policy latent is ablated.
  ActionSample null_action(Tape& t, const TokenSpace& space) const;

  ResponseDecoder response_start(Tape& t, const TurnContext& ctx, const EncodedSpan& state,
                                 const ActionSample& action, const EncodedSpan& keywords) const;
  // Distribution over the next response token given the previous one;
  // advances the decoder.
  Var response_step(Tape& t, ResponseDecoder& dec, int prev_token,
                    const TokenSpace& space) const;
  // Probability of `target` in `row` (a response_step output). Targets
  // outside the columns are scored as UNK.
  Var response_token_prob(Tape& t, const ResponseDecoder& dec, Var row, int target,
                          const TokenSpace& space) const;

  // --- sampling -----------------------------------------------------------
  Choice sample_token(Tape& t, Var row, const Columns& cols, const Sampler& s,
                      const TokenSpace& space) const;
  CategoryChoice sample_category(Tape& t, Var probs, const Sampler& s) const;
  Choice forced_token(Tape& t, int token, Var input, const TokenSpace& space) const;
  CategoryChoice forced_category(Tape& t, int index) const;
  Var category_embedding(Tape& t, Var onehot) const;

  // Token probabilities per row (copy and graph columns folded into their
  // token), over `space.size()` outcomes.
  static std::vector<double> fold_row(const Tape& t, Var row, const Columns& cols,
                                      int outcomes);

 private:
  struct StateNet {
    nn::Linear init;
    nn::GruCell cell;
    nn::Mlp generate;
    nn::Linear copy;
  };
  struct PriorPolicy {
    nn::Linear category;
    nn::Attention graph_read;
    nn::Linear keyword_init;
    nn::GruCell cell;
    nn::Mlp context;
    nn::Linear graph_query;  // [h^c ; b] part of the graph detector
    nn::Linear graph_node;   // g_j part of the graph detector
    int graph_score = -1;    // output vector of the graph detector
  };
  struct PosteriorPolicy {
    nn::Linear category;
    nn::Linear keyword_init;
    nn::GruCell cell;
    nn::Mlp context;
    nn::Linear copy;
  };
  struct ResponseNet {
    nn::Linear init;
    nn::Attention read_context;
    nn::Attention read_state;
    nn::Attention read_action;
    nn::GruCell cell;
    nn::Mlp generate;
  };

  SpanDistribution decode_state(Tape& t, const StateNet& net, Var init_input,
                                Var source_rows, std::vector<int> source_tokens,
                                const TokenChooser& choose, Span* sample,
                                const Span& carried, int carried_offset) const;
  // Stacked vocabulary-space identities of `span`; invalid when no position
  // has a relaxed sample.
  Var span_identity(Tape& t, const Span& span) const;
  Var generation_logits(Tape& t, const nn::Mlp& mlp, Var x) const;
  Columns generation_columns() const;
  Var bos_input(Tape& t) const;
  Var fold_to_vocab(Tape& t, Var onehot, const Columns& cols, const TokenSpace& space) const;

  ModelConfig config_;
  Vocabulary vocab_;
  std::vector<std::string> relations_;
  nn::ParamStore store_;
  int embedding_ = -1;
  int category_table_ = -1;
  nn::BiGruEncoder context_;
  nn::GruEncoder span_encoder_;
  nn::GruEncoder response_encoder_;
  StateNet prior_state_;
  StateNet posterior_state_;
  nn::Rgat rgat_;
  PriorPolicy prior_policy_;
  PosteriorPolicy posterior_policy_;
  ResponseNet response_;
  mutable CallCounters counters_;
};

}  // namespace vrdial::model

#endif  // VRDIAL_MODEL_MODEL_HPP_
