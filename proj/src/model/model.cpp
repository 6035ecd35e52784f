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

#include "vrdial/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "vrdial/error.hpp"

namespace vrdial::model {

// ---------------------------------------------------------------------------
// TokenSpace

int TokenSpace::intern(const std::string& token) {
  const int id = find(token);
  if (id >= 0) return id;
  extra_.push_back(token);
  return size() - 1;
}

int TokenSpace::find(const std::string& token) const {
  const int v = vocab_->find(token);
  if (v >= 0) return v;
  auto it = std::find(extra_.begin(), extra_.end(), token);
  return it == extra_.end() ? -1 : vocab_->size() + static_cast<int>(it - extra_.begin());
}

const std::string& TokenSpace::text(int id) const {
  return id < vocab_->size() ? vocab_->token(id) : extra_.at(id - vocab_->size());
}

std::vector<std::string> TokenSpace::texts(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(text(id));
  return out;
}

SampleMode parse_sample_mode(const std::string& s) {
  if (s == "gumbel_st") return SampleMode::kGumbelST;
  if (s == "gumbel_soft") return SampleMode::kGumbelSoft;
  if (s == "greedy") return SampleMode::kGreedy;
  if (s == "categorical") return SampleMode::kCategorical;
  throw ValidationError("unknown sampling mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Construction

Model::Model(ModelConfig config, Vocabulary vocab, std::vector<std::string> relations)
    : config_(config), vocab_(std::move(vocab)), relations_(std::move(relations)) {
  if (config_.vocab_size == 0) config_.vocab_size = vocab_.size();
  if (config_.vocab_size != vocab_.size()) {
    throw ConfigMismatch("config vocab_size " + std::to_string(config_.vocab_size) +
                         " differs from vocabulary size " + std::to_string(vocab_.size()));
  }
  config_.validate();
  const int e = config_.embed_width;
  const int h = config_.hidden_width;
  const int go = config_.graph_out;
  const int gh = config_.graph_hidden;
  const int v = vocab_.size();
  const int c = config_.action_categories;
  const int kgen = config_.use_context_detector ? v : 1;

  embedding_ = store_.add("embedding", v, e);
  category_table_ = store_.add("category_embedding", c, e);
  context_ = nn::BiGruEncoder::make(store_, "context", e, h);
  span_encoder_ = nn::GruEncoder::make(store_, "span_encoder", e, h);
  response_encoder_ = nn::GruEncoder::make(store_, "response_encoder", e, h);

  auto state_net = [&](const std::string& name, int init_in) {
    return StateNet{nn::Linear::make(store_, name + ".init", init_in, h),
                    nn::GruCell::make(store_, name + ".cell", e, h),
                    nn::Mlp::make(store_, name + ".generate", h, h, v),
                    nn::Linear::make(store_, name + ".copy", h, h)};
  };
  prior_state_ = state_net("prior_state", 2 * h);
  posterior_state_ = state_net("posterior_state", 3 * h);

  rgat_ = nn::Rgat::make(store_, "rgat", e + kg::kEntityTypeCount + 1, gh, go,
                         1 + 2 * static_cast<int>(relations_.size()));

  prior_policy_.category = nn::Linear::make(store_, "prior_action.category", 2 * h + go, c);
  prior_policy_.graph_read = nn::Attention::make(store_, "prior_action.graph_read", go, h, h);
  prior_policy_.keyword_init = nn::Linear::make(store_, "prior_action.init", 2 * h + e, h);
  prior_policy_.cell = nn::GruCell::make(store_, "prior_action.cell", e, h);
  prior_policy_.context = nn::Mlp::make(store_, "prior_action.context", 3 * h, h, kgen);
  prior_policy_.graph_query = nn::Linear::make(store_, "prior_action.graph_query", 2 * h, gh);
  prior_policy_.graph_node =
      nn::Linear::make(store_, "prior_action.graph_node", go, gh, /*bias=*/false);
  prior_policy_.graph_score = store_.add("prior_action.graph_score", gh, 1);

  posterior_policy_.category = nn::Linear::make(store_, "posterior_action.category", 3 * h, c);
  posterior_policy_.keyword_init =
      nn::Linear::make(store_, "posterior_action.init", 3 * h + e, h);
  posterior_policy_.cell = nn::GruCell::make(store_, "posterior_action.cell", e, h);
  posterior_policy_.context = nn::Mlp::make(store_, "posterior_action.context", 3 * h, h, kgen);
  posterior_policy_.copy = nn::Linear::make(store_, "posterior_action.copy", h, h);

  response_.init = nn::Linear::make(store_, "response.init", 3 * h + e, h);
  response_.read_context = nn::Attention::make(store_, "response.read_context", h, h, h);
  response_.read_state = nn::Attention::make(store_, "response.read_state", h, h, h);
  response_.read_action = nn::Attention::make(store_, "response.read_action", h, h, h);
  response_.cell = nn::GruCell::make(store_, "response.cell", 3 * h + e, h);
  response_.generate = nn::Mlp::make(store_, "response.generate", h, h, v);
}

std::vector<std::string> Model::relations_of(const kg::KnowledgeGraph& kg) {
  std::vector<std::string> out;
  for (int r = 0; r < kg.extended_relation_count(); ++r) out.push_back(kg.extended_relation(r));
  return out;
}

void Model::check_graph(const kg::KnowledgeGraph& kg) const {
  if (relations_of(kg) != relations_) {
    throw ConfigMismatch("knowledge graph relations differ from the ones the model was built for");
  }
}

void Model::init(std::uint64_t seed) {
  Rng rng(seed);
  nn::init_uniform(store_, rng);
  auto pad = store_.value(embedding_).subspan(0, config_.embed_width);
  std::fill(pad.begin(), pad.end(), 0.0);
}

void Model::reset_counters() const {
  counters_.prior_state = 0;
  counters_.posterior_state = 0;
  counters_.prior_action = 0;
  counters_.posterior_action = 0;
  counters_.response = 0;
}

EncodedSession Model::encode(const corpus::DialogueSession& session) const {
  EncodedSession out{session.id, TokenSpace(vocab_), {}, session.labeled()};
  auto intern_all = [&](std::span<const std::string> ts) {
    std::vector<int> ids;
    ids.reserve(ts.size());
    for (const auto& x : ts) ids.push_back(out.space.intern(x));
    return ids;
  };
  for (std::size_t i = 0; i < session.turns.size(); ++i) {
    EncodedTurn t;
    t.patient = intern_all(session.turns[i].patient);
    t.physician = intern_all(session.turns[i].physician);
    if (session.states) {
      t.state = intern_all(corpus::fit_span((*session.states)[i].tokens, config_.span_len_S));
    }
    if (session.actions) {
      const auto& a = (*session.actions)[i];
      t.category = std::min(static_cast<int>(a.category), config_.action_categories - 1);
      t.keywords = intern_all(corpus::fit_span(a.keywords, config_.span_len_A));
    }
    out.turns.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Leaves

Var Model::embed(Tape& t, int token, const TokenSpace& space) const {
  if (token == Vocabulary::kPad) return t.zeros(config_.embed_width);
  if (token < 0 || token >= space.size()) {
    throw ShapeError("token id " + std::to_string(token) + " outside the token space");
  }
  return t.embed_row(t.param(embedding_), space.embed_id(token));
}

Var Model::bos_input(Tape& t) const {
  return t.embed_row(t.param(embedding_), Vocabulary::kBos);
}

Span Model::initial_state(Tape& t) const {
  Span s;
  s.tokens.assign(config_.span_len_S, Vocabulary::kNull);
  Var null = t.embed_row(t.param(embedding_), Vocabulary::kNull);
  s.inputs.assign(config_.span_len_S, null);
  return s;
}

Span Model::fixed_span(Tape& t, std::span<const int> tokens, const TokenSpace& space) const {
  Span s;
  s.tokens.assign(tokens.begin(), tokens.end());
  for (int tok : tokens) s.inputs.push_back(embed(t, tok, space));
  return s;
}

EncodedSpan Model::encode_span(Tape& t, Span span) const {
  EncodedSpan out;
  out.encoding = span_encoder_.encode(t, span.inputs);
  out.span = std::move(span);
  return out;
}

Var Model::encode_response(Tape& t, std::span<const int> response, const TokenSpace& space,
                           nn::SpanEncoding* out) const {
  std::vector<Var> inputs;
  for (int tok : response) inputs.push_back(embed(t, tok, space));
  *out = response_encoder_.encode(t, inputs);
  return out->final;
}

Columns Model::generation_columns() const {
  Columns c;
  c.generate = vocab_.size();
  c.token.resize(c.generate);
  for (int i = 0; i < c.generate; ++i) c.token[i] = i;
  return c;
}

// ---------------------------------------------------------------------------
// Context encoder

TurnContext Model::context_encode(Tape& t, std::span<const int> r_prev,
                                  std::span<const int> u_cur, Var carried_summary,
                                  const EncodedSpan& prev_state, const TokenSpace& space) const {
  if (u_cur.empty()) throw ValidationError("context_encode: empty patient utterance");
  TurnContext ctx;
  if (r_prev.empty()) {
    ctx.source_tokens.push_back(Vocabulary::kBos);
  } else {
    ctx.source_tokens.assign(r_prev.begin(), r_prev.end());
  }
  ctx.source_tokens.insert(ctx.source_tokens.end(), u_cur.begin(), u_cur.end());
  std::vector<Var> inputs;
  inputs.reserve(ctx.source_tokens.size());
  for (int tok : ctx.source_tokens) inputs.push_back(embed(t, tok, space));
  if (!carried_summary.valid()) carried_summary = t.zeros(config_.hidden_width);
  auto enc = context_.encode(t, inputs, carried_summary);
  ctx.per_token = enc.per_token;
  ctx.summary = enc.summary;
  ctx.prev_state = prev_state.span;
  ctx.prev_state_encoding = prev_state.encoding;
  return ctx;
}

// ---------------------------------------------------------------------------
// State trackers

SpanDistribution Model::decode_state(Tape& t, const StateNet& net, Var init_input,
                                     Var source_rows, std::vector<int> source_tokens,
                                     const TokenChooser& choose, Span* sample,
                                     const Span& carried, int carried_offset) const {
  SpanDistribution dist;
  dist.columns = generation_columns();
  dist.columns.copy = static_cast<int>(source_tokens.size());
  dist.columns.token.insert(dist.columns.token.end(), source_tokens.begin(), source_tokens.end());
  dist.columns.span_identity = span_identity(t, carried);
  dist.columns.span_offset = dist.columns.generate + carried_offset;
  dist.columns.span_size = static_cast<int>(carried.tokens.size());
  Var hidden = t.tanh(net.init(t, init_input));
  Var copy_proj = t.tanh(nn::rowwise(t, net.copy, source_rows));
  Var input = bos_input(t);
  Span local;
  for (int i = 0; i < config_.span_len_S; ++i) {
    hidden = net.cell.step(t, hidden, input);
    const Var parts[] = {net.generate(t, hidden), t.matvec(copy_proj, hidden)};
    Var row = t.softmax(t.concat(parts));
    dist.rows.push_back(row);
    Choice c = choose(t, i, row, dist.columns);
    local.tokens.push_back(c.token);
    local.inputs.push_back(c.input);
    local.relaxed.push_back(c.relaxed);
    input = c.input;
  }
  if (sample != nullptr) *sample = std::move(local);
  return dist;
}

SpanDistribution Model::prior_state(Tape& t, const TurnContext& ctx, const TokenChooser& choose,
                                    Span* sample) const {
  ++counters_.prior_state;
  const Var init_parts[] = {ctx.summary, ctx.prev_state_encoding.final};
  const Var sources[] = {ctx.per_token, ctx.prev_state_encoding.per_token};
  std::vector<int> tokens = ctx.source_tokens;
  tokens.insert(tokens.end(), ctx.prev_state.tokens.begin(), ctx.prev_state.tokens.end());
  const int offset = static_cast<int>(ctx.source_tokens.size());
  return decode_state(t, prior_state_, t.concat(init_parts), t.vstack(sources), std::move(tokens),
                      choose, sample, ctx.prev_state, offset);
}

SpanDistribution Model::posterior_state(Tape& t, const TurnContext& ctx,
                                        std::span<const int> r_cur, const nn::SpanEncoding& r_enc,
                                        const TokenChooser& choose, Span* sample) const {
  ++counters_.posterior_state;
  if (r_cur.empty()) throw ValidationError("posterior_state: empty response");
  const Var init_parts[] = {ctx.summary, ctx.prev_state_encoding.final, r_enc.final};
  const Var sources[] = {ctx.per_token, ctx.prev_state_encoding.per_token, r_enc.per_token};
  std::vector<int> tokens = ctx.source_tokens;
  tokens.insert(tokens.end(), ctx.prev_state.tokens.begin(), ctx.prev_state.tokens.end());
  tokens.insert(tokens.end(), r_cur.begin(), r_cur.end());
  const int offset = static_cast<int>(ctx.source_tokens.size());
  return decode_state(t, posterior_state_, t.concat(init_parts), t.vstack(sources),
                      std::move(tokens), choose, sample, ctx.prev_state, offset);
}

// ---------------------------------------------------------------------------
// Graph reasoning

GraphContext Model::build_graph(Tape& t, const kg::KnowledgeGraph& kg, std::span<const int> state,
                                const TokenSpace& space) const {
  GraphContext g;
  if (!config_.use_graph_detector) return g;
  std::vector<std::string> words;
  for (int tok : state) {
    if (tok >= Vocabulary::kReserved) words.push_back(space.text(tok));
  }
  const auto seeds = kg::link_entities(words, kg);
  g.subgraph = kg::qsub(kg, seeds, config_.hops, config_.hop_mode);
  const int n = static_cast<int>(g.subgraph.nodes.size());
  if (n == 0) return g;

  Var table = t.param(embedding_);
  std::vector<Var> rows;
  rows.reserve(n);
  for (int j = 0; j < n; ++j) {
    const kg::Entity& ent = kg.entity(g.subgraph.nodes[j]);
    Var mean;
    for (const auto& w : ent.tokens) {
      const int id = vocab_.id(w);
      Var r = id == Vocabulary::kPad ? t.zeros(config_.embed_width) : t.embed_row(table, id);
      mean = mean.valid() ? t.add(mean, r) : r;
    }
    mean = t.scale(mean, 1.0 / static_cast<double>(ent.tokens.size()));
    double extra[kg::kEntityTypeCount + 1] = {0, 0, 0, 0, 0};
    extra[static_cast<int>(ent.type)] = 1.0;
    extra[kg::kEntityTypeCount] =
        std::binary_search(g.subgraph.seeds.begin(), g.subgraph.seeds.end(), g.subgraph.nodes[j])
            ? 1.0
            : 0.0;
    const Var parts[] = {mean, t.constant(extra, kg::kEntityTypeCount + 1)};
    rows.push_back(t.concat(parts));
    if (ent.tokens.size() == 1) {
      const int id = vocab_.find(ent.tokens[0]);
      if (id >= 0) {
        g.column_node.push_back(j);
        g.column_token.push_back(id);
      }
    }
  }
  std::vector<nn::GraphEdge> edges;
  for (const auto& e : g.subgraph.edges) {
    edges.push_back({e.src, e.dst, 1 + 2 * e.relation});
    edges.push_back({e.dst, e.src, 2 + 2 * e.relation});
  }
  auto res = rgat_.encode(t, t.stack(rows), n, edges, config_.hops);
  g.nodes = res.nodes;
  g.keys = prior_policy_.graph_read.prepare(t, g.nodes);
  if (!g.column_node.empty()) {
    Var proj = nn::rowwise(t, prior_policy_.graph_node, g.nodes);
    std::vector<Var> selected;
    for (int j : g.column_node) selected.push_back(t.row(proj, j));
    g.node_proj = t.stack(selected);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Policy networks

Var Model::category_embedding(Tape& t, Var onehot) const {
  return t.matvec_t(t.param(category_table_), onehot);
}

ActionDistribution Model::prior_action(Tape& t, const TurnContext& ctx, const EncodedSpan& state,
                                       const GraphContext& graph,
                                       const CategoryChooser& choose_cat,
                                       const TokenChooser& choose, ActionSample* sample) const {
  ++counters_.prior_action;
  const auto& net = prior_policy_;
  Var hs = state.encoding.final;
  Var hc = ctx.summary;
  Var q = graph.empty() ? t.zeros(config_.graph_out)
                        : net.graph_read.attend(t, hc, graph.keys).context;
  const Var cat_in[] = {hs, hc, q};
  ActionDistribution dist;
  dist.category = t.softmax(net.category(t, t.concat(cat_in)));
  ActionSample local;
  CategoryChoice cc = choose_cat(t, dist.category);
  local.category = cc.index;
  local.category_onehot = cc.onehot;
  local.category_embedding = category_embedding(t, cc.onehot);

  Columns& cols = dist.keywords.columns;
  if (config_.use_context_detector) {
    cols = generation_columns();
  } else {
    cols.generate = 1;
    cols.token = {Vocabulary::kNull};
  }
  const bool with_graph = !graph.empty() && !graph.column_node.empty();
  if (with_graph) {
    cols.graph = static_cast<int>(graph.column_node.size());
    cols.graph_node = graph.column_node;
    cols.token.insert(cols.token.end(), graph.column_token.begin(), graph.column_token.end());
  }
  const Var init_in[] = {hs, hc, local.category_embedding};
  Var hidden = t.tanh(net.keyword_init(t, t.concat(init_in)));
  Var input = bos_input(t);
  for (int i = 0; i < config_.span_len_A; ++i) {
    hidden = net.cell.step(t, hidden, input);
    const Var ctx_in[] = {hs, hc, hidden};
    std::vector<Var> parts = {net.context(t, t.concat(ctx_in))};
    if (with_graph) {
      const Var query_in[] = {hc, hidden};
      Var gq = net.graph_query(t, t.concat(query_in));
      Var pre = t.tanh(t.add_row(graph.node_proj, gq));
      parts.push_back(t.matvec(pre, t.param(net.graph_score)));
    }
    Var row = t.softmax(t.concat(parts));
    dist.keywords.rows.push_back(row);
    Choice c = choose(t, i, row, cols);
    local.keywords.tokens.push_back(c.token);
    local.keywords.inputs.push_back(c.input);
    local.keywords.relaxed.push_back(c.relaxed);
    input = c.input;
  }
  if (sample != nullptr) *sample = std::move(local);
  return dist;
}

ActionDistribution Model::posterior_action(Tape& t, const TurnContext& ctx,
                                           const EncodedSpan& state, std::span<const int> r_cur,
                                           const nn::SpanEncoding& r_enc,
                                           const CategoryChooser& choose_cat,
                                           const TokenChooser& choose,
                                           ActionSample* sample) const {
  ++counters_.posterior_action;
  if (r_cur.empty()) throw ValidationError("posterior_action: empty response");
  const auto& net = posterior_policy_;
  Var hs = state.encoding.final;
  Var hc = ctx.summary;
  Var hr = r_enc.final;
  const Var cat_in[] = {hc, hs, hr};
  ActionDistribution dist;
  dist.category = t.softmax(net.category(t, t.concat(cat_in)));
  ActionSample local;
  CategoryChoice cc = choose_cat(t, dist.category);
  local.category = cc.index;
  local.category_onehot = cc.onehot;
  local.category_embedding = category_embedding(t, cc.onehot);

  Columns& cols = dist.keywords.columns;
  if (config_.use_context_detector) {
    cols = generation_columns();
  } else {
    cols.generate = 1;
    cols.token = {Vocabulary::kNull};
  }
  cols.copy = static_cast<int>(r_cur.size());
  cols.token.insert(cols.token.end(), r_cur.begin(), r_cur.end());
  Var copy_proj = t.tanh(nn::rowwise(t, net.copy, r_enc.per_token));
  const Var init_in[] = {hc, hs, local.category_embedding, hr};
  Var hidden = t.tanh(net.keyword_init(t, t.concat(init_in)));
  Var input = bos_input(t);
  for (int i = 0; i < config_.span_len_A; ++i) {
    hidden = net.cell.step(t, hidden, input);
    const Var ctx_in[] = {hs, hc, hidden};
    const Var parts[] = {net.context(t, t.concat(ctx_in)), t.matvec(copy_proj, hidden)};
    Var row = t.softmax(t.concat(parts));
    dist.keywords.rows.push_back(row);
    Choice c = choose(t, i, row, cols);
    local.keywords.tokens.push_back(c.token);
    local.keywords.inputs.push_back(c.input);
    local.keywords.relaxed.push_back(c.relaxed);
    input = c.input;
  }
  if (sample != nullptr) *sample = std::move(local);
  return dist;
}

ActionSample Model::null_action(Tape& t, const TokenSpace& space) const {
  ActionSample a;
  CategoryChoice cc = forced_category(t, 0);
  a.category = 0;
  a.category_onehot = cc.onehot;
  a.category_embedding = category_embedding(t, cc.onehot);
  std::vector<int> nulls(config_.span_len_A, Vocabulary::kNull);
  a.keywords = fixed_span(t, nulls, space);
  return a;
}

// ---------------------------------------------------------------------------
// Response generator

ResponseDecoder Model::response_start(Tape& t, const TurnContext& ctx, const EncodedSpan& state,
                                      const ActionSample& action,
                                      const EncodedSpan& keywords) const {
  ResponseDecoder dec;
  const Var init_in[] = {ctx.summary, state.encoding.final, action.category_embedding,
                         keywords.encoding.final};
  dec.hidden = t.tanh(response_.init(t, t.concat(init_in)));
  dec.context_keys = response_.read_context.prepare(t, ctx.per_token);
  dec.state_keys = response_.read_state.prepare(t, state.encoding.per_token);
  dec.action_keys = response_.read_action.prepare(t, keywords.encoding.per_token);
  const Var copy_rows[] = {ctx.per_token, state.encoding.per_token, keywords.encoding.per_token};
  dec.copy_keys = t.vstack(copy_rows);
  dec.columns = generation_columns();
  auto& tok = dec.columns.token;
  tok.insert(tok.end(), ctx.source_tokens.begin(), ctx.source_tokens.end());
  tok.insert(tok.end(), state.span.tokens.begin(), state.span.tokens.end());
  tok.insert(tok.end(), keywords.span.tokens.begin(), keywords.span.tokens.end());
  dec.columns.copy = static_cast<int>(tok.size()) - dec.columns.generate;

  Span both = state.span;
  both.tokens.insert(both.tokens.end(), keywords.span.tokens.begin(), keywords.span.tokens.end());
  both.relaxed.resize(state.span.tokens.size());
  both.relaxed.insert(both.relaxed.end(), keywords.span.relaxed.begin(),
                      keywords.span.relaxed.end());
  dec.span_size = static_cast<int>(both.tokens.size());
  dec.span_offset = dec.columns.size() - dec.span_size;
  dec.span_identity = span_identity(t, both);
  return dec;
}

Var Model::span_identity(Tape& t, const Span& span) const {
  bool any_relaxed = false;
  for (Var r : span.relaxed) any_relaxed = any_relaxed || r.valid();
  if (!any_relaxed) return Var{};
  std::vector<Var> rows;
  for (std::size_t i = 0; i < span.tokens.size(); ++i) {
    if (i < span.relaxed.size() && span.relaxed[i].valid()) {
      rows.push_back(span.relaxed[i]);
    } else {
      std::vector<double> onehot(vocab_.size(), 0.0);
      onehot[span.tokens[i] < vocab_.size() ? span.tokens[i] : Vocabulary::kUnk] = 1.0;
      rows.push_back(t.constant(onehot, vocab_.size()));
    }
  }
  return t.stack(rows);
}

Var Model::response_step(Tape& t, ResponseDecoder& dec, int prev_token,
                         const TokenSpace& space) const {
  ++counters_.response;
  const Var parts[] = {response_.read_context.attend(t, dec.hidden, dec.context_keys).context,
                       response_.read_state.attend(t, dec.hidden, dec.state_keys).context,
                       response_.read_action.attend(t, dec.hidden, dec.action_keys).context,
                       embed(t, prev_token, space)};
  dec.hidden = response_.cell.step(t, dec.hidden, t.concat(parts));
  const Var logits[] = {response_.generate(t, dec.hidden), t.matvec(dec.copy_keys, dec.hidden)};
  return t.softmax(t.concat(logits));
}

Var Model::response_token_prob(Tape& t, const ResponseDecoder& dec, Var row, int target,
                               const TokenSpace& space) const {
  const auto& tok = dec.columns.token;
  auto matching = [&](int w) {
    std::vector<int> idx;
    for (int j = 0; j < dec.columns.size(); ++j) {
      if (tok[j] == w) idx.push_back(j);
    }
    return idx;
  };
  auto idx = matching(target);
  if (idx.empty()) {
    target = Vocabulary::kUnk;
    idx = matching(target);
  }
  // Out-of-vocabulary and UNK targets share the UNK identity row, so they
  // keep the fixed column identities.
  if (!dec.span_identity.valid() || target >= space.vocab_size() || target == Vocabulary::kUnk) {
    return t.sum_at(row, idx);
  }
  std::vector<int> fixed;
  for (int j : idx) {
    if (j < dec.span_offset) fixed.push_back(j);
  }
  Var copy = t.matvec_t(dec.span_identity, t.slice(row, dec.span_offset, dec.span_size));
  const int at[] = {target};
  Var from_spans = t.sum_at(copy, at);
  return fixed.empty() ? from_spans : t.add(t.sum_at(row, fixed), from_spans);
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<double> Model::fold_row(const Tape& t, Var row, const Columns& cols, int outcomes) {
  std::vector<double> out(outcomes, 0.0);
  auto v = t.value(row);
  for (int j = 0; j < cols.size(); ++j) out.at(cols.token[j]) += v[j];
  return out;
}

Var Model::fold_to_vocab(Tape& t, Var onehot, const Columns& cols, const TokenSpace& space) const {
  std::vector<int> map(cols.size());
  for (int j = 0; j < cols.size(); ++j) map[j] = space.embed_id(cols.token[j]);
  Var folded = t.fold(onehot, map, vocab_.size());
  if (!cols.span_identity.valid()) return folded;
  // Replace the fixed identity of the span columns by the relaxed one. The
  // correction is zero in value when the span samples are hard.
  const int n = cols.span_size;
  std::vector<double> fixed(static_cast<std::size_t>(n) * vocab_.size(), 0.0);
  for (int k = 0; k < n; ++k) fixed[k * vocab_.size() + map[cols.span_offset + k]] = 1.0;
  Var correction = t.sub(cols.span_identity, t.constant(fixed, n, vocab_.size()));
  return t.add(folded, t.matvec_t(correction, t.slice(onehot, cols.span_offset, n)));
}

Choice Model::sample_token(Tape& t, Var row, const Columns& cols, const Sampler& s,
                           const TokenSpace& space) const {
  auto p = t.value(row);
  switch (s.mode) {
    case SampleMode::kGreedy: {
      auto folded = fold_row(t, row, cols, space.size());
      const int tok = static_cast<int>(std::max_element(folded.begin(), folded.end()) - folded.begin());
      return Choice{tok, embed(t, tok, space)};
    }
    case SampleMode::kCategorical: {
      if (s.rng == nullptr) throw ValidationError("categorical sampling needs an rng");
      const double u = uniform_open(*s.rng);
      double acc = 0.0;
      int j = cols.size() - 1;
      for (int k = 0; k < cols.size(); ++k) {
        acc += p[k];
        if (u < acc) {
          j = k;
          break;
        }
      }
      return Choice{cols.token[j], embed(t, cols.token[j], space)};
    }
    case SampleMode::kGumbelST:
    case SampleMode::kGumbelSoft: {
      if (s.rng == nullptr) throw ValidationError("gumbel sampling needs an rng");
      if (!(s.tau > 0.0)) throw ValidationError("gumbel temperature must be positive");
      const auto noise = nn::gumbel_noise(cols.size(), *s.rng);
      Var soft = t.softmax(t.scale(t.add_const(t.log(row), noise), 1.0 / s.tau));
      auto sv = t.value(soft);
      const int j = static_cast<int>(std::max_element(sv.begin(), sv.end()) - sv.begin());
      Var y = s.mode == SampleMode::kGumbelST ? t.straight_through(soft, j) : soft;
      Var relaxed = fold_to_vocab(t, y, cols, space);
      return Choice{cols.token[j], t.matvec_t(t.param(embedding_), relaxed), relaxed};
    }
  }
  throw ValidationError("unknown sampling mode");
}

CategoryChoice Model::sample_category(Tape& t, Var probs, const Sampler& s) const {
  auto p = t.value(probs);
  const int n = static_cast<int>(p.size());
  switch (s.mode) {
    case SampleMode::kGreedy: {
      const int j = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      return forced_category(t, j);
    }
    case SampleMode::kCategorical: {
      if (s.rng == nullptr) throw ValidationError("categorical sampling needs an rng");
      const double u = uniform_open(*s.rng);
      double acc = 0.0;
      int j = n - 1;
      for (int k = 0; k < n; ++k) {
        acc += p[k];
        if (u < acc) {
          j = k;
          break;
        }
      }
      return forced_category(t, j);
    }
    case SampleMode::kGumbelST:
    case SampleMode::kGumbelSoft: {
      if (s.rng == nullptr) throw ValidationError("gumbel sampling needs an rng");
      if (!(s.tau > 0.0)) throw ValidationError("gumbel temperature must be positive");
      const auto noise = nn::gumbel_noise(n, *s.rng);
      Var soft = t.softmax(t.scale(t.add_const(t.log(probs), noise), 1.0 / s.tau));
      auto sv = t.value(soft);
      const int j = static_cast<int>(std::max_element(sv.begin(), sv.end()) - sv.begin());
      return CategoryChoice{j, s.mode == SampleMode::kGumbelST ? t.straight_through(soft, j) : soft};
    }
  }
  throw ValidationError("unknown sampling mode");
}

Choice Model::forced_token(Tape& t, int token, Var input, const TokenSpace& space) const {
  return Choice{token, input.valid() ? input : embed(t, token, space)};
}

CategoryChoice Model::forced_category(Tape& t, int index) const {
  std::vector<double> onehot(config_.action_categories, 0.0);
  onehot.at(index) = 1.0;
  return CategoryChoice{index, t.constant(onehot, config_.action_categories)};
}

}  // namespace vrdial::model
