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

#include "vrdial/model/infer.hpp"

#include <algorithm>
#include <cstdio>

#include "vrdial/error.hpp"
#include "vrdial/model/beam.hpp"

namespace vrdial::model {

std::string format_path(const ReasoningPath& p) {
  std::string out = p.hops.empty() ? p.seed : p.hops.front().head;
  for (const auto& h : p.hops) {
    out += " ▸ " + h.relation + (h.inverse ? "^-1" : "") + " ▸ " + h.tail;
  }
  char w[32];
  std::snprintf(w, sizeof(w), " (%.2f)", p.weight);
  return out + w;
}

namespace {

ReasoningPath trace_keyword(const kg::KnowledgeGraph& kg, const GraphContext& g, int node,
                            int position, const std::string& keyword, double weight) {
  ReasoningPath p;
  p.position = position;
  p.keyword = keyword;
  p.weight = weight;
  const auto& sub = g.subgraph;
  std::vector<int> sources;
  for (int s : sub.seeds) sources.push_back(sub.local_index(s));
  const auto edges = kg::shortest_path(sub, sources, node);
  auto name = [&](int local) { return kg.entity(sub.nodes[local]).name; };
  if (edges.empty()) {
    p.seed = name(node);
    return p;
  }
  // Walk back from the target to orient each hop.
  std::vector<int> at(edges.size() + 1);
  at.back() = node;
  for (int i = static_cast<int>(edges.size()) - 1; i >= 0; --i) {
    const auto& e = edges[i];
    at[i] = e.src == at[i + 1] ? e.dst : e.src;
  }
  p.seed = name(at[0]);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    PathHop h;
    h.inverse = e.src != at[i];
    h.head = name(at[i]);
    h.tail = name(at[i + 1]);
    h.relation = kg.extended_relation(e.relation);
    p.hops.push_back(std::move(h));
  }
  return p;
}

}  // namespace

TurnPrediction infer_turn(const Model& m, const kg::KnowledgeGraph& kg, const TokenSpace& space,
                          const DialogueHistory& history, std::span<const int> patient) {
  const auto& cfg = m.config();
  Tape t(m.params());
  TurnPrediction out;
  Sampler greedy{SampleMode::kGreedy, 1.0, nullptr};
  TokenChooser choose = [&](Tape& tt, int, Var row, const Columns& cols) {
    return m.sample_token(tt, row, cols, greedy, space);
  };
  CategoryChooser choose_cat = [&](Tape& tt, Var probs) {
    return m.sample_category(tt, probs, greedy);
  };

  Var carried;
  if (!history.summary.empty()) {
    if (static_cast<int>(history.summary.size()) != cfg.hidden_width) {
      throw ShapeError("infer_turn: carried summary width");
    }
    carried = t.constant(history.summary, cfg.hidden_width);
  }
  EncodedSpan prev = m.encode_span(
      t, history.prev_state.empty() ? m.initial_state(t) : m.fixed_span(t, history.prev_state, space));
  TurnContext ctx = m.context_encode(t, history.prev_response, patient, carried, prev, space);
  auto summary = t.value(ctx.summary);
  out.summary.assign(summary.begin(), summary.end());

  EncodedSpan state = m.encode_span(t, m.initial_state(t));
  if (cfg.use_state) {
    Span sp;
    m.prior_state(t, ctx, choose, &sp);
    state = m.encode_span(t, std::move(sp));
  }
  out.state = state.span.tokens;

  ActionSample action;
  if (cfg.use_action) {
    GraphContext g = m.build_graph(t, kg, state.span.tokens, space);
    auto dist = m.prior_action(t, ctx, state, g, choose_cat, choose, &action);
    const Columns& cols = dist.keywords.columns;
    const int first_graph = cols.generate + cols.copy;
    for (std::size_t i = 0; i < dist.keywords.rows.size(); ++i) {
      const int tok = action.keywords.tokens[i];
      auto row = t.value(dist.keywords.rows[i]);
      double w = 0.0;
      int node = -1;
      double best = -1.0;
      for (int j = 0; j < cols.graph; ++j) {
        if (cols.token[first_graph + j] != tok) continue;
        w += row[first_graph + j];
        if (row[first_graph + j] > best) {
          best = row[first_graph + j];
          node = cols.graph_node[j];
        }
      }
      out.keyword_graph_weight.push_back(w);
      if (node >= 0) {
        out.trace.push_back(trace_keyword(kg, g, node, static_cast<int>(i), space.text(tok), w));
      }
    }
    std::stable_sort(out.trace.begin(), out.trace.end(),
                     [](const ReasoningPath& a, const ReasoningPath& b) { return a.weight > b.weight; });
    out.subgraph = std::move(g.subgraph);
  } else {
    action = m.null_action(t, space);
    out.keyword_graph_weight.assign(action.keywords.tokens.size(), 0.0);
  }
  out.category = action.category;
  out.keywords = action.keywords.tokens;

  EncodedSpan kw = m.encode_span(t, action.keywords);
  ResponseDecoder dec = m.response_start(t, ctx, state, action, kw);
  auto step = [&](ResponseDecoder& d, int prev_token) {
    Var row = m.response_step(t, d, prev_token, space);
    return Model::fold_row(t, row, d.columns, space.size());
  };
  BeamResult r = beam_search(dec, step, cfg.beam_width, cfg.max_response_len,
                             corpus::Vocabulary::kBos, corpus::Vocabulary::kEos);
  out.response = std::move(r.tokens);
  out.response_score = r.score;
  return out;
}

void advance(DialogueHistory& h, const TurnPrediction& p, std::span<const int> response) {
  h.summary = p.summary;
  h.prev_state = p.state;
  h.prev_response.assign(response.begin(), response.end());
}

}  // namespace vrdial::model
