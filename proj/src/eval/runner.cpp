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

#include "vrdial/eval/runner.hpp"

#include <algorithm>
#include <map>
#include <ostream>

#include "vrdial/error.hpp"
#include "vrdial/model/infer.hpp"

namespace vrdial::eval {

using corpus::Vocabulary;

namespace {

Sentence texts(const model::TokenSpace& space, std::span<const int> ids, bool drop_null) {
  Sentence out;
  for (int id : ids) {
    if (drop_null && id == Vocabulary::kNull) continue;
    out.push_back(space.text(id));
  }
  return out;
}

std::string csv_field(const Sentence& s) {
  std::string text = corpus::join(s);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Hits {
  long correct = 0;
  long total = 0;
};

Hits session_accuracy(const model::Model& m, const kg::KnowledgeGraph& kg,
                      const corpus::DialogueSession& session, bool gold_latents) {
  using namespace model;
  const auto& cfg = m.config();
  const EncodedSession s = m.encode(session);
  if (gold_latents && !s.labeled) throw ValidationError("teacher_forced_accuracy: unlabeled session");
  Sampler greedy{SampleMode::kGreedy, 1.0, nullptr};
  TokenChooser choose = [&](Tape& t, int, Var row, const Columns& cols) {
    return m.sample_token(t, row, cols, greedy, s.space);
  };
  CategoryChooser choose_cat = [&](Tape& t, Var p) { return m.sample_category(t, p, greedy); };
  Hits hits;
  std::vector<double> summary;
  std::vector<int> prev_state;
  for (std::size_t ti = 0; ti < s.turns.size(); ++ti) {
    const auto& turn = s.turns[ti];
    Tape t(m.params());
    Var carried = summary.empty() ? Var{} : t.constant(summary, cfg.hidden_width);
    EncodedSpan prev = m.encode_span(
        t, prev_state.empty() ? m.initial_state(t) : m.fixed_span(t, prev_state, s.space));
    std::vector<int> r_prev = ti > 0 ? s.turns[ti - 1].physician : std::vector<int>{};
    TurnContext ctx = m.context_encode(t, r_prev, turn.patient, carried, prev, s.space);
    auto sv = t.value(ctx.summary);
    summary.assign(sv.begin(), sv.end());

    EncodedSpan state = m.encode_span(t, m.initial_state(t));
    if (cfg.use_state) {
      if (gold_latents) {
        state = m.encode_span(t, m.fixed_span(t, *turn.state, s.space));
      } else {
        Span sp;
        m.prior_state(t, ctx, choose, &sp);
        state = m.encode_span(t, std::move(sp));
      }
    }
    prev_state = state.span.tokens;
    ActionSample action;
    if (!cfg.use_action) {
      action = m.null_action(t, s.space);
    } else if (gold_latents) {
      action.category = *turn.category;
      auto cc = m.forced_category(t, action.category);
      action.category_onehot = cc.onehot;
      action.category_embedding = m.category_embedding(t, cc.onehot);
      action.keywords = m.fixed_span(t, *turn.keywords, s.space);
    } else {
      GraphContext g = m.build_graph(t, kg, state.span.tokens, s.space);
      m.prior_action(t, ctx, state, g, choose_cat, choose, &action);
    }
    EncodedSpan kw = m.encode_span(t, action.keywords);
    ResponseDecoder dec = m.response_start(t, ctx, state, action, kw);
    int prev_token = Vocabulary::kBos;
    std::vector<int> targets = turn.physician;
    targets.push_back(Vocabulary::kEos);
    for (int target : targets) {
      Var row = m.response_step(t, dec, prev_token, s.space);
      auto folded = Model::fold_row(t, row, dec.columns, s.space.size());
      const int best =
          static_cast<int>(std::max_element(folded.begin(), folded.end()) - folded.begin());
      const bool reachable =
          std::find(dec.columns.token.begin(), dec.columns.token.end(), target) != dec.columns.token.end();
      hits.correct += best == (reachable ? target : Vocabulary::kUnk) ? 1 : 0;
      ++hits.total;
      prev_token = target;
    }
  }
  return hits;
}

}  // namespace

std::vector<TurnOutput> predict_corpus(const model::Model& m, const kg::KnowledgeGraph& kg,
                                       std::span<const corpus::DialogueSession> sessions) {
  const int n = static_cast<int>(sessions.size());
  std::vector<std::vector<TurnOutput>> per(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      const auto& session = sessions[i];
      const model::EncodedSession s = m.encode(session);
      model::DialogueHistory h;
      for (std::size_t ti = 0; ti < s.turns.size(); ++ti) {
        const auto& turn = s.turns[ti];
        auto pred = model::infer_turn(m, kg, s.space, h, turn.patient);
        TurnOutput o;
        o.session = s.id;
        o.turn = static_cast<int>(ti);
        o.hypothesis = texts(s.space, pred.response, false);
        o.reference = session.turns[ti].physician;
        o.state = texts(s.space, pred.state, false);
        o.keywords = texts(s.space, pred.keywords, false);
        o.category = pred.category;
        if (turn.state) o.gold_state = texts(s.space, *turn.state, false);
        o.gold_category = turn.category;
        if (turn.keywords) o.gold_keywords = texts(s.space, *turn.keywords, false);
        per[i].push_back(std::move(o));
        model::advance(h, pred, turn.physician);
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(e);
  }
  std::vector<TurnOutput> out;
  for (auto& v : per) {
    for (auto& o : v) out.push_back(std::move(o));
  }
  return out;
}

EmbeddingTable model_embeddings(const model::Model& m) {
  EmbeddingTable t;
  const auto& store = m.params();
  const int e = store.find("embedding");
  const int width = store.cols(e);
  auto v = store.value(e);
  for (int id = Vocabulary::kReserved; id < m.vocab().size(); ++id) {
    t.add(m.vocab().token(id), std::vector<double>(v.begin() + id * width, v.begin() + (id + 1) * width));
  }
  return t;
}

EvalReport score_outputs(std::span<const TurnOutput> outputs, const kg::KnowledgeGraph& kg,
                         const EmbeddingTable& table) {
  std::vector<Sentence> hyps;
  std::vector<Sentence> refs;
  for (const auto& o : outputs) {
    hyps.push_back(o.hypothesis);
    refs.push_back(o.reference);
  }
  return score(hyps, refs, kg, table);
}

double state_token_f1(std::span<const TurnOutput> outputs) {
  const std::string null(corpus::kNullToken);
  double tp = 0, pred = 0, gold = 0;
  for (const auto& o : outputs) {
    if (!o.gold_state) continue;
    std::map<std::string, int> g;
    for (const auto& tok : *o.gold_state) {
      if (tok != null) {
        ++g[tok];
        ++gold;
      }
    }
    for (const auto& tok : o.state) {
      if (tok == null) continue;
      ++pred;
      auto it = g.find(tok);
      if (it != g.end() && it->second > 0) {
        --it->second;
        ++tp;
      }
    }
  }
  const double p = pred > 0 ? tp / pred : 0.0;
  const double r = gold > 0 ? tp / gold : 0.0;
  return harmonic(p, r);
}

double category_accuracy(std::span<const TurnOutput> outputs) {
  double ok = 0, n = 0;
  for (const auto& o : outputs) {
    if (!o.gold_category) continue;
    ++n;
    if (o.category == *o.gold_category) ++ok;
  }
  return n > 0 ? ok / n : 0.0;
}

double teacher_forced_accuracy(const model::Model& m, const kg::KnowledgeGraph& kg,
                               std::span<const corpus::DialogueSession> sessions,
                               bool gold_latents) {
  const int n = static_cast<int>(sessions.size());
  std::vector<Hits> per(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      per[i] = session_accuracy(m, kg, sessions[i], gold_latents);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(e);
  }
  Hits all;
  for (const auto& h : per) {
    all.correct += h.correct;
    all.total += h.total;
  }
  return all.total > 0 ? static_cast<double>(all.correct) / static_cast<double>(all.total) : 0.0;
}

void write_csv(std::ostream& out, std::span<const TurnOutput> outputs) {
  out << "session,turn,hypothesis,reference,state,category,keywords\n";
  for (const auto& o : outputs) {
    out << o.session << ',' << o.turn << ',' << csv_field(o.hypothesis) << ','
        << csv_field(o.reference) << ',' << csv_field(o.state) << ','
        << corpus::to_string(static_cast<corpus::ActionCategory>(
               std::clamp(o.category, 0, corpus::kActionCategoryCount - 1)))
        << ',' << csv_field(o.keywords) << '\n';
  }
}

}  // namespace vrdial::eval
