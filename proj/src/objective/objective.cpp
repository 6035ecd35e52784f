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

#include "vrdial/objective/objective.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vrdial/error.hpp"

namespace vrdial::objective {

using corpus::Vocabulary;
using model::ActionDistribution;
using model::ActionSample;
using model::CategoryChoice;
using model::CategoryChooser;
using model::Choice;
using model::Columns;
using model::EncodedSpan;
using model::EncodedTurn;
using model::GraphContext;
using model::Sampler;
using model::Span;
using model::SpanDistribution;
using model::TokenChooser;
using model::TokenSpace;
using model::TurnContext;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent rng streams per sampling site.
enum Site : std::uint64_t { kPosteriorState = 0, kPosteriorAction = 1, kPriorAction = 2, kPriorState = 3 };

Var sum_scalars(Tape& t, const std::vector<Var>& xs) {
  if (xs.empty()) return t.scalar_const(0.0);
  if (xs.size() == 1) return xs[0];
  return t.sum(t.concat(xs));
}

std::vector<int> columns_of(const Columns& cols, int token) {
  std::vector<int> idx;
  for (int j = 0; j < cols.size(); ++j) {
    if (cols.token[j] == token) idx.push_back(j);
  }
  return idx;
}

// log of the folded probability of `tokens` under `dist`; invalid when some
// token has no column.
Var span_log_prob(Tape& t, const SpanDistribution& dist, std::span<const int> tokens) {
  std::vector<Var> terms;
  for (std::size_t i = 0; i < dist.rows.size(); ++i) {
    auto idx = columns_of(dist.columns, tokens[i]);
    if (idx.empty()) return Var{};
    terms.push_back(t.log(t.sum_at(dist.rows[i], idx)));
  }
  return sum_scalars(t, terms);
}

double path_log_prob(const Tape& t, const SpanDistribution& dist, std::span<const int> tokens,
                     int outcomes) {
  double lp = 0.0;
  for (std::size_t i = 0; i < dist.rows.size(); ++i) {
    lp += std::log(model::Model::fold_row(t, dist.rows[i], dist.columns, outcomes)[tokens[i]]);
  }
  return lp;
}

struct StateDraw {
  SpanDistribution dist;
  EncodedSpan enc;
  double log_q = 0.0;
};

struct ActionDraw {
  ActionDistribution dist;
  ActionSample action;
  EncodedSpan keywords;
  double log_q = 0.0;
};

struct TurnResult {
  Var total;
  double reconstruction = 0.0;
  double kl_state = 0.0;
  double kl_category = 0.0;
  double kl_keywords = 0.0;
  EncodedSpan carry;  // posterior state handed to the next turn
  double log_q = 0.0;
};

struct SupResult {
  Var total;  // invalid when infinite
  double value = 0.0;
};

class TurnRunner {
 public:
  TurnRunner(const Model& m, Tape& t, const kg::KnowledgeGraph& kg, const model::EncodedSession& s,
             const EncodedTurn& turn, const nn::SpanEncoding& r_enc, const EncodedSpan& null_state,
             const ObjectiveSpec& spec, std::uint64_t index, std::uint64_t turn_index)
      : m_(m), t_(t), kg_(kg), space_(s.space), turn_(turn), r_enc_(r_enc),
        null_state_(null_state), spec_(spec), index_(index), turn_index_(turn_index),
        cfg_(m.config()) {}

  TurnResult unsup(const TurnContext& ctx, LossKind kind, const TurnForcing* force) {
    TurnResult out;
    std::vector<Var> terms;
    auto add_kl_state = [&](const StateDraw& q, const SpanDistribution& p) {
      if (!cfg_.use_state) return;
      Var kl = kl_span(t_, q.dist, p, space_.size());
      out.kl_state += t_.item(kl);
      terms.push_back(weighted(kl));
    };
    auto add_kl_action = [&](const ActionDraw& q, const ActionDistribution& p) {
      if (!cfg_.use_action) return;
      std::vector<int> cats(cfg_.action_categories);
      std::iota(cats.begin(), cats.end(), 0);
      Var kc = t_.kl(q.dist.category, p.category, cats);
      Var kk = kl_span(t_, q.dist.keywords, p.keywords, space_.size());
      out.kl_category += t_.item(kc);
      out.kl_keywords += t_.item(kk);
      terms.push_back(weighted(kc));
      terms.push_back(weighted(kk));
    };
    auto add_recon = [&](const EncodedSpan& state, const ActionDraw& a) {
      Var r = reconstruction(ctx, state, a);
      out.reconstruction += t_.item(r);
      terms.push_back(r);
    };

    switch (kind) {
      case LossKind::kJoint: {
        StateDraw sq = posterior_state(ctx, force);
        if (cfg_.use_state) add_kl_state(sq, prior_state_on(ctx, sq.enc.span));
        ActionDraw aq = posterior_action(ctx, sq.enc, force);
        if (cfg_.use_action) {
          const EncodedSpan* cond = &sq.enc;
          StateDraw sp;
          if (spec_.prior_state_for_prior_action && cfg_.use_state) {
            sp = prior_state_draw(ctx);
            cond = &sp.enc;
          }
          GraphContext g = m_.build_graph(t_, kg_, cond->span.tokens, space_);
          add_kl_action(aq, prior_action_on(ctx, *cond, g, aq.action));
        }
        add_recon(sq.enc, aq);
        out.carry = sq.enc;
        out.log_q = sq.log_q + aq.log_q;
        break;
      }
      case LossKind::kStage1:
      case LossKind::kUnsupStage1: {
        StateDraw sq = posterior_state(ctx, force);
        if (cfg_.use_state) add_kl_state(sq, prior_state_on(ctx, sq.enc.span));
        GraphContext g = m_.build_graph(t_, kg_, sq.enc.span.tokens, space_);
        ActionDraw ap = prior_action_draw(ctx, sq.enc, g);
        add_recon(sq.enc, ap);
        out.carry = sq.enc;
        out.log_q = sq.log_q;
        break;
      }
      case LossKind::kStage2: {
        StateDraw sq = posterior_state(ctx, force);
        stage2_terms(ctx, force, add_kl_action, add_recon);
        out.carry = sq.enc;
        out.log_q = sq.log_q;
        break;
      }
      case LossKind::kUnsupStage2: {
        StateDraw sq = posterior_state(ctx, force);
        if (cfg_.use_state) add_kl_state(sq, prior_state_on(ctx, sq.enc.span));
        GraphContext g = m_.build_graph(t_, kg_, sq.enc.span.tokens, space_);
        ActionDraw ap = prior_action_draw(ctx, sq.enc, g);
        add_recon(sq.enc, ap);
        stage2_terms(ctx, force, add_kl_action, add_recon);
        out.carry = sq.enc;
        out.log_q = sq.log_q;
        break;
      }
      case LossKind::kNone:
        break;
    }
    out.total = sum_scalars(t_, terms);
    return out;
  }

  SupResult sup(const TurnContext& ctx) {
    SupResult out;
    std::vector<Var> terms;
    bool finite = true;
    auto add_log = [&](Var lp) {
      if (!lp.valid()) {
        finite = false;
        return;
      }
      terms.push_back(t_.scale(lp, -1.0));
    };

    EncodedSpan state = null_state_;
    if (cfg_.use_state) {
      if (!turn_.state) throw ValidationError("loss_sup: turn has no gold state");
      Span gold = m_.fixed_span(t_, *turn_.state, space_);
      auto ps = m_.prior_state(t_, ctx, forced(gold), nullptr);
      auto qs = m_.posterior_state(t_, ctx, turn_.physician, r_enc_, forced(gold), nullptr);
      add_log(span_log_prob(t_, ps, gold.tokens));
      add_log(span_log_prob(t_, qs, gold.tokens));
      state = m_.encode_span(t_, gold);
    }
    ActionDraw a;
    if (cfg_.use_action) {
      if (!turn_.category || !turn_.keywords) throw ValidationError("loss_sup: turn has no gold action");
      a.action.category = *turn_.category;
      CategoryChoice cc = m_.forced_category(t_, a.action.category);
      a.action.category_onehot = cc.onehot;
      a.action.category_embedding = m_.category_embedding(t_, cc.onehot);
      a.action.keywords = m_.fixed_span(t_, *turn_.keywords, space_);
      GraphContext g = m_.build_graph(t_, kg_, state.span.tokens, space_);
      auto pa = m_.prior_action(t_, ctx, state, g, forced(a.action), forced(a.action.keywords),
                                nullptr);
      auto qa = m_.posterior_action(t_, ctx, state, turn_.physician, r_enc_, forced(a.action),
                                    forced(a.action.keywords), nullptr);
      for (const auto* d : {&pa, &qa}) {
        const int c[] = {a.action.category};
        add_log(t_.log(t_.sum_at(d->category, c)));
        add_log(span_log_prob(t_, d->keywords, a.action.keywords.tokens));
      }
    } else {
      a.action = m_.null_action(t_, space_);
    }
    a.keywords = m_.encode_span(t_, a.action.keywords);
    terms.push_back(reconstruction(ctx, state, a));
    if (!finite) {
      out.value = kInf;
      return out;
    }
    out.total = sum_scalars(t_, terms);
    out.value = t_.item(out.total);
    if (!std::isfinite(out.value)) out.total = Var{};
    return out;
  }

 private:
  Var weighted(Var kl) const { return spec_.kl_weight == 1.0 ? kl : t_.scale(kl, spec_.kl_weight); }

  template <class KlFn, class ReconFn>
  void stage2_terms(const TurnContext& ctx, const TurnForcing* force, KlFn& add_kl_action,
                    ReconFn& add_recon) {
    StateDraw sp = cfg_.use_state ? prior_state_draw(ctx) : StateDraw{{}, null_state_, 0.0};
    ActionDraw aq = posterior_action(ctx, sp.enc, force);
    if (cfg_.use_action) {
      GraphContext g = m_.build_graph(t_, kg_, sp.enc.span.tokens, space_);
      add_kl_action(aq, prior_action_on(ctx, sp.enc, g, aq.action));
    }
    add_recon(sp.enc, aq);
  }

  Rng rng(Site site) const {
    return Rng(derive_seed(spec_.seed, {spec_.step, index_, turn_index_, site}));
  }

  TokenChooser sampling(Sampler& s) const {
    return [this, &s](Tape& t, int, Var row, const Columns& cols) {
      return m_.sample_token(t, row, cols, s, space_);
    };
  }
  CategoryChooser sampling_category(Sampler& s) const {
    return [this, &s](Tape& t, Var probs) { return m_.sample_category(t, probs, s); };
  }
  TokenChooser forced(const Span& span) const {
    return [&span](Tape&, int i, Var, const Columns&) {
      return Choice{span.tokens[i], span.inputs[i],
                    static_cast<std::size_t>(i) < span.relaxed.size() ? span.relaxed[i] : Var{}};
    };
  }
  TokenChooser forced_ids(const std::vector<int>& ids) const {
    return [this, &ids](Tape& t, int i, Var, const Columns&) {
      return m_.forced_token(t, ids.at(i), Var{}, space_);
    };
  }
  CategoryChooser forced(const ActionSample& a) const {
    return [&a](Tape&, Var) { return CategoryChoice{a.category, a.category_onehot}; };
  }

  StateDraw posterior_state(const TurnContext& ctx, const TurnForcing* force) {
    StateDraw d;
    if (!cfg_.use_state) {
      d.enc = null_state_;
      return d;
    }
    Rng r = rng(kPosteriorState);
    Sampler s{spec_.mode, spec_.tau, &r};
    Span sp;
    d.dist = m_.posterior_state(t_, ctx, turn_.physician, r_enc_,
                                force ? forced_ids(force->state) : sampling(s), &sp);
    d.log_q = path_log_prob(t_, d.dist, sp.tokens, space_.size());
    d.enc = m_.encode_span(t_, std::move(sp));
    return d;
  }

  StateDraw prior_state_draw(const TurnContext& ctx) {
    StateDraw d;
    Rng r = rng(kPriorState);
    Sampler s{spec_.mode, spec_.tau, &r};
    Span sp;
    d.dist = m_.prior_state(t_, ctx, sampling(s), &sp);
    d.enc = m_.encode_span(t_, std::move(sp));
    return d;
  }

  SpanDistribution prior_state_on(const TurnContext& ctx, const Span& span) {
    return m_.prior_state(t_, ctx, forced(span), nullptr);
  }

  ActionDraw posterior_action(const TurnContext& ctx, const EncodedSpan& state,
                              const TurnForcing* force) {
    ActionDraw d;
    if (!cfg_.use_action) {
      d.action = m_.null_action(t_, space_);
      d.keywords = m_.encode_span(t_, d.action.keywords);
      return d;
    }
    Rng r = rng(kPosteriorAction);
    Sampler s{spec_.mode, spec_.tau, &r};
    CategoryChooser cat;
    if (force) {
      const int c = force->category;
      cat = [this, c](Tape& t, Var) { return m_.forced_category(t, c); };
    } else {
      cat = sampling_category(s);
    }
    d.dist = m_.posterior_action(t_, ctx, state, turn_.physician, r_enc_, cat,
                                 force ? forced_ids(force->keywords) : sampling(s), &d.action);
    d.log_q = std::log(t_.value(d.dist.category)[d.action.category]) +
              path_log_prob(t_, d.dist.keywords, d.action.keywords.tokens, space_.size());
    d.keywords = m_.encode_span(t_, d.action.keywords);
    return d;
  }

  ActionDraw prior_action_draw(const TurnContext& ctx, const EncodedSpan& state,
                               const GraphContext& g) {
    ActionDraw d;
    if (!cfg_.use_action) {
      d.action = m_.null_action(t_, space_);
      d.keywords = m_.encode_span(t_, d.action.keywords);
      return d;
    }
    Rng r = rng(kPriorAction);
    Sampler s{spec_.mode, spec_.tau, &r};
    d.dist = m_.prior_action(t_, ctx, state, g, sampling_category(s), sampling(s), &d.action);
    d.keywords = m_.encode_span(t_, d.action.keywords);
    return d;
  }

  ActionDistribution prior_action_on(const TurnContext& ctx, const EncodedSpan& state,
                                     const GraphContext& g, const ActionSample& a) {
    return m_.prior_action(t_, ctx, state, g, forced(a), forced(a.keywords), nullptr);
  }

  Var reconstruction(const TurnContext& ctx, const EncodedSpan& state, const ActionDraw& a) {
    auto dec = m_.response_start(t_, ctx, state, a.action, a.keywords);
    std::vector<Var> terms;
    int prev = Vocabulary::kBos;
    auto step = [&](int target) {
      Var row = m_.response_step(t_, dec, prev, space_);
      Var p = m_.response_token_prob(t_, dec, row, target, space_);
      terms.push_back(t_.scale(t_.log(p), -1.0));
      prev = target;
    };
    for (int tok : turn_.physician) step(tok);
    step(Vocabulary::kEos);
    return sum_scalars(t_, terms);
  }

  const Model& m_;
  Tape& t_;
  const kg::KnowledgeGraph& kg_;
  const TokenSpace& space_;
  const EncodedTurn& turn_;
  const nn::SpanEncoding& r_enc_;
  const EncodedSpan& null_state_;
  const ObjectiveSpec& spec_;
  std::uint64_t index_;
  std::uint64_t turn_index_;
  const model::ModelConfig& cfg_;
};

}  // namespace

// ---------------------------------------------------------------------------
// KL

Var kl_span(Tape& t, const SpanDistribution& q, const SpanDistribution& p, int outcomes) {
  if (q.rows.size() != p.rows.size()) throw ShapeError("kl_span: span lengths differ");
  std::vector<char> supported(outcomes, 0);
  for (int tok : p.columns.token) supported.at(tok) = 1;
  int fallback = -1;
  if (supported[Vocabulary::kUnk]) {
    fallback = Vocabulary::kUnk;
  } else if (supported[Vocabulary::kNull]) {
    fallback = Vocabulary::kNull;
  } else {
    throw ValidationError("kl_span: prior supports neither UNK nor NULL");
  }
  std::vector<int> qmap(q.columns.token);
  for (int& tok : qmap) {
    if (!supported.at(tok)) tok = fallback;
  }
  std::vector<int> support;
  for (int k = 0; k < outcomes; ++k) {
    if (supported[k]) support.push_back(k);
  }
  std::vector<Var> terms;
  for (std::size_t i = 0; i < q.rows.size(); ++i) {
    Var qf = t.fold(q.rows[i], qmap, outcomes);
    Var pf = t.fold(p.rows[i], p.columns.token, outcomes);
    terms.push_back(t.kl(qf, pf, support));
  }
  return sum_scalars(t, terms);
}

double kl_factorized(std::span<const std::vector<double>> q, std::span<const std::vector<double>> p) {
  if (q.size() != p.size()) throw ShapeError("kl_factorized: row counts differ");
  nn::ParamStore empty;
  Tape t(empty);
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i].size() != p[i].size()) throw ShapeError("kl_factorized: row widths differ");
    const int n = static_cast<int>(q[i].size());
    std::vector<int> support;
    for (int k = 0; k < n; ++k) {
      if (q[i][k] > 0.0 && !(p[i][k] > 0.0)) {
        throw ValidationError("kl_factorized: q has mass where p is zero");
      }
      if (p[i][k] > 0.0) support.push_back(k);
    }
    total += t.item(t.kl(t.constant(q[i], n), t.constant(p[i], n), support));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Session objective

SessionTerms session_terms(const Model& m, Tape& t, const kg::KnowledgeGraph& kg,
                           const EncodedSession& s, std::uint64_t session_index,
                           const ObjectiveSpec& spec, Normalizer norm) {
  if (s.turns.empty()) throw ValidationError("session '" + s.id + "' has no turns");
  SessionTerms out;
  LossBreakdown& b = out.sums;
  const bool unsup = spec.unsup != LossKind::kNone;
  const bool sup = spec.supervised && s.labeled;
  const EncodedSpan null_state = m.encode_span(t, m.initial_state(t));
  std::vector<Var> unsup_terms;
  std::vector<Var> sup_terms;
  EncodedSpan prev_q = null_state;
  EncodedSpan prev_gold = null_state;
  Var carried;
  const std::vector<int> none;
  for (std::size_t ti = 0; ti < s.turns.size(); ++ti) {
    const EncodedTurn& turn = s.turns[ti];
    const auto& r_prev = ti == 0 ? none : s.turns[ti - 1].physician;
    if (turn.physician.empty()) throw ValidationError("session '" + s.id + "': empty response");
    TurnContext ctx =
        m.context_encode(t, r_prev, turn.patient, carried, unsup ? prev_q : prev_gold, s.space);
    carried = ctx.summary;
    nn::SpanEncoding r_enc;
    m.encode_response(t, turn.physician, s.space, &r_enc);
    TurnRunner run(m, t, kg, s, turn, r_enc, null_state, spec, session_index, ti);
    if (unsup) {
      TurnResult r = run.unsup(ctx, spec.unsup, ti == 0 ? spec.forcing : nullptr);
      unsup_terms.push_back(r.total);
      b.reconstruction += r.reconstruction;
      b.kl_state += r.kl_state;
      b.kl_action_category += r.kl_category;
      b.kl_action_keywords += r.kl_keywords;
      b.total += t.item(r.total);
      ++b.turns;
      if (ti == 0) out.log_q_path = r.log_q;
      prev_q = r.carry;
    }
    if (sup) {
      TurnContext cs = ctx;
      cs.prev_state = prev_gold.span;
      cs.prev_state_encoding = prev_gold.encoding;
      SupResult r = run.sup(cs);
      if (r.total.valid()) {
        sup_terms.push_back(r.total);
      } else {
        b.finite = false;
      }
      b.supervised += r.value;
      ++b.supervised_turns;
      if (m.config().use_state) {
        prev_gold = m.encode_span(t, m.fixed_span(t, *turn.state, s.space));
      }
    }
  }
  std::vector<Var> parts;
  if (!unsup_terms.empty()) {
    parts.push_back(t.scale(sum_scalars(t, unsup_terms), 1.0 / norm.unsup_turns));
  }
  if (!sup_terms.empty()) {
    parts.push_back(t.scale(sum_scalars(t, sup_terms), spec.sup_weight / norm.sup_turns));
  }
  out.objective = sum_scalars(t, parts);
  if (!std::isfinite(b.total)) b.finite = false;
  return out;
}

// ---------------------------------------------------------------------------
// Batches

BatchEvaluator::BatchEvaluator(const Model& m, const kg::KnowledgeGraph& kg)
    : model_(&m), kg_(&kg) {}

BatchEvaluator::~BatchEvaluator() = default;

LossBreakdown BatchEvaluator::evaluate(std::span<const EncodedSession* const> sessions,
                                       std::span<const std::uint64_t> indices,
                                       const ObjectiveSpec& spec, nn::GradBuffer* grad) {
  if (sessions.size() != indices.size()) throw ShapeError("evaluate: index count mismatch");
  const int n = static_cast<int>(sessions.size());
  Normalizer norm{0.0, 0.0};
  for (const auto* s : sessions) {
    if (spec.unsup != LossKind::kNone) norm.unsup_turns += static_cast<double>(s->turns.size());
    if (spec.supervised && s->labeled) norm.sup_turns += static_cast<double>(s->turns.size());
  }
  norm.unsup_turns = std::max(norm.unsup_turns, 1.0);
  norm.sup_turns = std::max(norm.sup_turns, 1.0);

  const int threads = std::max(1, std::min(omp_get_max_threads(), n));
  while (static_cast<int>(tapes_.size()) < threads) {
    tapes_.push_back(std::make_unique<Tape>(model_->params()));
  }
  std::vector<SessionTerms> results(n);
  std::vector<double> objectives(n, 0.0);
  if (threads == 1) {
    Tape& t = *tapes_[0];
    for (int i = 0; i < n; ++i) {
      t.reset();
      results[i] = session_terms(*model_, t, *kg_, *sessions[i], indices[i], spec, norm);
      objectives[i] = t.item(results[i].objective);
      if (grad != nullptr && results[i].sums.finite) {
        t.backward(results[i].objective);
        t.accumulate_into(*grad);
      }
    }
  } else {
    if (grad != nullptr) {
      scratch_.resize(n);
      for (auto& g : scratch_) {
        if (g.size() != model_->params().size()) g = nn::GradBuffer(model_->params());
        g.zero();
      }
    }
    std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < n; ++i) {
      Tape& t = *tapes_[omp_get_thread_num()];
      try {
        t.reset();
        results[i] = session_terms(*model_, t, *kg_, *sessions[i], indices[i], spec, norm);
        objectives[i] = t.item(results[i].objective);
        if (grad != nullptr && results[i].sums.finite) {
          t.backward(results[i].objective);
          t.accumulate_into(scratch_[i]);
        }
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    for (const auto& e : errors) {
      if (!e.empty()) throw Error(e);
    }
    if (grad != nullptr) {
      for (int i = 0; i < n; ++i) grad->add(scratch_[i]);
    }
  }

  LossBreakdown total;
  for (int i = 0; i < n; ++i) {
    const LossBreakdown& b = results[i].sums;
    total.reconstruction += b.reconstruction;
    total.kl_state += b.kl_state;
    total.kl_action_category += b.kl_action_category;
    total.kl_action_keywords += b.kl_action_keywords;
    total.supervised += b.supervised;
    total.turns += b.turns;
    total.supervised_turns += b.supervised_turns;
    total.finite = total.finite && b.finite;
  }
  const double nu = std::max(1, total.turns);
  const double ns = std::max(1, total.supervised_turns);
  total.reconstruction /= nu;
  total.kl_state /= nu;
  total.kl_action_category /= nu;
  total.kl_action_keywords /= nu;
  total.supervised /= ns;
  total.total = 0.0;
  for (double v : objectives) total.total += v;
  if (!std::isfinite(total.total) || !std::isfinite(total.supervised)) {
    total.finite = false;
    if (!std::isfinite(total.supervised)) total.total = kInf;
  }
  return total;
}

LossBreakdown evaluate(const Model& m, const kg::KnowledgeGraph& kg,
                       std::span<const EncodedSession> sessions, const ObjectiveSpec& spec,
                       nn::GradBuffer* grad) {
  std::vector<const EncodedSession*> ptrs;
  std::vector<std::uint64_t> idx;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    ptrs.push_back(&sessions[i]);
    idx.push_back(i);
  }
  BatchEvaluator ev(m, kg);
  return ev.evaluate(ptrs, idx, spec, grad);
}

LossBreakdown loss_joint(const Model& m, const kg::KnowledgeGraph& kg,
                         std::span<const EncodedSession> sessions, ObjectiveSpec spec) {
  spec.unsup = LossKind::kJoint;
  spec.supervised = false;
  return evaluate(m, kg, sessions, spec);
}

LossBreakdown loss_stage1(const Model& m, const kg::KnowledgeGraph& kg,
                          std::span<const EncodedSession> sessions, ObjectiveSpec spec) {
  spec.unsup = LossKind::kStage1;
  spec.supervised = false;
  return evaluate(m, kg, sessions, spec);
}

LossBreakdown loss_stage2(const Model& m, const kg::KnowledgeGraph& kg,
                          std::span<const EncodedSession> sessions, ObjectiveSpec spec) {
  spec.unsup = LossKind::kStage2;
  spec.supervised = false;
  return evaluate(m, kg, sessions, spec);
}

LossBreakdown loss_unsup(const Model& m, const kg::KnowledgeGraph& kg,
                         std::span<const EncodedSession> sessions, int stage, ObjectiveSpec spec) {
  if (stage != 1 && stage != 2) throw ValidationError("loss_unsup: stage must be 1 or 2");
  spec.unsup = stage == 1 ? LossKind::kUnsupStage1 : LossKind::kUnsupStage2;
  spec.supervised = false;
  return evaluate(m, kg, sessions, spec);
}

LossBreakdown loss_sup(const Model& m, const kg::KnowledgeGraph& kg,
                       std::span<const EncodedSession> sessions, ObjectiveSpec spec) {
  for (const auto& s : sessions) {
    if (!s.labeled) throw ValidationError("loss_sup: session '" + s.id + "' is unlabeled");
  }
  spec.unsup = LossKind::kNone;
  spec.supervised = true;
  spec.sup_weight = 1.0;
  return evaluate(m, kg, sessions, spec);
}

// ---------------------------------------------------------------------------
// Enumeration oracles

namespace {

void check_enumerable(const Model& m, const EncodedSession& s) {
  const auto& c = m.config();
  if (s.turns.empty()) throw ValidationError("enumeration: session has no turns");
  if (s.space.size() > 8 || c.span_len_S > 2 || c.span_len_A > 1 || c.action_categories > 4) {
    throw ValidationError("enumeration: latent space too large to enumerate (needs <= 8 tokens, "
                          "|S| <= 2, |A| <= 1, <= 4 categories)");
  }
}

// Every sequence of `length` ids over [0, outcomes).
std::vector<std::vector<int>> all_sequences(int outcomes, int length) {
  std::vector<std::vector<int>> out{{}};
  for (int i = 0; i < length; ++i) {
    std::vector<std::vector<int>> next;
    for (const auto& prefix : out) {
      for (int k = 0; k < outcomes; ++k) {
        next.push_back(prefix);
        next.back().push_back(k);
      }
    }
    out = std::move(next);
  }
  return out;
}

double log_sum_exp(const std::vector<double>& xs) {
  double mx = -kInf;
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

}  // namespace

double exact_log_marginal(const Model& m, const kg::KnowledgeGraph& kg, const EncodedSession& s) {
  check_enumerable(m, s);
  const auto& cfg = m.config();
  const auto& space = s.space;
  const EncodedTurn& turn = s.turns[0];
  const int outcomes = space.size();
  Tape t(m.params());
  const std::vector<int> none;

  const auto states = cfg.use_state ? all_sequences(outcomes, cfg.span_len_S)
                                    : std::vector<std::vector<int>>{{}};
  const auto keyword_seqs = cfg.use_action ? all_sequences(outcomes, cfg.span_len_A)
                                           : std::vector<std::vector<int>>{{}};
  const int categories = cfg.use_action ? cfg.action_categories : 1;
  std::vector<double> terms;
  auto forced_span = [](const Span& sp) {
    return TokenChooser([&sp](Tape&, int i, Var, const Columns&) {
      return Choice{sp.tokens[i], sp.inputs[i]};
    });
  };
  for (const auto& S : states) {
    t.reset();
    EncodedSpan null_state = m.encode_span(t, m.initial_state(t));
    TurnContext ctx = m.context_encode(t, none, turn.patient, Var{}, null_state, space);
    double log_ps = 0.0;
    EncodedSpan state = null_state;
    if (cfg.use_state) {
      Span sp = m.fixed_span(t, S, space);
      auto ps = m.prior_state(t, ctx, forced_span(sp), nullptr);
      log_ps = path_log_prob(t, ps, S, outcomes);
      if (!std::isfinite(log_ps)) continue;
      state = m.encode_span(t, sp);
    }
    GraphContext g = m.build_graph(t, kg, state.span.tokens, space);
    for (int c = 0; c < categories; ++c) {
      for (const auto& K : keyword_seqs) {
        ActionSample a;
        double log_pa = 0.0;
        if (cfg.use_action) {
          a.category = c;
          CategoryChoice cc = m.forced_category(t, c);
          a.category_onehot = cc.onehot;
          a.category_embedding = m.category_embedding(t, cc.onehot);
          a.keywords = m.fixed_span(t, K, space);
          auto pa = m.prior_action(
              t, ctx, state, g, [&](Tape&, Var) { return CategoryChoice{c, a.category_onehot}; },
              forced_span(a.keywords), nullptr);
          log_pa = std::log(t.value(pa.category)[c]) + path_log_prob(t, pa.keywords, K, outcomes);
          if (!std::isfinite(log_pa)) continue;
        } else {
          a = m.null_action(t, space);
        }
        EncodedSpan kw = m.encode_span(t, a.keywords);
        auto dec = m.response_start(t, ctx, state, a, kw);
        double log_pg = 0.0;
        int prev = Vocabulary::kBos;
        std::vector<int> targets = turn.physician;
        targets.push_back(Vocabulary::kEos);
        for (int tok : targets) {
          Var row = m.response_step(t, dec, prev, space);
          auto idx = columns_of(dec.columns, tok);
          if (idx.empty()) idx = columns_of(dec.columns, Vocabulary::kUnk);
          double p = 0.0;
          for (int j : idx) p += t.value(row)[j];
          log_pg += std::log(p);
          prev = tok;
        }
        terms.push_back(log_ps + log_pa + log_pg);
      }
    }
  }
  return log_sum_exp(terms);
}

double expected_loss_joint(const Model& m, const kg::KnowledgeGraph& kg, const EncodedSession& s,
                           const ObjectiveSpec& base) {
  check_enumerable(m, s);
  const auto& cfg = m.config();
  const int outcomes = s.space.size();
  EncodedSession first{s.id, s.space, {s.turns[0]}, false};
  const auto states = cfg.use_state ? all_sequences(outcomes, cfg.span_len_S)
                                    : std::vector<std::vector<int>>{{}};
  const auto keyword_seqs = cfg.use_action ? all_sequences(outcomes, cfg.span_len_A)
                                           : std::vector<std::vector<int>>{{}};
  const int categories = cfg.use_action ? cfg.action_categories : 1;
  Tape t(m.params());
  double expectation = 0.0;
  for (const auto& S : states) {
    for (int c = 0; c < categories; ++c) {
      for (const auto& K : keyword_seqs) {
        TurnForcing force{S, c, K};
        ObjectiveSpec spec = base;
        spec.unsup = LossKind::kJoint;
        spec.supervised = false;
        spec.forcing = &force;
        t.reset();
        SessionTerms r = session_terms(m, t, kg, first, 0, spec, Normalizer{});
        const double w = std::exp(r.log_q_path);
        if (w == 0.0) continue;
        expectation += w * t.item(r.objective);
      }
    }
  }
  return expectation;
}

}  // namespace vrdial::objective
