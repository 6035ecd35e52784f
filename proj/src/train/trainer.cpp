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

#include "vrdial/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "vrdial/error.hpp"
#include "vrdial/eval/runner.hpp"
#include "vrdial/model/checkpoint.hpp"

namespace vrdial::train {

using objective::LossBreakdown;
using objective::LossKind;

namespace {

// Stream tags for derive_seed.
enum : std::uint64_t { kSplitSeed = 11, kInitSeed = 12, kOrderSeed = 13, kSampleSeed = 14,
                       kSuperviseSeed = 15, kValidationSeed = 16 };

LossKind stage_kind(const RunConfig& c, int stage) {
  if (!c.two_stage) return LossKind::kJoint;
  return stage == 1 ? LossKind::kUnsupStage1 : LossKind::kUnsupStage2;
}

bool all_finite(const nn::GradBuffer& g) {
  for (int p = 0; p < g.size(); ++p) {
    for (double x : g.grad(p)) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void clip(nn::GradBuffer& g, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (int p = 0; p < g.size(); ++p) {
    for (double x : g.grad(p)) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) g.scale(max_norm / norm);
}

void zero_padding_row(model::Model& m) {
  auto& store = m.params();
  const int e = store.find("embedding");
  auto row = store.value(e).subspan(0, store.cols(e));
  std::fill(row.begin(), row.end(), 0.0);
}

}  // namespace
nlohmann::json to_json(const LossBreakdown& b);
namespace {
nlohmann::json validation_json(const ValidationRecord& v) {
  nlohmann::json j = {{"loss", to_json(v.loss)}};
  if (v.report) {
    j["report"] = eval::to_json(*v.report);
    j["state_f1"] = v.state_f1;
    j["category_accuracy"] = v.category_accuracy;
  }
  return j;
}

}  // namespace

nlohmann::json to_json(const LossBreakdown& b) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  return {{"reconstruction", num(b.reconstruction)},
          {"kl_state", num(b.kl_state)},
          {"kl_action_category", num(b.kl_action_category)},
          {"kl_action_keywords", num(b.kl_action_keywords)},
          {"supervised", num(b.supervised)},
          {"total", num(b.total)},
          {"finite", b.finite}};
}

Split split_corpus(std::span<const corpus::DialogueSession> sessions, double val_fraction,
                   std::uint64_t seed) {
  std::vector<std::size_t> order(sessions.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {kSplitSeed}));
  shuffle_in_place(order, rng);
  std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(sessions.size())));
  if (!sessions.empty()) n_val = std::min(n_val, sessions.size() - 1);
  std::vector<bool> is_val(sessions.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  Split s;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    (is_val[i] ? s.validation : s.train).push_back(sessions[i]);
  }
  return s;
}

std::vector<bool> choose_supervised(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {kSuperviseSeed}));
  shuffle_in_place(order, rng);
  const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  std::vector<bool> chosen(n, false);
  for (std::size_t i = 0; i < k; ++i) chosen[order[i]] = true;
  return chosen;
}

Adam::Adam(const nn::ParamStore& store, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (int p = 0; p < store.size(); ++p) {
    m_.emplace_back(store.value(p).size(), 0.0);
    v_.emplace_back(store.value(p).size(), 0.0);
  }
}

void Adam::step(nn::ParamStore& store, const nn::GradBuffer& grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (int p = 0; p < store.size(); ++p) {
    auto x = store.value(p);
    auto g = grad.grad(p);
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

ValidationRecord validate(const model::Model& m, const kg::KnowledgeGraph& kg,
                          std::span<const corpus::DialogueSession> sessions, const RunConfig& c,
                          int stage, bool with_metrics) {
  ValidationRecord rec;
  if (sessions.empty()) return rec;
  std::vector<model::EncodedSession> encoded;
  for (const auto& s : sessions) {
    encoded.push_back(m.encode(s));
    encoded.back().labeled = false;
  }
  objective::ObjectiveSpec spec;
  spec.unsup = stage_kind(c, stage);
  spec.mode = model::parse_sample_mode(c.sample_mode);
  spec.tau = c.gumbel_end;
  spec.seed = derive_seed(c.rng_seed, {kValidationSeed});
  spec.prior_state_for_prior_action = c.prior_state_for_prior_action;
  rec.loss = objective::evaluate(m, kg, encoded, spec);
  if (with_metrics) {
    const auto outputs = eval::predict_corpus(m, kg, sessions);
    rec.report = eval::score_outputs(outputs, kg, eval::model_embeddings(m));
    rec.state_f1 = eval::state_token_f1(outputs);
    rec.category_accuracy = eval::category_accuracy(outputs);
  }
  return rec;
}

TrainResult train(const RunConfig& config, std::span<const corpus::DialogueSession> corpus,
                  const kg::KnowledgeGraph& kg, const TrainOptions& options) {
  config.validate();
  if (corpus.empty()) throw ValidationError("train: corpus is empty");
  TrainResult res;
  res.data = split_corpus(corpus, config.val_fraction, config.rng_seed);
  const auto& train_set = res.data.train;

  model::ModelConfig mcfg = config.model;
  const int vocab_cap = mcfg.vocab_size > 0 ? mcfg.vocab_size : config.vocab_max;
  mcfg.vocab_size = 0;
  auto vocab = corpus::build_vocab(train_set, kg, vocab_cap);
  res.model = std::make_unique<model::Model>(mcfg, vocab, model::Model::relations_of(kg));
  model::Model& m = *res.model;
  m.init(derive_seed(config.rng_seed, {kInitSeed}));

  std::vector<model::EncodedSession> encoded;
  const auto supervised = choose_supervised(train_set.size(), config.supervision_fraction, config.rng_seed);
  bool any_labeled = false;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    encoded.push_back(m.encode(train_set[i]));
    encoded.back().labeled = encoded.back().labeled && supervised[i];
    any_labeled = any_labeled || encoded.back().labeled;
  }
  const int n = static_cast<int>(encoded.size());
  const int per_epoch = (n + config.batch_size - 1) / config.batch_size;
  res.stage1_steps = config.stage1_steps >= 0 ? config.stage1_steps : per_epoch;

  std::ofstream metrics;
  std::string ckpt_path;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    metrics.open(std::filesystem::path(options.out_dir) / "metrics.jsonl", std::ios::trunc);
    if (!metrics) throw Error("cannot write metrics log in '" + options.out_dir + "'");
    ckpt_path = (std::filesystem::path(options.out_dir) / "checkpoint.ckpt").string();
  }
  auto save = [&](std::uint64_t step, const ValidationRecord* val) {
    if (ckpt_path.empty()) return;
    model::CheckpointMeta meta;
    meta.step = step;
    meta.rng_state = std::to_string(config.rng_seed) + ":" + std::to_string(step);
    meta.extra = {{"run_config", to_json(config)}};
    if (val != nullptr) meta.extra["validation"] = validation_json(*val);
    model::save_checkpoint(ckpt_path, m, meta);
    res.checkpoint = ckpt_path;
  };

  objective::BatchEvaluator evaluator(m, kg);
  Adam adam(m.params());
  nn::GradBuffer grad(m.params());
  const auto mode = model::parse_sample_mode(config.sample_mode);
  const std::uint64_t sample_seed = derive_seed(config.rng_seed, {kSampleSeed});
  std::vector<int> order;
  int epoch = -1;
  int cursor = per_epoch;
  for (int step = 0; step < config.max_steps; ++step) {
    if (cursor >= per_epoch) {
      ++epoch;
      cursor = 0;
      order.resize(n);
      std::iota(order.begin(), order.end(), 0);
      Rng rng(derive_seed(config.rng_seed, {kOrderSeed, static_cast<std::uint64_t>(epoch)}));
      shuffle_in_place(order, rng);
    }
    std::vector<const model::EncodedSession*> batch;
    std::vector<std::uint64_t> ids;
    for (int i = cursor * config.batch_size; i < std::min(n, (cursor + 1) * config.batch_size); ++i) {
      batch.push_back(&encoded[order[i]]);
      ids.push_back(static_cast<std::uint64_t>(order[i]));
    }
    ++cursor;

    StepRecord rec;
    rec.step = static_cast<std::uint64_t>(step);
    rec.stage = step < res.stage1_steps ? 1 : 2;
    const Schedule sched = anneal(config, rec.step);
    rec.tau = sched.tau;
    rec.lr = sched.lr;
    objective::ObjectiveSpec spec;
    spec.unsup = stage_kind(config, rec.stage);
    spec.supervised = any_labeled;
    spec.sup_weight = config.sup_weight;
    spec.mode = mode;
    spec.tau = sched.tau;
    spec.seed = sample_seed;
    spec.step = rec.step;
    spec.prior_state_for_prior_action = config.prior_state_for_prior_action;
    if (config.kl_warmup_steps > 0) {
      spec.kl_weight = std::min(1.0, static_cast<double>(step) / config.kl_warmup_steps);
    }
    grad.zero();
    rec.loss = evaluator.evaluate(batch, ids, spec, &grad);
    res.history.push_back(rec);
    if (options.on_step) options.on_step(rec);
    nlohmann::json line = {{"step", rec.step}, {"stage", rec.stage}, {"tau", rec.tau},
                           {"lr", rec.lr}, {"breakdown", to_json(rec.loss)}};
    if (!rec.loss.finite || !std::isfinite(rec.loss.total) || !all_finite(grad)) {
      res.aborted = true;
      res.abort_reason = "non-finite loss or gradient at step " + std::to_string(step);
      if (metrics) metrics << line.dump() << '\n';
      break;
    }
    clip(grad, config.grad_clip);
    adam.step(m.params(), grad, sched.lr);
    zero_padding_row(m);

    const bool last = step + 1 == config.max_steps;
    const bool periodic = config.eval_every > 0 && (step + 1) % config.eval_every == 0;
    if (periodic || last) {
      const int next_stage = step + 1 < res.stage1_steps ? 1 : 2;
      ValidationRecord val = validate(m, kg, res.data.validation, config, next_stage,
                                      config.validation_metrics);
      val.step = rec.step + 1;
      line["val"] = validation_json(val);
      res.validation.push_back(val);
      save(rec.step + 1, &val);
    }
    if (metrics) metrics << line.dump() << '\n';
    if (options.progress != nullptr && (step % 50 == 0 || last)) {
      *options.progress << "step " << step << " stage " << rec.stage << " loss " << rec.loss.total
                        << '\n';
    }
  }
  if (config.max_steps == 0) save(0, nullptr);
  return res;
}

}  // namespace vrdial::train
