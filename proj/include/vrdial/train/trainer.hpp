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

// Training loop: temperature and learning-rate annealing, the two-stage
// schedule, semi-supervised mixing, adaptive-moment updates, validation and
// checkpointing.

#ifndef VRDIAL_TRAIN_TRAINER_HPP_
#define VRDIAL_TRAIN_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vrdial/corpus/corpus.hpp"
#include "vrdial/eval/metrics.hpp"
#include "vrdial/kg/graph.hpp"
#include "vrdial/model/config.hpp"
#include "vrdial/model/model.hpp"
#include "vrdial/objective/objective.hpp"

namespace vrdial::train {

struct RunConfig {
  int batch_size = 16;
  double lr_start = 1e-4;
  double lr_end = 1e-5;
  double gumbel_start = 3.0;
  double gumbel_end = 0.1;
  int gumbel_anneal_steps = 30000;
  int stage1_steps = -1;  // -1: one epoch over the training split
  int max_steps = 1000;
  int eval_every = 0;  // 0: validate and checkpoint only at the end
  std::uint64_t rng_seed = 0;
  double supervision_fraction = 0.0;
  double sup_weight = 1.0;

  bool two_stage = true;  // false: joint bound throughout
  bool prior_state_for_prior_action = false;
  double val_fraction = 0.1;
  int vocab_max = 5000;
  double grad_clip = 5.0;  // global norm; <= 0 disables
  int kl_warmup_steps = 0;  // KL weight rises linearly from 0 to 1; 0 disables
  std::string sample_mode = "gumbel_st";
  bool validation_metrics = true;  // run inference on the validation split
  model::ModelConfig model;

  // Throws ValidationError on out-of-range values.
  void validate() const;
};

// Flat key=value lines ('#' comments) or a JSON document, detected by the
// first character. Model fields may be given bare or prefixed "model.";
// in JSON they may also sit in a nested "model" object. Unknown keys throw
// ValidationError.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
bool set_run_field(RunConfig& c, const std::string& key, const std::string& value);
nlohmann::json to_json(const RunConfig& c);

struct Schedule {
  double tau = 0.0;
  double lr = 0.0;
};
// Linear from the start values, clamped at the end values after
// gumbel_anneal_steps (temperature) and max_steps (learning rate).
Schedule anneal(const RunConfig& c, std::uint64_t step);

struct Split {
  std::vector<corpus::DialogueSession> train;
  std::vector<corpus::DialogueSession> validation;
};
// Seeded shuffle of session order; the first round(val_fraction * n)
// sessions (at most n - 1) form the validation split.
Split split_corpus(std::span<const corpus::DialogueSession> sessions, double val_fraction,
                   std::uint64_t seed);

// Seeded draw of round(fraction * n) session positions that keep their
// labels during training.
std::vector<bool> choose_supervised(std::size_t n, double fraction, std::uint64_t seed);

class Adam {
 public:
  Adam(const nn::ParamStore& store, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(nn::ParamStore& store, const nn::GradBuffer& grad, double lr);

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct StepRecord {
  std::uint64_t step = 0;
  int stage = 1;
  double tau = 0.0;
  double lr = 0.0;
  objective::LossBreakdown loss;
};

struct ValidationRecord {
  std::uint64_t step = 0;
  objective::LossBreakdown loss;
  std::optional<eval::EvalReport> report;
  double state_f1 = 0.0;
  double category_accuracy = 0.0;
};

struct TrainOptions {
  std::string out_dir;  // metrics.jsonl and checkpoint.ckpt; empty writes nothing
  std::ostream* progress = nullptr;
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  std::unique_ptr<model::Model> model;
  Split data;
  std::vector<StepRecord> history;
  std::vector<ValidationRecord> validation;
  int stage1_steps = 0;
  bool aborted = false;
  std::string abort_reason;
  std::string checkpoint;  // last checkpoint written
};

// Throws ValidationError on an empty corpus. A non-finite loss or gradient
// stops training with `aborted` set; the last checkpoint written stays.
TrainResult train(const RunConfig& config, std::span<const corpus::DialogueSession> corpus,
                  const kg::KnowledgeGraph& kg, const TrainOptions& options = {});

// Validation loss (fixed sampling seed) plus, when requested, inference
// metrics on `sessions`.
ValidationRecord validate(const model::Model& m, const kg::KnowledgeGraph& kg,
                          std::span<const corpus::DialogueSession> sessions, const RunConfig& c,
                          int stage, bool with_metrics);

nlohmann::json to_json(const objective::LossBreakdown& b);

}  // namespace vrdial::train

#endif  // VRDIAL_TRAIN_TRAINER_HPP_
