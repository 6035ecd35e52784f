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

#include <cmath>
#include <fstream>
#include <sstream>

#include "vrdial/error.hpp"
#include "vrdial/train/trainer.hpp"

namespace vrdial::train {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream ss(v);
  T x{};
  ss >> x;
  if (!ss || !ss.eof()) throw ValidationError("config key '" + key + "': expected a number");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config key '" + key + "': expected true or false");
}

void apply_json(RunConfig& c, const nlohmann::json& j, const std::string& prefix) {
  for (const auto& [key, value] : j.items()) {
    const std::string full = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      apply_json(c, value, full);
      continue;
    }
    const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    if (!set_run_field(c, full, text)) throw ValidationError("unknown config key '" + full + "'");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (!(lr_end > 0.0) || lr_start < lr_end) throw ValidationError("need lr_start >= lr_end > 0");
  if (!(gumbel_end > 0.0) || gumbel_start < gumbel_end) {
    throw ValidationError("need gumbel_start >= gumbel_end > 0");
  }
  if (gumbel_anneal_steps < 1) throw ValidationError("gumbel_anneal_steps must be positive");
  if (max_steps < 0) throw ValidationError("max_steps must be non-negative");
  if (eval_every < 0) throw ValidationError("eval_every must be non-negative");
  if (supervision_fraction < 0.0 || supervision_fraction > 1.0) {
    throw ValidationError("supervision_fraction must lie in [0, 1]");
  }
  if (val_fraction < 0.0 || val_fraction >= 1.0) throw ValidationError("val_fraction must lie in [0, 1)");
  if (kl_warmup_steps < 0) throw ValidationError("kl_warmup_steps must be non-negative");
  if (sup_weight < 0.0) throw ValidationError("sup_weight must be non-negative");
  model::parse_sample_mode(sample_mode);
  if (sample_mode == "greedy") throw ValidationError("training needs a stochastic sample_mode");
}

bool set_run_field(RunConfig& c, const std::string& raw_key, const std::string& value) {
  const std::string key = raw_key;
  if (key.rfind("model.", 0) == 0) return model::set_model_field(c.model, key.substr(6), value);
  if (key == "batch_size") {
    c.batch_size = parse_number<int>(key, value);
  } else if (key == "lr_start") {
    c.lr_start = parse_number<double>(key, value);
  } else if (key == "lr_end") {
    c.lr_end = parse_number<double>(key, value);
  } else if (key == "gumbel_start") {
    c.gumbel_start = parse_number<double>(key, value);
  } else if (key == "gumbel_end") {
    c.gumbel_end = parse_number<double>(key, value);
  } else if (key == "gumbel_anneal_steps") {
    c.gumbel_anneal_steps = parse_number<int>(key, value);
  } else if (key == "stage1_steps") {
    c.stage1_steps = parse_number<int>(key, value);
  } else if (key == "max_steps") {
    c.max_steps = parse_number<int>(key, value);
  } else if (key == "eval_every") {
    c.eval_every = parse_number<int>(key, value);
  } else if (key == "rng_seed") {
    c.rng_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "supervision_fraction") {
    c.supervision_fraction = parse_number<double>(key, value);
  } else if (key == "sup_weight") {
    c.sup_weight = parse_number<double>(key, value);
  } else if (key == "two_stage") {
    c.two_stage = parse_bool(key, value);
  } else if (key == "prior_state_for_prior_action") {
    c.prior_state_for_prior_action = parse_bool(key, value);
  } else if (key == "val_fraction") {
    c.val_fraction = parse_number<double>(key, value);
  } else if (key == "vocab_max") {
    c.vocab_max = parse_number<int>(key, value);
  } else if (key == "grad_clip") {
    c.grad_clip = parse_number<double>(key, value);
  } else if (key == "kl_warmup_steps") {
    c.kl_warmup_steps = parse_number<int>(key, value);
  } else if (key == "sample_mode") {
    c.sample_mode = value;
  } else if (key == "validation_metrics") {
    c.validation_metrics = parse_bool(key, value);
  } else {
    return model::set_model_field(c.model, key, value);
  }
  return true;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  const std::string body = trim(text);
  if (!body.empty() && body[0] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("config: ") + e.what(), 0);
    }
    apply_json(c, j, "");
  } else {
    std::istringstream in(text);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("expected key=value", n);
      const std::string key = trim(line.substr(0, eq));
      if (!set_run_field(c, key, trim(line.substr(eq + 1)))) {
        throw ParseError("unknown config key '" + key + "'", n);
      }
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"batch_size", c.batch_size},
          {"lr_start", c.lr_start},
          {"lr_end", c.lr_end},
          {"gumbel_start", c.gumbel_start},
          {"gumbel_end", c.gumbel_end},
          {"gumbel_anneal_steps", c.gumbel_anneal_steps},
          {"stage1_steps", c.stage1_steps},
          {"max_steps", c.max_steps},
          {"eval_every", c.eval_every},
          {"rng_seed", c.rng_seed},
          {"supervision_fraction", c.supervision_fraction},
          {"sup_weight", c.sup_weight},
          {"two_stage", c.two_stage},
          {"prior_state_for_prior_action", c.prior_state_for_prior_action},
          {"val_fraction", c.val_fraction},
          {"vocab_max", c.vocab_max},
          {"grad_clip", c.grad_clip},
          {"kl_warmup_steps", c.kl_warmup_steps},
          {"sample_mode", c.sample_mode},
          {"validation_metrics", c.validation_metrics},
          {"model", model::to_json(c.model)}};
}

Schedule anneal(const RunConfig& c, std::uint64_t step) {
  const double s = static_cast<double>(step);
  const double ft = std::min(1.0, s / static_cast<double>(c.gumbel_anneal_steps));
  const double fl = c.max_steps > 0 ? std::min(1.0, s / static_cast<double>(c.max_steps)) : 1.0;
  return Schedule{c.gumbel_start + (c.gumbel_end - c.gumbel_start) * ft,
                  c.lr_start + (c.lr_end - c.lr_start) * fl};
}

}  // namespace vrdial::train
