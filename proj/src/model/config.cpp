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

#include "vrdial/model/config.hpp"

#include "vrdial/error.hpp"

namespace vrdial::model {
namespace {

int to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int x = 0;
  try {
    x = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw ValidationError("config key '" + key + "': expected an integer");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config key '" + key + "': expected true or false");
}

}  // namespace

void ModelConfig::validate() const {
  const int widths[] = {embed_width, hidden_width,      graph_hidden, graph_out,        span_len_S,
                        span_len_A,  action_categories, beam_width,   max_response_len, vocab_size};
  for (int w : widths) {
    if (w <= 0) throw ValidationError("model widths, span lengths and sizes must be positive");
  }
  if (hops < 0) throw ValidationError("hops must be non-negative");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"embed_width", c.embed_width},
          {"hidden_width", c.hidden_width},
          {"graph_hidden", c.graph_hidden},
          {"graph_out", c.graph_out},
          {"span_len_S", c.span_len_S},
          {"span_len_A", c.span_len_A},
          {"hops", c.hops},
          {"action_categories", c.action_categories},
          {"beam_width", c.beam_width},
          {"vocab_size", c.vocab_size},
          {"max_response_len", c.max_response_len},
          {"directed_hops", c.hop_mode == kg::HopMode::kDirected},
          {"use_state", c.use_state},
          {"use_action", c.use_action},
          {"use_graph_detector", c.use_graph_detector},
          {"use_context_detector", c.use_context_detector}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    if (!set_model_field(c, key, text)) {
      throw ValidationError("unknown model config key '" + key + "'");
    }
  }
  return c;
}

bool set_model_field(ModelConfig& c, const std::string& key, const std::string& value) {
  if (key == "embed_width") {
    c.embed_width = to_int(key, value);
  } else if (key == "hidden_width") {
    c.hidden_width = to_int(key, value);
  } else if (key == "graph_hidden") {
    c.graph_hidden = to_int(key, value);
  } else if (key == "graph_out") {
    c.graph_out = to_int(key, value);
  } else if (key == "span_len_S") {
    c.span_len_S = to_int(key, value);
  } else if (key == "span_len_A") {
    c.span_len_A = to_int(key, value);
  } else if (key == "hops") {
    c.hops = to_int(key, value);
  } else if (key == "action_categories") {
    c.action_categories = to_int(key, value);
  } else if (key == "beam_width") {
    c.beam_width = to_int(key, value);
  } else if (key == "vocab_size") {
    c.vocab_size = to_int(key, value);
  } else if (key == "max_response_len") {
    c.max_response_len = to_int(key, value);
  } else if (key == "directed_hops") {
    c.hop_mode = to_bool(key, value) ? kg::HopMode::kDirected : kg::HopMode::kUndirected;
  } else if (key == "use_state") {
    c.use_state = to_bool(key, value);
  } else if (key == "use_action") {
    c.use_action = to_bool(key, value);
  } else if (key == "use_graph_detector") {
    c.use_graph_detector = to_bool(key, value);
  } else if (key == "use_context_detector") {
    c.use_context_detector = to_bool(key, value);
  } else {
    return false;
  }
  return true;
}

}  // namespace vrdial::model
