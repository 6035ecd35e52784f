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

#ifndef VRDIAL_MODEL_CONFIG_HPP_
#define VRDIAL_MODEL_CONFIG_HPP_

#include <string>

#include "json.hpp"
#include "vrdial/kg/graph.hpp"

namespace vrdial::model {

struct ModelConfig {
  int embed_width = 300;
  int hidden_width = 512;
  int graph_hidden = 128;
  int graph_out = 512;
  int span_len_S = 10;
  int span_len_A = 3;
  int hops = 2;
  int action_categories = 4;
  int beam_width = 5;
  int vocab_size = 0;  // filled from the vocabulary
  int max_response_len = 30;
  kg::HopMode hop_mode = kg::HopMode::kUndirected;
  // Ablation switches.
  bool use_state = true;
  bool use_action = true;
  bool use_graph_detector = true;
  bool use_context_detector = true;

  // Throws ValidationError unless every width is positive.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Assigns one key=value pair; returns false for keys it does not know.
bool set_model_field(ModelConfig& c, const std::string& key, const std::string& value);

}  // namespace vrdial::model

#endif  // VRDIAL_MODEL_CONFIG_HPP_
