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

// Checkpoint container: magic, format version, a JSON header with the model
// configuration, vocabulary, relations, training step, rng state and
// parameter shapes, then every parameter as little-endian doubles.

#ifndef VRDIAL_MODEL_CHECKPOINT_HPP_
#define VRDIAL_MODEL_CHECKPOINT_HPP_

#include <cstdint>
#include <memory>
#include <string>

#include "json.hpp"
#include "vrdial/model/model.hpp"

namespace vrdial::model {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t step = 0;
  std::string rng_state;
  nlohmann::json extra = nlohmann::json::object();  // run configuration, metrics
};

void save_checkpoint(const std::string& path, const Model& m, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  CheckpointMeta meta;
};

// Throws ConfigMismatch on a foreign file, a different format version, a
// parameter layout that does not match the stored configuration, or a
// configuration different from `expected` when given.
LoadedCheckpoint load_checkpoint(const std::string& path, const ModelConfig* expected = nullptr);

// Header only (no parameters), for inspection.
nlohmann::json read_checkpoint_header(const std::string& path);

}  // namespace vrdial::model

#endif  // VRDIAL_MODEL_CHECKPOINT_HPP_
