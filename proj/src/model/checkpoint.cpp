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

#include "vrdial/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vrdial/error.hpp"

namespace vrdial::model {

namespace {

constexpr char kMagic[8] = {'V', 'R', 'D', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoints assume little endian");

template <class T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigMismatch("checkpoint truncated");
  return v;
}

nlohmann::json read_header(std::istream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw ConfigMismatch("'" + path + "' is not a checkpoint");
  }
  const auto version = read_raw<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ConfigMismatch("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                         std::to_string(kCheckpointVersion) + ")");
  }
  const auto length = read_raw<std::uint64_t>(in);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw ConfigMismatch("checkpoint truncated");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigMismatch(std::string("checkpoint header: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& m, const CheckpointMeta& meta) {
  const auto& store = m.params();
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["config"] = to_json(m.config());
  header["vocab"] = m.vocab().content();
  header["relations"] = m.relations();
  header["step"] = meta.step;
  header["rng"] = meta.rng_state;
  header["extra"] = meta.extra;
  auto& params = header["params"] = nlohmann::json::array();
  for (int p = 0; p < store.size(); ++p) {
    params.push_back({{"name", store.name(p)}, {"rows", store.rows(p)}, {"cols", store.cols(p)}});
  }
  const std::string text = header.dump();
  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    out.write(kMagic, 8);
    write_raw(out, kCheckpointVersion);
    write_raw(out, static_cast<std::uint64_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (int p = 0; p < store.size(); ++p) {
      auto v = store.value(p);
      out.write(reinterpret_cast<const char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!out) throw Error("failed writing checkpoint '" + path + "'");
  }
  std::filesystem::rename(tmp, target);
}

nlohmann::json read_checkpoint_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  return read_header(in, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path, const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  const nlohmann::json header = read_header(in, path);
  LoadedCheckpoint out;
  try {
    ModelConfig cfg = model_config_from_json(header.at("config"));
    if (expected != nullptr) {
      ModelConfig want = *expected;
      if (want.vocab_size == 0) want.vocab_size = cfg.vocab_size;
      if (!(want == cfg)) throw ConfigMismatch("checkpoint configuration differs from the requested one");
    }
    const auto tokens = header.at("vocab").get<std::vector<std::string>>();
    auto relations = header.at("relations").get<std::vector<std::string>>();
    out.model = std::make_unique<Model>(cfg, corpus::Vocabulary(tokens), std::move(relations));
    out.meta.step = header.at("step").get<std::uint64_t>();
    out.meta.rng_state = header.at("rng").get<std::string>();
    out.meta.extra = header.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigMismatch(std::string("checkpoint header: ") + e.what());
  }
  auto& store = out.model->params();
  const auto& params = header.at("params");
  if (static_cast<int>(params.size()) != store.size()) {
    throw ConfigMismatch("checkpoint parameter count differs from its configuration");
  }
  for (int p = 0; p < store.size(); ++p) {
    const auto& e = params[p];
    if (e.at("name").get<std::string>() != store.name(p) || e.at("rows").get<int>() != store.rows(p) ||
        e.at("cols").get<int>() != store.cols(p)) {
      throw ConfigMismatch("checkpoint parameter '" + e.at("name").get<std::string>() +
                           "' does not match the model layout");
    }
    auto v = store.value(p);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw ConfigMismatch("checkpoint truncated");
  }
  return out;
}

}  // namespace vrdial::model
