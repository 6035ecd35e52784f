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

// Dialogue sessions, vocabulary, JSONL corpus I/O and a synthetic generator
// with planted state/action dynamics.

#ifndef VRDIAL_CORPUS_CORPUS_HPP_
#define VRDIAL_CORPUS_CORPUS_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vrdial/kg/graph.hpp"

namespace vrdial::corpus {

using Tokens = std::vector<std::string>;

// Whitespace tokenization of pre-segmented text.
Tokens tokenize(std::string_view text);
std::string join(std::span<const std::string> tokens);

enum class ActionCategory { kAskSymptoms = 0, kDiagnosis = 1, kPrescribeMedicine = 2, kChitchat = 3 };
inline constexpr int kActionCategoryCount = 4;
std::string_view to_string(ActionCategory c);
ActionCategory parse_action_category(std::string_view s);  // throws ValidationError

struct Turn {
  Tokens patient;    // U_t
  Tokens physician;  // R_t

  bool operator==(const Turn&) const = default;
};

struct StateLabel {
  Tokens tokens;
  bool operator==(const StateLabel&) const = default;
};

struct ActionLabel {
  ActionCategory category = ActionCategory::kChitchat;
  Tokens keywords;
  bool operator==(const ActionLabel&) const = default;
};

struct DialogueSession {
  std::string id;
  std::vector<Turn> turns;
  std::optional<std::vector<StateLabel>> states;
  std::optional<std::vector<ActionLabel>> actions;

  bool labeled() const { return states.has_value() && actions.has_value(); }
  bool operator==(const DialogueSession&) const = default;
};

// One JSON record per line; see README for the schema. Errors name the
// 1-based record index.
std::vector<DialogueSession> load_corpus(std::istream& in);
std::vector<DialogueSession> load_corpus_file(const std::string& path);
void save_corpus(std::ostream& out, std::span<const DialogueSession> sessions);
std::string to_json_line(const DialogueSession& session);

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kNullToken = "<null>";

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNull = 4;
  static constexpr int kReserved = 5;

  Vocabulary();
  // Reserved tokens followed by `tokens` (duplicates and reserved names are
  // rejected with ValidationError).
  explicit Vocabulary(std::span<const std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(id); }
  int find(std::string_view token) const;  // -1 when absent
  int id(std::string_view token) const;    // UNK when absent
  bool contains(std::string_view token) const { return find(token) >= 0; }
  std::vector<int> encode(std::span<const std::string> tokens) const;
  // Content tokens (excluding reserved ones) in id order.
  std::vector<std::string> content() const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  int add(std::string token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Keeps the most frequent tokens (ties lexicographic) up to max_size total,
// always including every token of every entity name. Throws
// ValidationError when max_size <= 5.
Vocabulary build_vocab(std::span<const DialogueSession> sessions, const kg::KnowledgeGraph& kg,
                       int max_size);

// Truncates to L or right-pads with the NULL token.
Tokens fit_span(std::span<const std::string> tokens, int L);

struct SynthParams {
  int sessions = 100;
  int turns_per_session = 4;
  double symptom_rate = 0.7;  // probability the patient confirms an asked symptom
};

// Fully labeled synthetic sessions; deterministic in (kg, seed, params).
// Throws ValidationError when no disease has both a symptom_of in-edge and
// a treated_by out-edge.
std::vector<DialogueSession> synth_corpus(const kg::KnowledgeGraph& kg, std::uint64_t seed,
                                          const SynthParams& params);

}  // namespace vrdial::corpus

#endif  // VRDIAL_CORPUS_CORPUS_HPP_
