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

#include "vrdial/corpus/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "vrdial/error.hpp"

namespace vrdial::corpus {
namespace {

using nlohmann::json;

constexpr std::string_view kCategoryNames[kActionCategoryCount] = {
    "ask_symptoms", "diagnosis", "prescribe_medicine", "chitchat"};

Tokens string_list(const json& j) {
  Tokens out;
  for (const auto& x : j) out.push_back(x.get<std::string>());
  return out;
}

DialogueSession parse_record(const json& rec) {
  DialogueSession s;
  s.id = rec.at("id").get<std::string>();
  for (const auto& t : rec.at("turns")) {
    Turn turn{tokenize(t.at("u").get<std::string>()), tokenize(t.at("r").get<std::string>())};
    if (turn.patient.empty() || turn.physician.empty()) {
      throw ValidationError("turn utterances must be non-empty");
    }
    s.turns.push_back(std::move(turn));
  }
  if (s.turns.empty()) throw ValidationError("session has no turns");
  if (rec.contains("states")) {
    std::vector<StateLabel> states;
    for (const auto& x : rec.at("states")) states.push_back(StateLabel{string_list(x)});
    if (states.size() != s.turns.size()) {
      throw ValidationError(std::to_string(states.size()) + " state labels for " +
                            std::to_string(s.turns.size()) + " turns");
    }
    s.states = std::move(states);
  }
  if (rec.contains("actions")) {
    std::vector<ActionLabel> actions;
    for (const auto& x : rec.at("actions")) {
      actions.push_back(ActionLabel{parse_action_category(x.at("c").get<std::string>()),
                                    string_list(x.at("k"))});
    }
    if (actions.size() != s.turns.size()) {
      throw ValidationError(std::to_string(actions.size()) + " action labels for " +
                            std::to_string(s.turns.size()) + " turns");
    }
    s.actions = std::move(actions);
  }
  return s;
}

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) out.push_back(std::move(w));
  return out;
}

std::string join(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::string_view to_string(ActionCategory c) { return kCategoryNames[static_cast<int>(c)]; }

ActionCategory parse_action_category(std::string_view s) {
  for (int i = 0; i < kActionCategoryCount; ++i) {
    if (s == kCategoryNames[i]) return static_cast<ActionCategory>(i);
  }
  throw ValidationError("unknown action category '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// JSONL

std::vector<DialogueSession> load_corpus(std::istream& in) {
  std::vector<DialogueSession> out;
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++record;
    try {
      out.push_back(parse_record(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError("record " + std::to_string(record) + ": " + e.what(), 0);
    } catch (const ValidationError& e) {
      throw ValidationError("record " + std::to_string(record) + ": " + e.what());
    }
  }
  return out;
}

std::vector<DialogueSession> load_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus '" + path + "'");
  return load_corpus(in);
}

std::string to_json_line(const DialogueSession& s) {
  json rec;
  rec["id"] = s.id;
  rec["turns"] = json::array();
  for (const auto& t : s.turns) rec["turns"].push_back({{"u", join(t.patient)}, {"r", join(t.physician)}});
  if (s.states) {
    rec["states"] = json::array();
    for (const auto& st : *s.states) rec["states"].push_back(st.tokens);
  }
  if (s.actions) {
    rec["actions"] = json::array();
    for (const auto& a : *s.actions) {
      rec["actions"].push_back({{"c", std::string(to_string(a.category))}, {"k", a.keywords}});
    }
  }
  return rec.dump();
}

void save_corpus(std::ostream& out, std::span<const DialogueSession> sessions) {
  for (const auto& s : sessions) out << to_json_line(s) << '\n';
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (auto t : {kPadToken, kBosToken, kEosToken, kUnkToken, kNullToken}) add(std::string(t));
}

Vocabulary::Vocabulary(std::span<const std::string> tokens) : Vocabulary() {
  for (const auto& t : tokens) {
    if (contains(t)) throw ValidationError("duplicate vocabulary token '" + t + "'");
    add(t);
  }
}

int Vocabulary::add(std::string token) {
  const int id = size();
  index_.emplace(token, id);
  tokens_.push_back(std::move(token));
  return id;
}

int Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

int Vocabulary::id(std::string_view token) const {
  const int i = find(token);
  return i < 0 ? kUnk : i;
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::content() const {
  return {tokens_.begin() + kReserved, tokens_.end()};
}

Vocabulary build_vocab(std::span<const DialogueSession> sessions, const kg::KnowledgeGraph& kg,
                       int max_size) {
  if (max_size <= Vocabulary::kReserved) {
    throw ValidationError("vocabulary size must exceed the 5 reserved tokens");
  }
  const Vocabulary reserved;
  std::map<std::string, long> freq;
  auto count = [&](const Tokens& ts) {
    for (const auto& t : ts) {
      if (!reserved.contains(t)) ++freq[t];
    }
  };
  for (const auto& s : sessions) {
    for (const auto& t : s.turns) {
      count(t.patient);
      count(t.physician);
    }
    if (s.states) {
      for (const auto& st : *s.states) count(st.tokens);
    }
    if (s.actions) {
      for (const auto& a : *s.actions) count(a.keywords);
    }
  }
  std::set<std::string> forced;
  for (const auto& e : kg.entities()) {
    // Entity tokens are matched case-folded, so the folded form is stored.
    for (const auto& t : e.tokens) {
      if (!reserved.contains(t)) forced.insert(t);
    }
  }
  std::vector<std::pair<long, std::string>> ranked;
  for (const auto& [t, c] : freq) ranked.emplace_back(-c, t);
  for (const auto& t : forced) {
    if (!freq.count(t)) ranked.emplace_back(0, t);
  }
  std::sort(ranked.begin(), ranked.end());
  const std::size_t budget = static_cast<std::size_t>(max_size - Vocabulary::kReserved);
  std::vector<std::string> chosen;
  std::size_t free_slots = budget > forced.size() ? budget - forced.size() : 0;
  for (const auto& [c, t] : ranked) {
    if (forced.count(t)) {
      chosen.push_back(t);
    } else if (free_slots > 0) {
      chosen.push_back(t);
      --free_slots;
    }
  }
  return Vocabulary(chosen);
}

Tokens fit_span(std::span<const std::string> tokens, int L) {
  if (L < 1) throw ValidationError("span length must be positive");
  Tokens out(tokens.begin(), tokens.begin() + std::min<std::size_t>(tokens.size(), L));
  out.resize(L, std::string(kNullToken));
  return out;
}

}  // namespace vrdial::corpus
