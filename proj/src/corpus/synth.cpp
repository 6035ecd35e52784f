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

#include <algorithm>
#include <string>

#include "vrdial/corpus/corpus.hpp"
#include "vrdial/error.hpp"
#include "vrdial/nn/random.hpp"

namespace vrdial::corpus {
namespace {

using kg::EntityType;

struct Planted {
  int disease = 0;
  std::vector<int> symptoms;
  std::vector<int> medicines;
};

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

void append_list(Tokens& out, const Tokens& items) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out.push_back("and");
    out.push_back(items[i]);
  }
}

// "@" takes `slots` and "#" takes `refs`, each joined with "and".
Tokens fill(const std::string& pattern, const Tokens& slots, const Tokens& refs = {}) {
  Tokens out;
  for (auto& t : tokenize(pattern)) {
    if (t == "@") {
      append_list(out, slots);
    } else if (t == "#") {
      append_list(out, refs);
    } else {
      out.push_back(t);
    }
  }
  return out;
}

Tokens fill(const std::string& pattern, const std::string& slot) {
  return fill(pattern, Tokens{slot});
}

const std::vector<std::string> kOpen = {"doctor i have @ recently", "hello i have been having @",
                                        "i suffer from @ these days"};
const std::vector<std::string> kConfirm = {"yes i also have @", "yes there is some @ too"};
const std::vector<std::string> kDeny = {"no i do not think so", "no not really"};
const std::vector<std::string> kAskTreatment = {"what medicine should i take ?",
                                                "how should it be treated ?"};
const std::vector<std::string> kThanks = {"thank you doctor", "thanks a lot"};
// Diagnoses and prescriptions refer back to what was established earlier,
// so the accumulated state is needed beyond the current exchange.
const std::vector<std::string> kAsk = {"do you also have @ ?", "have you noticed any @ ?"};
const std::vector<std::string> kDiagnose = {"with # it looks like @ .",
                                            "given # you probably have @ ."};
const std::vector<std::string> kPrescribe = {"for # you can take @ .", "to treat # take @ ."};
const std::vector<std::string> kChitchat = {"you are welcome , take care .",
                                            "get well soon and rest more ."};

std::vector<ActionCategory> plan(int turns) {
  using C = ActionCategory;
  if (turns == 1) return {C::kDiagnosis};
  if (turns == 2) return {C::kDiagnosis, C::kPrescribeMedicine};
  std::vector<C> p(static_cast<std::size_t>(turns >= 4 ? turns - 3 : 1), C::kAskSymptoms);
  p.push_back(C::kDiagnosis);
  p.push_back(C::kPrescribeMedicine);
  if (turns >= 4) p.push_back(C::kChitchat);
  return p;
}

}  // namespace

std::vector<DialogueSession> synth_corpus(const kg::KnowledgeGraph& kg, std::uint64_t seed,
                                          const SynthParams& params) {
  if (params.sessions < 0 || params.turns_per_session < 1) {
    throw ValidationError("synth: sessions must be >= 0 and turns >= 1");
  }
  if (params.symptom_rate < 0.0 || params.symptom_rate > 1.0) {
    throw ValidationError("synth: symptom_rate must lie in [0, 1]");
  }
  const int symptom_of = kg.find_relation("symptom_of");
  const int treated_by = kg.find_relation("treated_by");
  std::vector<Planted> diseases(kg.entity_count());
  std::vector<int> all_symptoms;
  for (int e = 0; e < kg.entity_count(); ++e) {
    if (kg.entity(e).type == EntityType::kSymptom) all_symptoms.push_back(e);
  }
  for (const auto& edge : kg.edges()) {
    if (edge.relation == symptom_of && kg.entity(edge.head).type == EntityType::kSymptom &&
        kg.entity(edge.tail).type == EntityType::kDisease) {
      diseases[edge.tail].symptoms.push_back(edge.head);
    }
    if (edge.relation == treated_by && kg.entity(edge.head).type == EntityType::kDisease) {
      diseases[edge.head].medicines.push_back(edge.tail);
    }
  }
  std::vector<Planted> eligible;
  for (int e = 0; e < kg.entity_count(); ++e) {
    auto& d = diseases[e];
    if (kg.entity(e).type != EntityType::kDisease || d.symptoms.empty() || d.medicines.empty()) {
      continue;
    }
    d.disease = e;
    std::sort(d.symptoms.begin(), d.symptoms.end());
    std::sort(d.medicines.begin(), d.medicines.end());
    eligible.push_back(d);
  }
  if (eligible.empty()) {
    throw ValidationError(
        "synth: graph needs a disease with a symptom_of in-edge and a treated_by out-edge");
  }
  auto name = [&](int e) { return kg.entity(e).name; };

  std::vector<DialogueSession> out;
  out.reserve(params.sessions);
  const auto policy = plan(params.turns_per_session);
  for (int s = 0; s < params.sessions; ++s) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(s)}));
    const Planted& d = pick(eligible, rng);
    DialogueSession session;
    session.id = "synth-" + std::to_string(s);
    session.states.emplace();
    session.actions.emplace();
    std::vector<int> reported{pick(d.symptoms, rng)};
    bool diagnosed = false;
    int pending = -1;  // symptom asked about in the previous response
    ActionCategory previous = ActionCategory::kChitchat;
    for (std::size_t t = 0; t < policy.size(); ++t) {
      Turn turn;
      if (t == 0) {
        turn.patient = fill(pick(kOpen, rng), name(reported[0]));
      } else if (previous == ActionCategory::kAskSymptoms) {
        if (uniform_open(rng) < params.symptom_rate) {
          turn.patient = fill(pick(kConfirm, rng), name(pending));
          reported.push_back(pending);
        } else {
          turn.patient = tokenize(pick(kDeny, rng));
        }
      } else if (previous == ActionCategory::kDiagnosis) {
        turn.patient = tokenize(pick(kAskTreatment, rng));
      } else {
        turn.patient = tokenize(pick(kThanks, rng));
      }

      StateLabel state;
      for (int e : reported) state.tokens.push_back(name(e));
      if (diagnosed) state.tokens.push_back(name(d.disease));

      ActionLabel action{policy[t], {}};
      switch (policy[t]) {
        case ActionCategory::kAskSymptoms: {
          std::vector<int> options;
          for (int x : d.symptoms) {
            if (std::find(reported.begin(), reported.end(), x) == reported.end()) options.push_back(x);
          }
          if (options.empty()) {
            for (int x : all_symptoms) {
              if (std::find(reported.begin(), reported.end(), x) == reported.end()) {
                options.push_back(x);
              }
            }
          }
          pending = options.empty() ? reported[0] : pick(options, rng);
          action.keywords = {name(pending)};
          turn.physician = fill(pick(kAsk, rng), name(pending));
          break;
        }
        case ActionCategory::kDiagnosis: {
          action.keywords = {name(d.disease)};
          Tokens refs;
          for (int e : reported) refs.push_back(name(e));
          turn.physician = fill(pick(kDiagnose, rng), Tokens{name(d.disease)}, refs);
          diagnosed = true;
          break;
        }
        case ActionCategory::kPrescribeMedicine: {
          std::vector<int> meds = d.medicines;
          shuffle_in_place(meds, rng);
          meds.resize(std::min<std::size_t>(meds.size(), 2));
          std::sort(meds.begin(), meds.end());
          Tokens names;
          for (int e : meds) names.push_back(name(e));
          action.keywords = names;
          turn.physician = fill(pick(kPrescribe, rng), names, Tokens{name(d.disease)});
          break;
        }
        case ActionCategory::kChitchat:
          turn.physician = tokenize(pick(kChitchat, rng));
          break;
      }
      previous = policy[t];
      session.turns.push_back(std::move(turn));
      session.states->push_back(std::move(state));
      session.actions->push_back(std::move(action));
    }
    out.push_back(std::move(session));
  }
  return out;
}

}  // namespace vrdial::corpus
