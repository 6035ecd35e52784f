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

#ifndef VRDIAL_MODEL_BEAM_HPP_
#define VRDIAL_MODEL_BEAM_HPP_

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "vrdial/error.hpp"

namespace vrdial::model {

struct BeamResult {
  std::vector<int> tokens;  // content tokens, EOS excluded
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / number of emitted tokens (EOS included)
};

// Length-normalized beam search. `step(state, prev)` advances `state` and
// returns next-token probabilities indexed by token id. A hypothesis ends
// when it emits `eos` or holds `max_len` content tokens. The `beam` best
// extensions (EOS included) survive each step; ties keep the lower token id,
// so results are deterministic and beam 1 is greedy decoding.
template <class State, class Step>
BeamResult beam_search(State init, Step step, int beam, int max_len, int bos, int eos) {
  if (beam < 1) throw ValidationError("beam width must be at least 1");
  struct Hyp {
    State state;
    std::vector<int> tokens;
    double log_prob = 0.0;
  };
  struct Candidate {
    int parent;
    int token;
    double log_prob;
  };
  if (max_len <= 0) return BeamResult{};
  std::vector<Hyp> live;
  live.push_back(Hyp{std::move(init), {}, 0.0});
  std::vector<BeamResult> done;
  auto finish = [&](std::vector<int> tokens, double lp, int emitted) {
    done.push_back(BeamResult{std::move(tokens), lp, lp / std::max(1, emitted)});
  };
  for (int len = 0; !live.empty(); ++len) {
    std::vector<Candidate> cands;
    std::vector<State> advanced;
    advanced.reserve(live.size());
    for (int h = 0; h < static_cast<int>(live.size()); ++h) {
      State s = live[h].state;
      const int prev = live[h].tokens.empty() ? bos : live[h].tokens.back();
      const std::vector<double> probs = step(s, prev);
      advanced.push_back(std::move(s));
      for (int k = 0; k < static_cast<int>(probs.size()); ++k) {
        if (!(probs[k] > 0.0)) continue;
        cands.push_back(Candidate{h, k, live[h].log_prob + std::log(probs[k])});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.log_prob > b.log_prob;
    });
    if (static_cast<int>(cands.size()) > beam) cands.resize(beam);
    std::vector<Hyp> next;
    for (const auto& c : cands) {
      if (c.token == eos) {
        finish(live[c.parent].tokens, c.log_prob, len + 1);
        continue;
      }
      std::vector<int> tokens = live[c.parent].tokens;
      tokens.push_back(c.token);
      if (static_cast<int>(tokens.size()) >= max_len) {
        finish(std::move(tokens), c.log_prob, len + 1);
      } else {
        next.push_back(Hyp{advanced[c.parent], std::move(tokens), c.log_prob});
      }
    }
    live = std::move(next);
  }
  if (done.empty()) return BeamResult{};
  std::size_t best = 0;
  for (std::size_t i = 1; i < done.size(); ++i) {
    if (done[i].score > done[best].score) best = i;
  }
  return done[best];
}

}  // namespace vrdial::model

#endif  // VRDIAL_MODEL_BEAM_HPP_
