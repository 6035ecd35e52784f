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

// Independent reference computations used by unit and acceptance tests.

#ifndef VRDIAL_TESTS_ORACLES_HPP_
#define VRDIAL_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vrdial/kg/graph.hpp"
#include "vrdial/nn/random.hpp"

namespace vrdial::testing {

// Level-synchronous reachability over an adjacency matrix, seeded at the
// seed set and expanded n times.
inline std::set<int> reachable_oracle(int nodes, const std::vector<std::pair<int, int>>& edges,
                                      const std::vector<int>& seeds, int n) {
  std::vector<std::vector<char>> adj(nodes, std::vector<char>(nodes, 0));
  for (auto [a, b] : edges) adj[a][b] = adj[b][a] = 1;
  std::set<int> level(seeds.begin(), seeds.end());
  std::set<int> all = level;
  for (int step = 0; step < n; ++step) {
    std::set<int> next;
    for (int u : level) {
      for (int w = 0; w < nodes; ++w) {
        if (adj[u][w] && !all.count(w)) next.insert(w);
      }
    }
    all.insert(next.begin(), next.end());
    level = std::move(next);
  }
  return all;
}

// Random graph with node names "n<i>" over a few relations.
struct RandomGraph {
  std::vector<kg::Triplet> triplets;
  std::vector<std::pair<int, int>> pairs;
  int nodes = 0;
};

inline RandomGraph random_graph(Rng& rng, int max_nodes, int max_edges) {
  RandomGraph g;
  g.nodes = 2 + static_cast<int>(uniform_index(rng, max_nodes - 1));
  const int edges = static_cast<int>(uniform_index(rng, max_edges + 1));
  for (int i = 0; i < g.nodes; ++i) {
    // Self-loop on a private relation registers isolated nodes too.
    g.triplets.push_back({"n" + std::to_string(i), "self", "n" + std::to_string(i),
                          kg::EntityType::kSymptom, kg::EntityType::kSymptom});
  }
  for (int e = 0; e < edges; ++e) {
    const int a = static_cast<int>(uniform_index(rng, g.nodes));
    const int b = static_cast<int>(uniform_index(rng, g.nodes));
    g.triplets.push_back({"n" + std::to_string(a), "r" + std::to_string(uniform_index(rng, 3)),
                          "n" + std::to_string(b), kg::EntityType::kSymptom,
                          kg::EntityType::kSymptom});
    g.pairs.emplace_back(a, b);
  }
  return g;
}

// Corpus-level BLEU-2 computed straight from the textbook definition.
inline double bleu2_oracle(const std::vector<std::vector<std::string>>& hyps,
                           const std::vector<std::vector<std::string>>& refs, double eps = 1e-9) {
  double match[2] = {0, 0};
  double total[2] = {0, 0};
  double hyp_len = 0;
  double ref_len = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    hyp_len += static_cast<double>(hyps[s].size());
    ref_len += static_cast<double>(refs[s].size());
    for (int n = 1; n <= 2; ++n) {
      std::map<std::vector<std::string>, int> hc, rc;
      for (std::size_t i = 0; i + n <= hyps[s].size(); ++i) {
        ++hc[std::vector<std::string>(hyps[s].begin() + i, hyps[s].begin() + i + n)];
      }
      for (std::size_t i = 0; i + n <= refs[s].size(); ++i) {
        ++rc[std::vector<std::string>(refs[s].begin() + i, refs[s].begin() + i + n)];
      }
      for (const auto& [g, c] : hc) {
        total[n - 1] += c;
        auto it = rc.find(g);
        if (it != rc.end()) match[n - 1] += std::min(c, it->second);
      }
    }
  }
  double logp = 0.0;
  for (int n = 0; n < 2; ++n) {
    const double p = total[n] > 0 ? std::max(match[n], eps) / total[n] : eps;
    logp += 0.5 * std::log(p);
  }
  const double bp = hyp_len >= ref_len || hyp_len == 0 ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return bp * std::exp(logp);
}

}  // namespace vrdial::testing

#endif  // VRDIAL_TESTS_ORACLES_HPP_
