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

#include "vrdial/kg/graph.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "vrdial/error.hpp"

namespace vrdial::kg {
namespace {

constexpr std::string_view kTypeNames[kEntityTypeCount] = {"disease", "symptom", "medicine",
                                                           "treatment"};

std::string trim(std::string_view s) {
  std::size_t lo = 0;
  std::size_t hi = s.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
  return std::string(s.substr(lo, hi - lo));
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) out.push_back(std::move(w));
  return out;
}

std::string edge_key(int h, int r, int t) {
  return std::to_string(h) + ':' + std::to_string(r) + ':' + std::to_string(t);
}

}  // namespace

std::string case_fold(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view to_string(EntityType type) { return kTypeNames[static_cast<int>(type)]; }

EntityType parse_entity_type(std::string_view token) {
  const std::string folded = case_fold(trim(token));
  for (int i = 0; i < kEntityTypeCount; ++i) {
    if (folded == kTypeNames[i]) return static_cast<EntityType>(i);
  }
  throw ValidationError("unknown entity type '" + std::string(token) + "'");
}

// ---------------------------------------------------------------------------
// Triplet TSV

std::vector<Triplet> load_triplets(std::istream& in) {
  std::vector<Triplet> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(trim(std::string_view(line).substr(start, tab - start)));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 5) {
      throw ParseError("expected 5 tab-separated fields, found " + std::to_string(fields.size()),
                       lineno);
    }
    for (const auto& f : fields) {
      if (f.empty()) throw ParseError("empty field", lineno);
    }
    Triplet t;
    t.head = fields[0];
    t.relation = fields[1];
    t.tail = fields[2];
    try {
      t.head_type = parse_entity_type(fields[3]);
      t.tail_type = parse_entity_type(fields[4]);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
    std::string key = fields[0];
    for (int i = 1; i < 5; ++i) key += '\t' + fields[i];
    if (seen.insert(key).second) out.push_back(std::move(t));
  }
  return out;
}

void save_triplets(std::ostream& out, std::span<const Triplet> triplets) {
  for (const auto& t : triplets) {
    out << t.head << '\t' << t.relation << '\t' << t.tail << '\t' << to_string(t.head_type)
        << '\t' << to_string(t.tail_type) << '\n';
  }
}

// ---------------------------------------------------------------------------
// KnowledgeGraph

int KnowledgeGraph::find_entity(std::string_view name) const {
  auto it = entity_index_.find(case_fold(trim(name)));
  return it == entity_index_.end() ? -1 : it->second;
}

int KnowledgeGraph::find_relation(std::string_view name) const {
  auto it = relation_index_.find(std::string(name));
  return it == relation_index_.end() ? -1 : it->second;
}

int KnowledgeGraph::extended_relation_count() const {
  return find_relation(kCoMention) >= 0 ? relation_count() : relation_count() + 1;
}

const std::string& KnowledgeGraph::extended_relation(int id) const {
  return id < relation_count() ? relations_[id] : co_mention_name_;
}

int KnowledgeGraph::add_entity(std::string name, EntityType type) {
  name = trim(name);
  if (name.empty()) throw ValidationError("entity name must be non-empty");
  const std::string key = case_fold(name);
  auto it = entity_index_.find(key);
  if (it != entity_index_.end()) {
    const Entity& e = entities_[it->second];
    if (e.type != type) {
      throw ValidationError("entity '" + name + "' declared as both " +
                            std::string(to_string(e.type)) + " and " +
                            std::string(to_string(type)));
    }
    return it->second;
  }
  const int id = entity_count();
  entities_.push_back(Entity{name, type, split_words(key)});
  adjacency_.emplace_back();
  entity_index_.emplace(key, id);
  return id;
}

int KnowledgeGraph::add_relation(std::string name) {
  name = trim(name);
  if (name.empty()) throw ValidationError("relation name must be non-empty");
  auto it = relation_index_.find(name);
  if (it != relation_index_.end()) return it->second;
  const int id = relation_count();
  relations_.push_back(name);
  relation_index_.emplace(name, id);
  const int existing = find_relation(kCoMention);
  co_mention_ = existing >= 0 ? existing : relation_count();
  return id;
}

bool KnowledgeGraph::add_edge(int head, int relation, int tail) {
  if (head < 0 || head >= entity_count() || tail < 0 || tail >= entity_count()) {
    throw ValidationError("edge endpoint is not an entity");
  }
  if (relation < 0 || relation >= relation_count()) throw ValidationError("unknown relation id");
  if (!edge_index_.emplace(edge_key(head, relation, tail), edge_count()).second) return false;
  const int id = edge_count();
  edges_.push_back(Edge{head, relation, tail});
  adjacency_[head].push_back(id);
  if (tail != head) adjacency_[tail].push_back(id);
  return true;
}

KnowledgeGraph build_global_graph(std::span<const Triplet> triplets) {
  KnowledgeGraph kg;
  for (const auto& t : triplets) {
    const int h = kg.add_entity(t.head, t.head_type);
    const int tl = kg.add_entity(t.tail, t.tail_type);
    const int r = kg.add_relation(t.relation);
    kg.add_edge(h, r, tl);
  }
  return kg;
}

// ---------------------------------------------------------------------------
// Linking

std::vector<int> link_entities(std::span<const std::string> tokens, const KnowledgeGraph& kg) {
  std::vector<std::string> folded;
  folded.reserve(tokens.size());
  for (const auto& t : tokens) folded.push_back(case_fold(t));

  // Candidate matches: (start, length, entity).
  struct Match {
    int start;
    int length;
    int entity;
  };
  std::unordered_map<std::string, std::vector<int>> by_first;
  for (int e = 0; e < kg.entity_count(); ++e) by_first[kg.entity(e).tokens.front()].push_back(e);
  std::vector<Match> matches;
  for (int i = 0; i < static_cast<int>(folded.size()); ++i) {
    auto it = by_first.find(folded[i]);
    if (it == by_first.end()) continue;
    for (int e : it->second) {
      const auto& name = kg.entity(e).tokens;
      if (i + name.size() > folded.size()) continue;
      if (std::equal(name.begin(), name.end(), folded.begin() + i)) {
        matches.push_back(Match{i, static_cast<int>(name.size()), e});
      }
    }
  }
  // Greedy selection: longer first, then leftmost; a match is kept only if it
  // does not overlap an already kept one.
  std::stable_sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    if (a.length != b.length) return a.length > b.length;
    return a.start < b.start;
  });
  std::vector<char> covered(folded.size(), 0);
  std::vector<int> out;
  for (const auto& m : matches) {
    bool free = true;
    for (int k = m.start; k < m.start + m.length; ++k) free &= covered[k] == 0;
    if (!free) continue;
    for (int k = m.start; k < m.start + m.length; ++k) covered[k] = 1;
    out.push_back(m.entity);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Retrieval

int LocalSubgraph::local_index(int entity) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), entity);
  return it != nodes.end() && *it == entity ? static_cast<int>(it - nodes.begin()) : -1;
}

LocalSubgraph qsub(const KnowledgeGraph& kg, std::span<const int> seeds, int n, HopMode mode) {
  if (n < 0) throw ValidationError("hop count must be non-negative");
  LocalSubgraph sub;
  sub.hop_limit = n;
  sub.seeds.assign(seeds.begin(), seeds.end());
  std::sort(sub.seeds.begin(), sub.seeds.end());
  sub.seeds.erase(std::unique(sub.seeds.begin(), sub.seeds.end()), sub.seeds.end());
  for (int s : sub.seeds) {
    if (s < 0 || s >= kg.entity_count()) {
      throw ValidationError("seed " + std::to_string(s) + " is not an entity of the graph");
    }
  }

  std::vector<int> dist(kg.entity_count(), -1);
  std::deque<int> frontier;
  for (int s : sub.seeds) {
    dist[s] = 0;
    frontier.push_back(s);
  }
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop_front();
    if (dist[u] == n) continue;
    for (int e : kg.incident(u)) {
      const Edge& edge = kg.edges()[e];
      int w = -1;
      if (edge.head == u) {
        w = edge.tail;
      } else if (mode == HopMode::kUndirected) {
        w = edge.head;
      }
      if (w >= 0 && dist[w] < 0) {
        dist[w] = dist[u] + 1;
        frontier.push_back(w);
      }
    }
  }
  for (int i = 0; i < kg.entity_count(); ++i) {
    if (dist[i] >= 0) sub.nodes.push_back(i);
  }
  for (const Edge& e : kg.edges()) {
    if (dist[e.head] >= 0 && dist[e.tail] >= 0) {
      sub.edges.push_back(SubgraphEdge{sub.local_index(e.head), sub.local_index(e.tail),
                                       e.relation});
    }
  }
  const int co = kg.co_mention_relation();
  for (std::size_t i = 0; i < sub.seeds.size(); ++i) {
    for (std::size_t j = i + 1; j < sub.seeds.size(); ++j) {
      sub.edges.push_back(
          SubgraphEdge{sub.local_index(sub.seeds[i]), sub.local_index(sub.seeds[j]), co});
    }
  }
  return sub;
}

std::vector<SubgraphEdge> shortest_path(const LocalSubgraph& sub, std::span<const int> sources,
                                        int target) {
  const int n = static_cast<int>(sub.nodes.size());
  if (target < 0 || target >= n) return {};
  std::vector<int> via(n, -2);  // edge index used to reach the node; -1 marks a source
  std::deque<int> frontier;
  for (int s : sources) {
    if (s >= 0 && s < n && via[s] == -2) {
      via[s] = -1;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty() && via[target] == -2) {
    const int u = frontier.front();
    frontier.pop_front();
    for (int e = 0; e < static_cast<int>(sub.edges.size()); ++e) {
      const auto& edge = sub.edges[e];
      int w = -1;
      if (edge.src == u) w = edge.dst;
      if (edge.dst == u) w = edge.src;
      if (w >= 0 && via[w] == -2) {
        via[w] = e;
        frontier.push_back(w);
      }
    }
  }
  std::vector<SubgraphEdge> path;
  if (via[target] < 0) return path;
  for (int cur = target; via[cur] >= 0;) {
    SubgraphEdge e = sub.edges[via[cur]];
    const int prev = e.src == cur ? e.dst : e.src;
    path.push_back(e);
    cur = prev;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

KnowledgeGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open knowledge graph '" + path + "'");
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    return load_graph_json(in);
  }
  auto triplets = load_triplets(in);
  return build_global_graph(triplets);
}

}  // namespace vrdial::kg
