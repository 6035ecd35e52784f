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

// Typed entity-relation store, entity linking and seeded n-hop retrieval.

#ifndef VRDIAL_KG_GRAPH_HPP_
#define VRDIAL_KG_GRAPH_HPP_

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vrdial::kg {

enum class EntityType { kDisease = 0, kSymptom = 1, kMedicine = 2, kTreatment = 3 };
inline constexpr int kEntityTypeCount = 4;

std::string_view to_string(EntityType type);
// Throws ValidationError for tokens outside the closed set.
EntityType parse_entity_type(std::string_view token);

struct Triplet {
  std::string head;
  std::string relation;
  std::string tail;
  EntityType head_type = EntityType::kDisease;
  EntityType tail_type = EntityType::kDisease;

  bool operator==(const Triplet&) const = default;
};

// Parses `head<TAB>relation<TAB>tail<TAB>head_type<TAB>tail_type` rows.
// Blank lines and lines starting with '#' are skipped; exact duplicates are
// dropped, keeping first occurrences in input order.
std::vector<Triplet> load_triplets(std::istream& in);
void save_triplets(std::ostream& out, std::span<const Triplet> triplets);

struct Entity {
  std::string name;
  EntityType type = EntityType::kDisease;
  std::vector<std::string> tokens;  // whitespace-split, case-folded name
};

struct Edge {
  int head = 0;
  int relation = 0;
  int tail = 0;

  bool operator==(const Edge&) const = default;
};

inline constexpr std::string_view kCoMention = "co_mention";

class KnowledgeGraph {
 public:
  int entity_count() const { return static_cast<int>(entities_.size()); }
  int relation_count() const { return static_cast<int>(relations_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  const Entity& entity(int id) const { return entities_[id]; }
  const std::string& relation(int id) const { return relations_[id]; }
  const std::vector<Entity>& entities() const { return entities_; }
  const std::vector<std::string>& relations() const { return relations_; }
  const std::vector<Edge>& edges() const { return edges_; }
  // Indices into edges() of every edge touching `id` (either endpoint).
  std::span<const int> incident(int id) const { return adjacency_[id]; }
  int degree(int id) const { return static_cast<int>(adjacency_[id].size()); }

  // Case-insensitive name lookup; -1 when absent.
  int find_entity(std::string_view name) const;
  int find_relation(std::string_view name) const;
  // Relation id used for synthetic seed links in subgraphs. Equals an
  // existing relation when the graph already defines "co_mention".
  int co_mention_relation() const { return co_mention_; }
  // Relation ids including the co-mention relation.
  int extended_relation_count() const;
  const std::string& extended_relation(int id) const;

  int add_entity(std::string name, EntityType type);
  int add_relation(std::string name);
  // Returns false when the edge already exists.
  bool add_edge(int head, int relation, int tail);

 private:
  std::vector<Entity> entities_;
  std::vector<std::string> relations_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
  std::unordered_map<std::string, int> entity_index_;
  std::unordered_map<std::string, int> relation_index_;
  std::unordered_map<std::string, int> edge_index_;
  int co_mention_ = 0;
  std::string co_mention_name_{kCoMention};
};

// One node per distinct (case-folded) entity name. Throws ValidationError
// when one name is declared with two different types.
KnowledgeGraph build_global_graph(std::span<const Triplet> triplets);

// Ids of all entities whose full token sequence occurs contiguously in
// `tokens`; overlapping matches resolve to the longest one (leftmost first
// among equal lengths). Result is sorted and unique.
std::vector<int> link_entities(std::span<const std::string> tokens, const KnowledgeGraph& kg);

struct SubgraphEdge {
  int src = 0;       // local node index
  int dst = 0;       // local node index
  int relation = 0;  // extended relation id (see co_mention_relation)
};

struct LocalSubgraph {
  std::vector<int> nodes;  // entity ids, ascending
  std::vector<SubgraphEdge> edges;
  std::vector<int> seeds;  // entity ids, ascending
  int hop_limit = 0;

  bool empty() const { return nodes.empty(); }
  int local_index(int entity) const;  // -1 when absent
};

enum class HopMode { kUndirected, kDirected };

// Seeds plus every entity within `n` hops of a seed; all graph edges among
// those nodes plus one co_mention edge per unordered seed pair. Throws
// ValidationError for unknown seeds or negative n.
LocalSubgraph qsub(const KnowledgeGraph& kg, std::span<const int> seeds, int n,
                   HopMode mode = HopMode::kUndirected);

// Shortest undirected path (edge indices) from any of `sources` to `target`
// within the subgraph's edges; empty when target is itself a source or
// unreachable.
std::vector<SubgraphEdge> shortest_path(const LocalSubgraph& sub, std::span<const int> sources,
                                        int target);

// JSON document with "entities", "relations" and "edges".
void save_graph(std::ostream& out, const KnowledgeGraph& kg);
KnowledgeGraph load_graph_json(std::istream& in);
// Dispatches on extension: ".json" documents, anything else triplet TSV.
KnowledgeGraph load_graph_file(const std::string& path);

std::string case_fold(std::string_view s);

}  // namespace vrdial::kg

#endif  // VRDIAL_KG_GRAPH_HPP_
