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

#include <istream>
#include <ostream>

#include "json.hpp"
#include "vrdial/error.hpp"
#include "vrdial/kg/graph.hpp"

namespace vrdial::kg {

void save_graph(std::ostream& out, const KnowledgeGraph& kg) {
  nlohmann::json doc;
  auto& entities = doc["entities"] = nlohmann::json::array();
  for (const auto& e : kg.entities()) {
    entities.push_back({{"name", e.name}, {"type", std::string(to_string(e.type))}});
  }
  doc["relations"] = kg.relations();
  auto& edges = doc["edges"] = nlohmann::json::array();
  for (const auto& e : kg.edges()) edges.push_back({e.head, e.relation, e.tail});
  out << doc.dump(1) << '\n';
}

KnowledgeGraph load_graph_json(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("graph document: ") + e.what(), 0);
  }
  KnowledgeGraph kg;
  try {
    for (const auto& e : doc.at("entities")) {
      kg.add_entity(e.at("name").get<std::string>(),
                    parse_entity_type(e.at("type").get<std::string>()));
    }
    for (const auto& r : doc.at("relations")) kg.add_relation(r.get<std::string>());
    for (const auto& e : doc.at("edges")) {
      kg.add_edge(e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<int>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("graph document: ") + e.what(), 0);
  }
  if (kg.entity_count() != static_cast<int>(doc.at("entities").size())) {
    throw ValidationError("graph document lists duplicate entity names");
  }
  return kg;
}

}  // namespace vrdial::kg
