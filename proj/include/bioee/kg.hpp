#pragma once

// Two-layer knowledge graph: concept nodes with declared semantic types, plus
// typed relations in three layers (concept-concept, concept-semantic,
// semantic-semantic). Node names equal ids at this scale.
//
// TSV formats:
//   triples file:         head<TAB>relation<TAB>tail<TAB>layer   (layer: cc|cs|ss)
//   semantic types file:  concept_id<TAB>semantic_type_id        (one pair per line)
//
// The semantic-types file is the authority for which ids are semantic nodes.
// UnknownEndpoint: an ss endpoint or cs tail that is not a declared semantic
// type anywhere. InconsistentLayer: an id used as both concept and semantic
// type, or a cs edge whose tail is not among the head's declared types.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bioee/common.hpp"

namespace bioee::kg {

enum class Layer { ConceptConcept, ConceptSemantic, SemanticSemantic };

inline const char* layer_name(Layer l) {
  switch (l) {
    case Layer::ConceptConcept: return "cc";
    case Layer::ConceptSemantic: return "cs";
    default: return "ss";
  }
}

struct Triple {
  std::string head, relation, tail;
  Layer layer = Layer::ConceptConcept;

  auto tie() const { return std::tie(head, relation, tail, layer); }
  bool operator<(const Triple& o) const { return tie() < o.tie(); }
  bool operator==(const Triple& o) const { return tie() == o.tie(); }
};

struct KnowledgeGraph {
  std::map<std::string, std::vector<std::string>> concept_types;  // concept -> sorted declared types
  std::set<std::string> semantic_nodes;
  std::vector<Triple> relations;  // deduplicated, sorted
  std::set<std::string> relation_labels;

  bool is_concept(const std::string& id) const { return concept_types.count(id) > 0; }
  bool is_semantic(const std::string& id) const { return semantic_nodes.count(id) > 0; }

  size_t concept_count() const { return concept_types.size(); }
  size_t semantic_count() const { return semantic_nodes.size(); }
  size_t entity_count() const { return concept_count() + semantic_count(); }

  bool has_triple(const Triple& t) const {
    return std::binary_search(relations.begin(), relations.end(), t);
  }

  // All entity ids of the same layer class as `id`, sorted.
  std::vector<std::string> entities_like(const std::string& id) const {
    std::vector<std::string> out;
    if (is_semantic(id)) {
      out.assign(semantic_nodes.begin(), semantic_nodes.end());
    } else {
      for (const auto& [concept, types] : concept_types) out.push_back(concept);
    }
    return out;
  }
};

inline KnowledgeGraph build_kg(std::vector<Triple> triples,
                               const std::vector<std::pair<std::string, std::string>>& declared_types) {
  KnowledgeGraph kg;
  std::map<std::string, std::set<std::string>> types;
  for (const auto& [concept, type] : declared_types) {
    if (concept.empty() || type.empty()) fail("UnknownEndpoint", "empty id in semantic type declaration");
    types[concept].insert(type);
    kg.semantic_nodes.insert(type);
  }
  for (const auto& [concept, type_set] : types) {
    if (kg.semantic_nodes.count(concept))
      fail("InconsistentLayer", concept + " declared as both concept and semantic type");
    kg.concept_types[concept] = {type_set.begin(), type_set.end()};
  }

  auto declare_concept = [&](const std::string& id, const Triple& t) {
    if (id.empty()) fail("UnknownEndpoint", "empty endpoint in " + t.head + " -> " + t.tail);
    if (kg.semantic_nodes.count(id))
      fail("InconsistentLayer", id + " used as a concept in a " + layer_name(t.layer) + " triple but declared semantic");
    kg.concept_types.emplace(id, std::vector<std::string>{});
  };

  std::set<Triple> unique(triples.begin(), triples.end());
  for (const Triple& t : unique) {
    switch (t.layer) {
      case Layer::ConceptConcept:
        declare_concept(t.head, t);
        declare_concept(t.tail, t);
        break;
      case Layer::ConceptSemantic: {
        declare_concept(t.head, t);
        if (!kg.semantic_nodes.count(t.tail))
          fail("UnknownEndpoint", t.tail + " is not a declared semantic type");
        const auto& declared = kg.concept_types.at(t.head);
        if (!std::binary_search(declared.begin(), declared.end(), t.tail))
          fail("InconsistentLayer", "cs edge " + t.head + " -> " + t.tail + " is not a declared type of the head");
        break;
      }
      case Layer::SemanticSemantic:
        for (const std::string* id : {&t.head, &t.tail}) {
          if (!kg.semantic_nodes.count(*id)) {
            if (kg.concept_types.count(*id))
              fail("InconsistentLayer", *id + " used as a semantic type in an ss triple but is a concept");
            fail("UnknownEndpoint", *id + " is not a declared semantic type");
          }
        }
        break;
    }
    kg.relation_labels.insert(t.relation);
  }
  kg.relations.assign(unique.begin(), unique.end());
  return kg;
}

inline KnowledgeGraph load_kg(const std::filesystem::path& triples_file,
                              const std::filesystem::path& semantic_types_file) {
  std::vector<std::pair<std::string, std::string>> declared;
  int line_no = 0;
  for (const std::string& line : split(read_file(semantic_types_file), '\n')) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2)
      fail("MalformedLine", semantic_types_file.string() + " line " + std::to_string(line_no));
    declared.emplace_back(fields[0], fields[1]);
  }

  std::vector<Triple> triples;
  line_no = 0;
  for (const std::string& line : split(read_file(triples_file), '\n')) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 4) fail("MalformedLine", triples_file.string() + " line " + std::to_string(line_no));
    Triple t;
    t.head = fields[0];
    t.relation = fields[1];
    t.tail = fields[2];
    std::string layer = lower(fields[3]);
    if (layer == "cc")
      t.layer = Layer::ConceptConcept;
    else if (layer == "cs")
      t.layer = Layer::ConceptSemantic;
    else if (layer == "ss")
      t.layer = Layer::SemanticSemantic;
    else
      fail("MalformedLine", triples_file.string() + " line " + std::to_string(line_no) + ": bad layer '" + fields[3] + "'");
    triples.push_back(std::move(t));
  }
  return build_kg(std::move(triples), declared);
}

}  // namespace bioee::kg
