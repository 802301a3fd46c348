#pragma once
#include <string>
#include <vector>

#include "semnav/semantic_map.hpp"
#include "semnav/scene.hpp"

namespace semnav {

struct PriorEdge {
  int a = 0, b = 0;      // category ids, a != b
  std::string relation;  // e.g. "near"
  double weight = 0.0;   // [0, 1]
};

// Category co-occurrence graph. Edges are undirected for neighbor
// queries; (a, b, relation) triples are unique up to endpoint order.
struct PriorGraph {
  std::vector<int> nodes;  // sorted, distinct category ids
  std::vector<PriorEdge> edges;

  void validate() const;  // throws InvariantViolation naming the failure
  std::vector<int> neighbors(int category) const;
};

// Edge (a, b, "near") weighted by the fraction of scenes in which some
// a-instance sits within 1.0 m of some b-instance (footprint cell centers).
// Edges below min_weight are dropped. Throws std::invalid_argument
// ("empty-scene-list") when scenes is empty.
PriorGraph derive_prior_graph(const std::vector<Scene>& scenes,
                              double min_weight);

// Union of graph neighbors of the targets, minus the targets themselves.
std::vector<int> related_categories(const PriorGraph& graph,
                                    const std::vector<int>& targets);

// Two boolean layers over the map: cells carrying any target category
// count, and cells carrying any related category count.
struct KeyObjectsMap {
  int l = 0, w = 0;
  std::vector<uint8_t> targets;
  std::vector<uint8_t> related;

  bool target_at(int x, int y) const { return targets[cell_index(x, y, l)] != 0; }
  bool related_at(int x, int y) const { return related[cell_index(x, y, l)] != 0; }
  std::vector<Cell> target_cells() const;
  std::vector<Cell> related_cells() const;
};

KeyObjectsMap build_key_objects_map(const SemanticMap& map,
                                    const std::vector<int>& targets,
                                    const PriorGraph& graph);

std::string prior_graph_to_json_string(const PriorGraph& graph,
                                       const std::vector<std::string>& vocab);
PriorGraph prior_graph_from_json_string(const std::string& text,
                                        const std::vector<std::string>& vocab);
void save_prior_graph(const PriorGraph& graph, const std::string& path,
                      const std::vector<std::string>& vocab);
PriorGraph load_prior_graph(const std::string& path,
                            const std::vector<std::string>& vocab);

}  // namespace semnav
