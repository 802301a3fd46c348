#include "semnav/priors.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "semnav/error.hpp"

namespace semnav {

using nlohmann::json;

void PriorGraph::validate() const {
  std::set<int> node_set(nodes.begin(), nodes.end());
  if (node_set.size() != nodes.size())
    throw InvariantViolation("duplicate-node");
  std::set<std::tuple<int, int, std::string>> seen;
  for (const auto& e : edges) {
    if (e.a == e.b) throw InvariantViolation("self-edge");
    if (!node_set.count(e.a) || !node_set.count(e.b))
      throw InvariantViolation("edge-endpoint-missing");
    if (e.weight < 0.0 || e.weight > 1.0)
      throw InvariantViolation("weight-out-of-range");
    auto key = std::make_tuple(std::min(e.a, e.b), std::max(e.a, e.b), e.relation);
    if (!seen.insert(key).second) throw InvariantViolation("duplicate-edge");
  }
}

std::vector<int> PriorGraph::neighbors(int category) const {
  std::set<int> out;
  for (const auto& e : edges) {
    if (e.a == category) out.insert(e.b);
    if (e.b == category) out.insert(e.a);
  }
  return {out.begin(), out.end()};
}

PriorGraph derive_prior_graph(const std::vector<Scene>& scenes,
                              double min_weight) {
  if (scenes.empty()) throw std::invalid_argument("empty-scene-list");
  if (min_weight < 0.0) throw std::invalid_argument("bad-min-weight");

  std::set<int> all_cats;
  std::map<std::pair<int, int>, int> near_scenes;
  // Instances are "near" when any pair of footprint cells sits within
  // 1.0 m center-to-center, i.e. squared cell distance <= 400.
  constexpr int kNear2 = 400;
  for (const auto& s : scenes) {
    std::map<int, std::vector<Cell>> cells_by_cat;
    for (const auto& o : s.objects) {
      all_cats.insert(o.category);
      auto& v = cells_by_cat[o.category];
      v.insert(v.end(), o.footprint.begin(), o.footprint.end());
    }
    std::set<std::pair<int, int>> near_here;
    for (auto ia = cells_by_cat.begin(); ia != cells_by_cat.end(); ++ia) {
      auto ib = ia;
      for (++ib; ib != cells_by_cat.end(); ++ib) {
        bool near = false;
        for (const auto& ca : ia->second) {
          for (const auto& cb : ib->second) {
            int dx = ca.x - cb.x, dy = ca.y - cb.y;
            if (dx * dx + dy * dy <= kNear2) {
              near = true;
              break;
            }
          }
          if (near) break;
        }
        if (near) near_here.insert({ia->first, ib->first});
      }
    }
    for (const auto& p : near_here) ++near_scenes[p];
  }

  PriorGraph g;
  g.nodes.assign(all_cats.begin(), all_cats.end());
  for (const auto& [pair, count] : near_scenes) {
    double weight = static_cast<double>(count) / scenes.size();
    if (weight >= min_weight && count > 0)
      g.edges.push_back({pair.first, pair.second, "near", weight});
  }
  g.validate();
  return g;
}

std::vector<int> related_categories(const PriorGraph& graph,
                                    const std::vector<int>& targets) {
  std::set<int> target_set(targets.begin(), targets.end());
  std::set<int> out;
  for (int t : targets)
    for (int n : graph.neighbors(t))
      if (!target_set.count(n)) out.insert(n);
  return {out.begin(), out.end()};
}

KeyObjectsMap build_key_objects_map(const SemanticMap& map,
                                    const std::vector<int>& targets,
                                    const PriorGraph& graph) {
  for (int t : targets)
    if (t < 0 || t >= map.k_total())
      throw std::invalid_argument("dims-mismatch: target category outside map channels");
  std::vector<int> related = related_categories(graph, targets);
  for (int r : related)
    if (r < 0 || r >= map.k_total())
      throw std::invalid_argument("dims-mismatch: related category outside map channels");

  KeyObjectsMap km;
  km.l = map.l();
  km.w = map.w();
  km.targets.assign(static_cast<size_t>(km.l) * km.w, 0);
  km.related.assign(static_cast<size_t>(km.l) * km.w, 0);
  for (int y = 0; y < km.w; ++y)
    for (int x = 0; x < km.l; ++x) {
      size_t i = cell_index(x, y, km.l);
      for (int t : targets)
        if (map.count(x, y, t) > 0) {
          km.targets[i] = 1;
          break;
        }
      for (int r : related)
        if (map.count(x, y, r) > 0) {
          km.related[i] = 1;
          break;
        }
    }
  return km;
}

std::vector<Cell> KeyObjectsMap::target_cells() const {
  std::vector<Cell> out;
  for (int y = 0; y < w; ++y)
    for (int x = 0; x < l; ++x)
      if (targets[cell_index(x, y, l)]) out.push_back({x, y});
  return out;
}

std::vector<Cell> KeyObjectsMap::related_cells() const {
  std::vector<Cell> out;
  for (int y = 0; y < w; ++y)
    for (int x = 0; x < l; ++x)
      if (related[cell_index(x, y, l)]) out.push_back({x, y});
  return out;
}

// --- JSON I/O ---

namespace {
int lookup_cat(const std::vector<std::string>& vocab, const std::string& name) {
  for (size_t i = 0; i < vocab.size(); ++i)
    if (vocab[i] == name) return static_cast<int>(i);
  throw ParseError("unknown-category: " + name);
}
}  // namespace

std::string prior_graph_to_json_string(const PriorGraph& graph,
                                       const std::vector<std::string>& vocab) {
  json j;
  json nodes = json::array();
  for (int n : graph.nodes) nodes.push_back(vocab.at(n));
  j["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& e : graph.edges) {
    json je;
    je["a"] = vocab.at(e.a);
    je["b"] = vocab.at(e.b);
    je["relation"] = e.relation;
    je["weight"] = e.weight;
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  return j.dump(2) + "\n";
}

PriorGraph prior_graph_from_json_string(const std::string& text,
                                        const std::vector<std::string>& vocab) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad-json: ") + e.what());
  }
  PriorGraph g;
  try {
    auto nodes_it = j.find("nodes");
    auto edges_it = j.find("edges");
    if (nodes_it == j.end()) throw ParseError("missing-field: nodes");
    if (edges_it == j.end()) throw ParseError("missing-field: edges");
    for (const auto& jn : *nodes_it)
      g.nodes.push_back(lookup_cat(vocab, jn.get<std::string>()));
    std::sort(g.nodes.begin(), g.nodes.end());
    for (const auto& je : *edges_it) {
      PriorEdge e;
      e.a = lookup_cat(vocab, je.at("a").get<std::string>());
      e.b = lookup_cat(vocab, je.at("b").get<std::string>());
      e.relation = je.at("relation").get<std::string>();
      e.weight = je.at("weight").get<double>();
      g.edges.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad-json: ") + e.what());
  }
  g.validate();
  return g;
}

void save_prior_graph(const PriorGraph& graph, const std::string& path,
                      const std::vector<std::string>& vocab) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot-open: " + path);
  f << prior_graph_to_json_string(graph, vocab);
}

PriorGraph load_prior_graph(const std::string& path,
                            const std::vector<std::string>& vocab) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot-open: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return prior_graph_from_json_string(ss.str(), vocab);
}

}  // namespace semnav
