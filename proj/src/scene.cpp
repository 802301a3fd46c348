#include "semnav/scene.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "semnav/error.hpp"
#include "semnav/rng.hpp"

namespace semnav {

using nlohmann::json;

const char* height_band_name(HeightBand b) {
  switch (b) {
    case HeightBand::low: return "low";
    case HeightBand::eye: return "eye";
    default: return "high";
  }
}

HeightBand height_band_from_name(const std::string& name) {
  if (name == "low") return HeightBand::low;
  if (name == "eye") return HeightBand::eye;
  if (name == "high") return HeightBand::high;
  throw ParseError("unknown-height-band: " + name);
}

// Anchors first, then small objects. Generator and prior derivation both
// key off this split, so keep the order stable: it defines category ids.
const std::vector<std::string>& default_vocabulary() {
  static const std::vector<std::string> v = {
      "Desk",     "Table",   "CounterTop", "Shelf",         "Sofa",
      "Bed",      "Cabinet", "Dresser",    "Laptop",        "Box",
      "Apple",    "AlarmClock", "Television", "FloorLamp",  "Book",
      "Mug",      "HousePlant", "Phone",   "Bowl",          "Vase",
      "RemoteControl", "Bottle", "Pillow", "Keys"};
  return v;
}

bool is_anchor_category(const std::string& name) {
  static const std::unordered_set<std::string> anchors = {
      "Desk", "Table", "CounterTop", "Shelf", "Sofa", "Bed", "Cabinet",
      "Dresser"};
  return anchors.count(name) > 0;
}

std::vector<int> Scene::categories_present() const {
  std::vector<int> out;
  for (const auto& o : objects) out.push_back(o.category);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void Scene::validate() {
  if (l < 3 || w < 3) throw InvariantViolation("scene-too-small");
  if (walls.size() != static_cast<size_t>(l) * w)
    throw InvariantViolation("wall-grid-size");
  if (cell_size != kCellSize) throw InvariantViolation("cell-size");
  if (vocab.empty()) throw InvariantViolation("empty-vocabulary");

  cell_object.assign(static_cast<size_t>(l) * w, -1);
  std::unordered_set<int> ids;
  for (size_t oi = 0; oi < objects.size(); ++oi) {
    const auto& o = objects[oi];
    if (!ids.insert(o.id).second)
      throw InvariantViolation("duplicate-object-id");
    if (o.category < 0 || o.category >= static_cast<int>(vocab.size()))
      throw InvariantViolation("category-out-of-range");
    if (o.footprint.empty()) throw InvariantViolation("footprint-empty");
    for (const auto& c : o.footprint) {
      if (!in_bounds(c.x, c.y)) throw InvariantViolation("footprint-out-of-bounds");
      if (wall(c.x, c.y)) throw InvariantViolation("footprint-on-wall");
      int32_t& slot = cell_object[cell_index(c.x, c.y, l)];
      if (slot >= 0) throw InvariantViolation("footprint-overlap");
      slot = static_cast<int32_t>(oi);
    }
    // 4-connectivity of the footprint.
    std::unordered_set<Cell, CellHash> fp(o.footprint.begin(), o.footprint.end());
    std::queue<Cell> q;
    std::unordered_set<Cell, CellHash> seen;
    q.push(o.footprint[0]);
    seen.insert(o.footprint[0]);
    while (!q.empty()) {
      Cell c = q.front();
      q.pop();
      const Cell nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
      for (const auto& n : nb)
        if (fp.count(n) && !seen.count(n)) {
          seen.insert(n);
          q.push(n);
        }
    }
    if (seen.size() != fp.size()) throw InvariantViolation("footprint-disconnected");
  }
  for (const auto& c : spawns) {
    if (!in_bounds(c.x, c.y) || !free(c.x, c.y))
      throw InvariantViolation("spawn-not-free");
  }
}

namespace {

bool free_cells_connected(const Scene& s) {
  int total = 0;
  Cell start{-1, -1};
  for (int y = 0; y < s.w; ++y)
    for (int x = 0; x < s.l; ++x)
      if (s.free(x, y)) {
        ++total;
        if (start.x < 0) start = {x, y};
      }
  if (total == 0) return false;
  std::vector<uint8_t> seen(static_cast<size_t>(s.l) * s.w, 0);
  std::queue<Cell> q;
  q.push(start);
  seen[cell_index(start.x, start.y, s.l)] = 1;
  int visited = 1;
  while (!q.empty()) {
    Cell c = q.front();
    q.pop();
    const Cell nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
    for (const auto& n : nb) {
      if (!s.in_bounds(n.x, n.y) || !s.free(n.x, n.y)) continue;
      uint8_t& f = seen[cell_index(n.x, n.y, s.l)];
      if (!f) {
        f = 1;
        ++visited;
        q.push(n);
      }
    }
  }
  return visited == total;
}

struct Region {
  int x0, y0, x1, y1;  // inclusive interior extent
};

void carve_rooms(Scene& s, int target_rooms, Rng& rng) {
  constexpr int kMinRoom = 10;
  std::vector<Region> regions{{1, 1, s.l - 2, s.w - 2}};
  while (static_cast<int>(regions.size()) < target_rooms) {
    int best = -1;
    long best_area = -1;
    for (size_t i = 0; i < regions.size(); ++i) {
      const auto& r = regions[i];
      int rw = r.x1 - r.x0 + 1, rh = r.y1 - r.y0 + 1;
      if (std::max(rw, rh) < 2 * kMinRoom + 1) continue;
      long area = static_cast<long>(rw) * rh;
      if (area > best_area) {
        best_area = area;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) break;  // nothing left to split; fewer rooms than asked
    Region r = regions[best];
    int rw = r.x1 - r.x0 + 1, rh = r.y1 - r.y0 + 1;
    bool vertical = rw > rh || (rw == rh && rng.bernoulli(0.5));
    if (vertical) {
      int c = r.x0 + kMinRoom + rng.below(rw - 2 * kMinRoom);
      int gap = r.y0 + rng.below(rh - 1);  // 2-cell door
      for (int y = r.y0; y <= r.y1; ++y)
        if (y != gap && y != gap + 1) s.walls[cell_index(c, y, s.l)] = 1;
      regions[best] = {r.x0, r.y0, c - 1, r.y1};
      regions.push_back({c + 1, r.y0, r.x1, r.y1});
    } else {
      int c = r.y0 + kMinRoom + rng.below(rh - 2 * kMinRoom);
      int gap = r.x0 + rng.below(rw - 1);
      for (int x = r.x0; x <= r.x1; ++x)
        if (x != gap && x != gap + 1) s.walls[cell_index(x, c, s.l)] = 1;
      regions[best] = {r.x0, r.y0, r.x1, c - 1};
      regions.push_back({r.x0, c + 1, r.x1, r.y1});
    }
  }
}

// Occupancy probe used during placement, before Scene::validate exists.
bool cell_taken(const Scene& s, const std::vector<int32_t>& occ, int x, int y) {
  return s.wall(x, y) || occ[cell_index(x, y, s.l)] >= 0;
}

bool placement_ok(const Scene& s, const std::vector<int32_t>& occ,
                  const std::vector<Cell>& fp) {
  for (const auto& c : fp) {
    if (c.x < 1 || c.x > s.l - 2 || c.y < 1 || c.y > s.w - 2) return false;
    if (cell_taken(s, occ, c.x, c.y)) return false;
    // Keep a one-cell gap between objects so rooms stay walkable.
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        int nx = c.x + dx, ny = c.y + dy;
        if (s.in_bounds(nx, ny) && occ[cell_index(nx, ny, s.l)] >= 0) return false;
      }
  }
  return true;
}

bool placement_disconnects(Scene& s, std::vector<int32_t>& occ,
                           const std::vector<Cell>& fp, int marker) {
  for (const auto& c : fp) occ[cell_index(c.x, c.y, s.l)] = marker;
  s.cell_object = occ;
  bool ok = free_cells_connected(s);
  for (const auto& c : fp) occ[cell_index(c.x, c.y, s.l)] = -1;
  s.cell_object = occ;
  return !ok;
}

bool try_generate(uint64_t seed, const GenParams& p, Scene& s) {
  Rng rng(seed);
  s = Scene{};
  s.l = p.l;
  s.w = p.w;
  s.vocab = p.vocab;
  s.walls.assign(static_cast<size_t>(s.l) * s.w, 0);
  for (int x = 0; x < s.l; ++x) {
    s.walls[cell_index(x, 0, s.l)] = 1;
    s.walls[cell_index(x, s.w - 1, s.l)] = 1;
  }
  for (int y = 0; y < s.w; ++y) {
    s.walls[cell_index(0, y, s.l)] = 1;
    s.walls[cell_index(s.l - 1, y, s.l)] = 1;
  }
  carve_rooms(s, p.rooms, rng);

  int free_count = 0;
  for (int y = 0; y < s.w; ++y)
    for (int x = 0; x < s.l; ++x)
      if (!s.wall(x, y)) ++free_count;

  // Category subset: roughly 40% anchors, rest small objects.
  std::vector<int> anchor_cats, sat_cats;
  for (size_t i = 0; i < p.vocab.size(); ++i)
    (is_anchor_category(p.vocab[i]) ? anchor_cats : sat_cats).push_back(
        static_cast<int>(i));
  rng.shuffle(anchor_cats);
  rng.shuffle(sat_cats);
  int want = std::min<int>(p.category_count, static_cast<int>(p.vocab.size()));
  int n_anchor_cats = std::min<int>(static_cast<int>(anchor_cats.size()),
                                    std::max(want > 0 ? 1 : 0, want * 2 / 5));
  int n_sat_cats = std::min<int>(static_cast<int>(sat_cats.size()), want - n_anchor_cats);
  anchor_cats.resize(n_anchor_cats);
  sat_cats.resize(n_sat_cats);

  int target_objects = static_cast<int>(
      std::lround(p.object_density * free_count / 100.0));
  if (want == 0) target_objects = 0;
  int target_anchors = anchor_cats.empty() ? 0 : target_objects * 2 / 5;
  if (!anchor_cats.empty() && target_objects > 0 && target_anchors == 0)
    target_anchors = 1;

  std::vector<int32_t> occ(static_cast<size_t>(s.l) * s.w, -1);
  s.cell_object = occ;

  auto place = [&](int category, const std::vector<Cell>& fp, HeightBand band) {
    ObjectInstance o;
    o.id = static_cast<int>(s.objects.size());
    o.category = category;
    o.footprint = fp;
    o.band = band;
    int marker = static_cast<int>(s.objects.size());
    for (const auto& c : fp) occ[cell_index(c.x, c.y, s.l)] = marker;
    s.cell_object = occ;
    s.objects.push_back(std::move(o));
  };

  static const std::vector<std::vector<Cell>> anchor_shapes = {
      {{0, 0}, {1, 0}, {0, 1}, {1, 1}},
      {{0, 0}, {1, 0}},
      {{0, 0}, {0, 1}},
  };

  for (int k = 0; k < target_anchors; ++k) {
    int category = anchor_cats[rng.below(static_cast<int>(anchor_cats.size()))];
    bool placed = false;
    for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
      const auto& shape = anchor_shapes[rng.below(3)];
      int bx = 1 + rng.below(s.l - 2), by = 1 + rng.below(s.w - 2);
      std::vector<Cell> fp;
      for (const auto& d : shape) fp.push_back({bx + d.x, by + d.y});
      if (!placement_ok(s, occ, fp)) continue;
      if (placement_disconnects(s, occ, fp, 9999)) continue;
      place(category, fp, HeightBand::eye);
      placed = true;
    }
  }
  int n_anchors_placed = static_cast<int>(s.objects.size());

  for (int k = n_anchors_placed; k < target_objects; ++k) {
    if (sat_cats.empty()) break;
    int category = sat_cats[rng.below(static_cast<int>(sat_cats.size()))];
    bool placed = false;
    for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
      Cell c;
      if (n_anchors_placed > 0 && rng.bernoulli(0.75)) {
        const auto& a = s.objects[rng.below(n_anchors_placed)];
        const Cell& base = a.footprint[rng.below(static_cast<int>(a.footprint.size()))];
        c = {base.x - 6 + rng.below(13), base.y - 6 + rng.below(13)};
        if (!s.in_bounds(c.x, c.y)) continue;
      } else {
        c = {1 + rng.below(s.l - 2), 1 + rng.below(s.w - 2)};
      }
      std::vector<Cell> fp{c};
      if (!placement_ok(s, occ, fp)) continue;
      if (placement_disconnects(s, occ, fp, 9999)) continue;
      double u = rng.uniform01();
      HeightBand band = u < 0.3   ? HeightBand::low
                        : u < 0.7 ? HeightBand::eye
                                  : HeightBand::high;
      place(category, fp, band);
      placed = true;
    }
  }
  if (target_objects > 0 && s.objects.empty()) return false;

  // Spawn cells, spread out; spacing relaxes if the scene is cramped.
  int min_sp = std::max(3, std::min(s.l, s.w) / 8);
  while (static_cast<int>(s.spawns.size()) < p.spawn_count) {
    bool progressed = false;
    for (int attempt = 0;
         attempt < 400 && static_cast<int>(s.spawns.size()) < p.spawn_count;
         ++attempt) {
      Cell c{1 + rng.below(s.l - 2), 1 + rng.below(s.w - 2)};
      if (!s.free(c.x, c.y)) continue;
      bool far = true;
      for (const auto& e : s.spawns)
        if (std::max(std::abs(e.x - c.x), std::abs(e.y - c.y)) < min_sp) {
          far = false;
          break;
        }
      if (!far) continue;
      s.spawns.push_back(c);
      progressed = true;
    }
    if (static_cast<int>(s.spawns.size()) < p.spawn_count) {
      if (min_sp <= 1 && !progressed) return false;
      min_sp = std::max(1, min_sp / 2);
    }
  }

  if (!free_cells_connected(s)) return false;
  s.validate();
  return true;
}

}  // namespace

Scene generate_scene(uint64_t seed, const GenParams& params) {
  GenParams p = params;
  if (p.vocab.empty()) p.vocab = default_vocabulary();
  if (p.l < 8 || p.w < 8 || p.l > 400 || p.w > 400)
    throw std::invalid_argument("bad-dims");
  if (p.object_density < 0 || p.category_count < 0 || p.spawn_count < 1 ||
      p.rooms < 1)
    throw std::invalid_argument("bad-gen-params");
  for (int attempt = 0; attempt < 24; ++attempt) {
    Scene s;
    if (try_generate(mix_seed(seed, 1000 + attempt), p, s)) {
      s.id = "scene-" + std::to_string(seed);
      return s;
    }
  }
  throw GenerationFailure("scene-generation-exhausted-retries");
}

TaskSpec sample_task(const Scene& scene, int m, int n, uint64_t seed,
                     const std::vector<int>* allowed) {
  if (m < 1 || n < 1) throw std::invalid_argument("bad-task-size");
  auto cats = scene.categories_present();
  if (allowed) {
    std::vector<int> kept;
    for (int c : cats)
      if (std::find(allowed->begin(), allowed->end(), c) != allowed->end())
        kept.push_back(c);
    cats = std::move(kept);
  }
  if (static_cast<int>(cats.size()) < m)
    throw std::invalid_argument("insufficient-categories");
  if (static_cast<int>(scene.spawns.size()) < n)
    throw std::invalid_argument("insufficient-spawns");
  Rng rng(mix_seed(seed, 77));
  rng.shuffle(cats);
  cats.resize(m);
  std::sort(cats.begin(), cats.end());
  auto spawns = scene.spawns;
  rng.shuffle(spawns);
  spawns.resize(n);
  TaskSpec t;
  t.scene_id = scene.id;
  t.targets = cats;
  t.spawn_cells = spawns;
  for (int i = 0; i < n; ++i) t.spawn_headings.push_back(90 * rng.below(4));
  t.seed = seed;
  return t;
}

// --- JSON I/O ---

std::string scene_to_json_string(const Scene& scene) {
  json j;
  j["id"] = scene.id;
  j["dims"] = {scene.l, scene.w};
  j["cell_size"] = scene.cell_size;
  json walls = json::array();
  for (int y = 0; y < scene.w; ++y)
    for (int x = 0; x < scene.l; ++x)
      if (scene.wall(x, y)) walls.push_back({x, y});
  j["walls"] = std::move(walls);
  json objects = json::array();
  for (const auto& o : scene.objects) {
    json jo;
    jo["id"] = o.id;
    jo["category"] = scene.vocab[o.category];
    json fp = json::array();
    for (const auto& c : o.footprint) fp.push_back({c.x, c.y});
    jo["footprint"] = std::move(fp);
    jo["height_band"] = height_band_name(o.band);
    objects.push_back(std::move(jo));
  }
  j["objects"] = std::move(objects);
  json spawns = json::array();
  for (const auto& c : scene.spawns) spawns.push_back({c.x, c.y});
  j["spawns"] = std::move(spawns);
  json cats = json::array();
  for (int c : scene.categories_present()) cats.push_back(scene.vocab[c]);
  j["categories"] = std::move(cats);
  return j.dump(2) + "\n";
}

namespace {

const json& need(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing-field: ") + key);
  return *it;
}

Cell cell_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer())
    throw ParseError("bad-cell: expected [x, y]");
  return {j[0].get<int>(), j[1].get<int>()};
}

int lookup_category(const std::vector<std::string>& vocab,
                    const std::string& name) {
  for (size_t i = 0; i < vocab.size(); ++i)
    if (vocab[i] == name) return static_cast<int>(i);
  throw ParseError("unknown-category: " + name);
}

}  // namespace

Scene scene_from_json_string(const std::string& text,
                             const std::vector<std::string>& vocab) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad-json: ") + e.what());
  }
  Scene s;
  s.vocab = vocab.empty() ? default_vocabulary() : vocab;
  try {
    s.id = need(j, "id").get<std::string>();
    const json& dims = need(j, "dims");
    if (!dims.is_array() || dims.size() != 2) throw ParseError("bad-dims");
    s.l = dims[0].get<int>();
    s.w = dims[1].get<int>();
    s.cell_size = need(j, "cell_size").get<double>();
    if (s.l < 1 || s.w < 1 || s.l > 4096 || s.w > 4096)
      throw ParseError("bad-dims");
    s.walls.assign(static_cast<size_t>(s.l) * s.w, 0);
    for (const auto& jc : need(j, "walls")) {
      Cell c = cell_from_json(jc);
      if (c.x < 0 || c.x >= s.l || c.y < 0 || c.y >= s.w)
        throw InvariantViolation("wall-out-of-bounds");
      s.walls[cell_index(c.x, c.y, s.l)] = 1;
    }
    for (const auto& jo : need(j, "objects")) {
      ObjectInstance o;
      o.id = need(jo, "id").get<int>();
      o.category = lookup_category(s.vocab, need(jo, "category").get<std::string>());
      for (const auto& jc : need(jo, "footprint"))
        o.footprint.push_back(cell_from_json(jc));
      o.band = height_band_from_name(need(jo, "height_band").get<std::string>());
      s.objects.push_back(std::move(o));
    }
    for (const auto& jc : need(j, "spawns"))
      s.spawns.push_back(cell_from_json(jc));
    // The category table must agree with the instances actually present.
    std::vector<std::string> listed;
    for (const auto& jc : need(j, "categories"))
      listed.push_back(jc.get<std::string>());
    std::vector<std::string> expect;
    s.validate();
    for (int c : s.categories_present()) expect.push_back(s.vocab[c]);
    std::sort(listed.begin(), listed.end());
    std::sort(expect.begin(), expect.end());
    if (listed != expect) throw InvariantViolation("category-table-mismatch");
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad-json: ") + e.what());
  }
  return s;
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot-open: " + path);
  f << scene_to_json_string(scene);
}

Scene load_scene(const std::string& path,
                 const std::vector<std::string>& vocab) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot-open: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return scene_from_json_string(ss.str(), vocab);
}

}  // namespace semnav
