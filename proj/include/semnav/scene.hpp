#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "semnav/grid.hpp"

namespace semnav {

// Vertical band an object occupies. Sensing at pitch -30 sees `low`
// objects, pitch 0 sees `eye`, pitch +30 sees `high`. Walls span all bands.
enum class HeightBand : uint8_t { low, eye, high };

const char* height_band_name(HeightBand b);
HeightBand height_band_from_name(const std::string& name);

// Pitch in degrees (-30, 0, +30) that sees a given band.
inline int band_pitch(HeightBand b) {
  switch (b) {
    case HeightBand::low: return -30;
    case HeightBand::eye: return 0;
    default: return 30;
  }
}

struct ObjectInstance {
  int id = 0;
  int category = 0;  // index into the global vocabulary
  std::vector<Cell> footprint;
  HeightBand band = HeightBand::eye;
};

struct Scene {
  std::string id;
  int l = 0, w = 0;  // x extent, y extent, in cells
  double cell_size = kCellSize;
  std::vector<uint8_t> walls;  // l*w, row-major y*l+x, 1 = wall
  std::vector<ObjectInstance> objects;
  std::vector<Cell> spawns;
  std::vector<std::string> vocab;  // global category vocabulary

  // Derived cell -> object index (-1 when empty); rebuilt by validate().
  std::vector<int32_t> cell_object;

  bool in_bounds(int x, int y) const { return x >= 0 && x < l && y >= 0 && y < w; }
  bool wall(int x, int y) const { return walls[cell_index(x, y, l)] != 0; }
  int object_at(int x, int y) const { return cell_object[cell_index(x, y, l)]; }
  // Free = walkable: neither wall nor object footprint.
  bool free(int x, int y) const { return !wall(x, y) && object_at(x, y) < 0; }

  // Distinct category ids with at least one instance, ascending.
  std::vector<int> categories_present() const;

  // Rebuilds cell_object and checks structural invariants; throws
  // InvariantViolation naming the failed one.
  void validate();
};

struct TaskSpec {
  std::string scene_id;
  std::vector<int> targets;  // distinct category ids, size M
  std::vector<Cell> spawn_cells;
  std::vector<int> spawn_headings;  // degrees, multiples of 90
  uint64_t seed = 0;
};

struct GenParams {
  int l = 80, w = 80;
  int rooms = 3;               // target room count, best effort
  double object_density = 1.1; // objects per 100 free cells
  int category_count = 10;     // size of the category subset drawn
  int spawn_count = 8;
  std::vector<std::string> vocab;  // empty = default vocabulary
};

// 24 built-in category names. Anchor categories are large furniture;
// the generator clusters small-object categories near anchors, which is
// what makes co-occurrence priors informative.
const std::vector<std::string>& default_vocabulary();
bool is_anchor_category(const std::string& name);

Scene generate_scene(uint64_t seed, const GenParams& params);

// Draws M distinct target categories and N spawn poses. Throws
// std::invalid_argument with "insufficient-categories" /
// "insufficient-spawns" when the scene cannot support the request.
// Draws m distinct target categories and n spawn poses. When allowed is
// given, targets come only from categories in that list.
TaskSpec sample_task(const Scene& scene, int m, int n, uint64_t seed,
                     const std::vector<int>* allowed = nullptr);

std::string scene_to_json_string(const Scene& scene);
Scene scene_from_json_string(const std::string& text,
                             const std::vector<std::string>& vocab);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path,
                 const std::vector<std::string>& vocab);

}  // namespace semnav
