#pragma once
#include <cstdint>
#include <vector>

#include "semnav/grid.hpp"
#include "semnav/rng.hpp"
#include "semnav/scene.hpp"

namespace semnav {

struct Pose {
  Cell cell;        // the agent stands on a free cell
  int heading = 0;  // degrees, multiple of 90
  int pitch = 0;    // degrees: -30, 0, or +30

  double x_m() const { return cell_center_m(cell.x); }
  double y_m() const { return cell_center_m(cell.y); }
  bool operator==(const Pose&) const = default;
};

enum class HitKind : uint8_t { none, wall, object };

struct RayHit {
  double bearing = 0.0;  // degrees relative to heading
  HitKind kind = HitKind::none;
  double depth = 0.0;    // meters, source-center to hit-cell-center
  int category = -1;     // -1 = no label
  int instance = -1;
};

struct Observation {
  Pose pose;
  double max_range = 5.0;  // carried so projection applies the same cutoff
  std::vector<RayHit> rays;
};

struct SensorParams {
  double fov_deg = 90.0;
  int ray_count = 61;
  double max_range = 5.0;
};

struct NoiseParams {
  double p_miss = 0.0;     // object label dropped
  double p_confuse = 0.0;  // object label swapped for another category
  double depth_sigma = 0.0;
};

// One cell crossed by a ray. dist2_cells is the squared center-to-center
// distance in cell units; meters = sqrt(dist2_cells) * cell size.
struct TraceCell {
  Cell cell;
  int dist2_cells;
};

// Grid traversal from the center of `start` along `angle_deg` (absolute,
// degrees). Emits crossed cells in order, starting with `start` itself,
// stopping at the map edge or once centers pass max_range. Pure geometry:
// observe() and map projection share it so hit cells match bit-exactly.
void trace_ray(int l, int w, Cell start, double angle_deg, double max_range,
               std::vector<TraceCell>& out);

inline double trace_dist_m(const TraceCell& tc) {
  return std::sqrt(static_cast<double>(tc.dist2_cells)) * kCellSize;
}

// Casts ray_count rays evenly spaced across the FOV. Walls block at any
// pitch; an object is hit only when its height band matches the pitch
// (-30 sees low, 0 sees eye, +30 sees high). Throws std::invalid_argument
// ("invalid-pose") for off-grid/blocked cells or bad heading/pitch.
Observation observe(const Scene& scene, const Pose& pose,
                    const SensorParams& sensor);

// Per-object-ray label/depth noise standing in for an imperfect segmenter.
// Wall rays are never touched; ray count, bearings and hit kinds are
// preserved. Depth is clamped to (0, max_range].
Observation corrupt_segmentation(const Observation& obs,
                                 const NoiseParams& noise, int k_total,
                                 Rng& rng);

}  // namespace semnav
