#include "semnav/perception.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace semnav {

void trace_ray(int l, int w, Cell start, double angle_deg, double max_range,
               std::vector<TraceCell>& out) {
  out.clear();
  const double rad = deg2rad(angle_deg);
  double dx = std::cos(rad), dy = std::sin(rad);
  if (std::abs(dx) < 1e-12) dx = 0.0;
  if (std::abs(dy) < 1e-12) dy = 0.0;

  // Work in cell units; the source sits at (+0.5, +0.5) inside its cell.
  const double r2_max = (max_range / kCellSize) * (max_range / kCellSize);
  int cx = start.x, cy = start.y;
  int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  const double inf = std::numeric_limits<double>::infinity();
  double t_max_x = step_x != 0 ? 0.5 / std::abs(dx) : inf;
  double t_max_y = step_y != 0 ? 0.5 / std::abs(dy) : inf;
  double t_delta_x = step_x != 0 ? 1.0 / std::abs(dx) : inf;
  double t_delta_y = step_y != 0 ? 1.0 / std::abs(dy) : inf;

  out.push_back({{cx, cy}, 0});
  for (;;) {
    if (t_max_x <= t_max_y) {
      cx += step_x;
      t_max_x += t_delta_x;
    } else {
      cy += step_y;
      t_max_y += t_delta_y;
    }
    if (cx < 0 || cx >= l || cy < 0 || cy >= w) return;
    int ddx = cx - start.x, ddy = cy - start.y;
    int d2 = ddx * ddx + ddy * ddy;
    if (static_cast<double>(d2) > r2_max) return;
    out.push_back({{cx, cy}, d2});
  }
}

Observation observe(const Scene& scene, const Pose& pose,
                    const SensorParams& sensor) {
  if (!scene.in_bounds(pose.cell.x, pose.cell.y) ||
      !scene.free(pose.cell.x, pose.cell.y))
    throw std::invalid_argument("invalid-pose: off-grid or inside an obstacle");
  if (normalize_heading(pose.heading) % 90 != 0)
    throw std::invalid_argument("invalid-pose: heading must be a multiple of 90");
  if (pose.pitch != -30 && pose.pitch != 0 && pose.pitch != 30)
    throw std::invalid_argument("invalid-pose: pitch must be -30, 0 or +30");
  if (sensor.ray_count < 1 || sensor.fov_deg <= 0 || sensor.max_range <= 0)
    throw std::invalid_argument("invalid-sensor");

  Observation obs;
  obs.pose = pose;
  obs.max_range = sensor.max_range;
  obs.rays.resize(sensor.ray_count);

  std::vector<TraceCell> trace;
  trace.reserve(256);
  for (int i = 0; i < sensor.ray_count; ++i) {
    double bearing =
        sensor.ray_count == 1
            ? 0.0
            : -sensor.fov_deg / 2.0 +
                  sensor.fov_deg * i / (sensor.ray_count - 1);
    RayHit& ray = obs.rays[i];
    ray.bearing = bearing;
    trace_ray(scene.l, scene.w, pose.cell, pose.heading + bearing,
              sensor.max_range, trace);
    for (size_t k = 1; k < trace.size(); ++k) {
      const TraceCell& tc = trace[k];
      if (scene.wall(tc.cell.x, tc.cell.y)) {
        ray.kind = HitKind::wall;
        ray.depth = trace_dist_m(tc);
        break;
      }
      int oi = scene.object_at(tc.cell.x, tc.cell.y);
      if (oi >= 0) {
        const ObjectInstance& o = scene.objects[oi];
        // Non-matching bands neither block nor report.
        if (band_pitch(o.band) != pose.pitch) continue;
        ray.kind = HitKind::object;
        ray.depth = trace_dist_m(tc);
        ray.category = o.category;
        ray.instance = o.id;
        break;
      }
    }
  }
  return obs;
}

Observation corrupt_segmentation(const Observation& obs,
                                 const NoiseParams& noise, int k_total,
                                 Rng& rng) {
  if (noise.p_miss < 0 || noise.p_miss > 1 || noise.p_confuse < 0 ||
      noise.p_confuse > 1 || noise.depth_sigma < 0)
    throw std::invalid_argument("invalid-noise-params");
  Observation out = obs;
  for (auto& ray : out.rays) {
    if (ray.kind != HitKind::object) continue;
    if (rng.bernoulli(noise.p_miss)) {
      ray.category = -1;
      ray.instance = -1;
    } else if (ray.category >= 0 && k_total > 1 &&
               rng.bernoulli(noise.p_confuse)) {
      int other = rng.below(k_total - 1);
      if (other >= ray.category) ++other;
      ray.category = other;
      ray.instance = -1;
    }
    if (noise.depth_sigma > 0) {
      ray.depth += noise.depth_sigma * rng.gaussian();
      if (ray.depth > out.max_range) ray.depth = out.max_range;
      if (ray.depth <= 0) ray.depth = 1e-6;
    }
  }
  return out;
}

}  // namespace semnav
