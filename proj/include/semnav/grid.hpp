#pragma once
#include <cstdint>
#include <cstdlib>
#include <functional>

namespace semnav {

// One map cell is 5 cm x 5 cm.
inline constexpr double kCellSize = 0.05;

// A forward move covers 0.25 m, i.e. 5 cells.
inline constexpr int kMoveCells = 5;

// Cell coordinates: x is the column, y is the row, origin at the top-left.
struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

struct CellHash {
  size_t operator()(const Cell& c) const {
    return std::hash<int64_t>()((static_cast<int64_t>(c.y) << 32) ^
                                static_cast<uint32_t>(c.x));
  }
};

// (x, y) -> flat index for an L-wide row-major grid.
inline int cell_index(int x, int y, int l) { return y * l + x; }

// Headings are multiples of 90 degrees; 0 points along +x, 90 along +y.
inline Cell heading_dir(int heading_deg) {
  switch (((heading_deg % 360) + 360) % 360) {
    case 0: return {1, 0};
    case 90: return {0, 1};
    case 180: return {-1, 0};
    default: return {0, -1};
  }
}

inline int normalize_heading(int heading_deg) {
  return ((heading_deg % 360) + 360) % 360;
}

// Center of a cell in meters.
inline double cell_center_m(int c) { return (c + 0.5) * kCellSize; }

inline constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * (kPi / 180.0); }

// Smallest signed angular difference a-b in degrees, in (-180, 180].
inline double angle_diff_deg(double a, double b) {
  double d = a - b;
  while (d > 180.0) d -= 360.0;
  while (d <= -180.0) d += 360.0;
  return d;
}

}  // namespace semnav
