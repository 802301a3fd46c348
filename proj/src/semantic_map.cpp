#include "semnav/semantic_map.hpp"

#include <cstring>
#include <queue>
#include <stdexcept>

#include "semnav/error.hpp"

namespace semnav {

SemanticMap::SemanticMap(int l, int w, int k_total) : l_(l), w_(w), k_(k_total) {
  if (l < 1 || w < 1 || k_total < 1 || k_total > 254)
    throw std::invalid_argument("bad-map-dims");
  data_.assign(static_cast<size_t>(l) * w * (k_total + 2), 0);
  bits_.assign(static_cast<size_t>(l) * w, 0);
}

void SemanticMap::add(int x, int y, int ch, uint16_t amount) {
  size_t idx = static_cast<size_t>(cell_index(x, y, l_)) * channels() + ch;
  uint32_t v = data_[idx] + static_cast<uint32_t>(amount);
  data_[idx] = v > 0xffff ? 0xffff : static_cast<uint16_t>(v);
  if (amount > 0) {
    uint8_t& b = bits_[cell_index(x, y, l_)];
    b |= 4;
    if (ch == explored_channel()) b |= 1;
    else if (ch == occupied_channel()) b |= 2;
  }
}

void SemanticMap::project_observation(const Observation& obs) {
  const Cell c = obs.pose.cell;
  if (c.x < 0 || c.x >= l_ || c.y < 0 || c.y >= w_)
    throw std::invalid_argument("pose-out-of-bounds");
  std::vector<TraceCell> trace;
  trace.reserve(256);
  for (const RayHit& ray : obs.rays) {
    trace_ray(l_, w_, c, obs.pose.heading + ray.bearing, obs.max_range, trace);
    if (ray.kind == HitKind::none) {
      for (const TraceCell& tc : trace)
        add(tc.cell.x, tc.cell.y, explored_channel());
      continue;
    }
    for (const TraceCell& tc : trace) {
      double d = trace_dist_m(tc);
      if (d < ray.depth) {
        add(tc.cell.x, tc.cell.y, explored_channel());
        continue;
      }
      // First cell at or past the reported depth is the hit cell.
      add(tc.cell.x, tc.cell.y, explored_channel());
      add(tc.cell.x, tc.cell.y, occupied_channel());
      if (ray.kind == HitKind::object && ray.category >= 0) {
        if (ray.category >= k_) throw std::invalid_argument("category-out-of-range");
        add(tc.cell.x, tc.cell.y, ray.category);
      }
      break;
    }
  }
}

void SemanticMap::merge_from(const SemanticMap& other) {
  if (l_ != other.l_ || w_ != other.w_ || k_ != other.k_)
    throw std::invalid_argument("dims-mismatch");
  const int ch = channels();
  for (size_t cell = 0; cell < bits_.size(); ++cell) {
    if ((other.bits_[cell] & 4) == 0) continue;  // all counters zero there
    size_t base = cell * ch;
    for (int k = 0; k < ch; ++k) {
      uint32_t v = data_[base + k] + static_cast<uint32_t>(other.data_[base + k]);
      data_[base + k] = v > 0xffff ? 0xffff : static_cast<uint16_t>(v);
    }
    bits_[cell] |= other.bits_[cell];
  }
}

void SemanticMap::rebuild_bits() {
  const int ch = channels();
  for (size_t cell = 0; cell < bits_.size(); ++cell) {
    uint8_t b = 0;
    size_t base = cell * ch;
    if (data_[base + explored_channel()] > 0) b |= 1;
    if (data_[base + occupied_channel()] > 0) b |= 2;
    for (int k = 0; k < ch && (b & 4) == 0; ++k)
      if (data_[base + k] > 0) b |= 4;
    bits_[cell] = b;
  }
}

// Layout: 'S' 'N' 'M' '1', u32 l, u32 w, u32 k_total, then
// l*w*(k_total+2) u16 counts, all little-endian, cells row-major with
// channels fastest.
std::vector<uint8_t> SemanticMap::serialize() const {
  std::vector<uint8_t> out;
  out.reserve(16 + data_.size() * 2);
  const char magic[4] = {'S', 'N', 'M', '1'};
  out.insert(out.end(), magic, magic + 4);
  auto put_u32 = [&](uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
  };
  put_u32(static_cast<uint32_t>(l_));
  put_u32(static_cast<uint32_t>(w_));
  put_u32(static_cast<uint32_t>(k_));
  for (uint16_t v : data_) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
  }
  return out;
}

SemanticMap SemanticMap::deserialize(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 16 || bytes[0] != 'S' || bytes[1] != 'N' ||
      bytes[2] != 'M' || bytes[3] != '1')
    throw ParseError("bad-map-blob: magic");
  auto get_u32 = [&](size_t at) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  uint32_t l = get_u32(4), w = get_u32(8), k = get_u32(12);
  if (l < 1 || w < 1 || k < 1 || k > 254 || l > 4096 || w > 4096)
    throw ParseError("bad-map-blob: dims");
  SemanticMap m(static_cast<int>(l), static_cast<int>(w), static_cast<int>(k));
  size_t expect = 16 + m.data_.size() * 2;
  if (bytes.size() != expect) throw ParseError("bad-map-blob: size");
  for (size_t i = 0; i < m.data_.size(); ++i)
    m.data_[i] = static_cast<uint16_t>(bytes[16 + 2 * i] |
                                       (bytes[16 + 2 * i + 1] << 8));
  m.rebuild_bits();
  return m;
}

std::vector<int32_t> distance_field(const SemanticMap& map,
                                    const std::vector<Cell>& goals) {
  if (goals.empty()) throw std::invalid_argument("empty-goal-set");
  const int l = map.l(), w = map.w();
  std::vector<int32_t> dist(static_cast<size_t>(l) * w, kUnreachable);
  std::queue<Cell> q;
  for (const Cell& g : goals) {
    if (g.x < 0 || g.x >= l || g.y < 0 || g.y >= w)
      throw std::invalid_argument("goal-out-of-bounds");
    int32_t& d = dist[cell_index(g.x, g.y, l)];
    if (d != 0) {
      d = 0;
      q.push(g);
    }
  }
  while (!q.empty()) {
    Cell c = q.front();
    q.pop();
    int32_t nd = dist[cell_index(c.x, c.y, l)] + 1;
    const Cell nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
    for (const Cell& n : nb) {
      if (n.x < 0 || n.x >= l || n.y < 0 || n.y >= w) continue;
      if (map.occupied(n.x, n.y)) continue;
      int32_t& d = dist[cell_index(n.x, n.y, l)];
      if (nd < d) {
        d = nd;
        q.push(n);
      }
    }
  }
  return dist;
}

}  // namespace semnav
