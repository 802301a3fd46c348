#pragma once
#include <cstdint>
#include <limits>
#include <vector>

#include "semnav/grid.hpp"
#include "semnav/perception.hpp"

namespace semnav {

// Grid of per-cell counters: one channel per category in the global
// vocabulary, plus `occupied` and `explored`. Counts only ever grow
// (saturating at 16 bits), so merging maps from different agents is a
// plain cellwise sum and never erases evidence.
class SemanticMap {
 public:
  SemanticMap() = default;
  SemanticMap(int l, int w, int k_total);

  int l() const { return l_; }
  int w() const { return w_; }
  int k_total() const { return k_; }
  int channels() const { return k_ + 2; }
  int occupied_channel() const { return k_; }
  int explored_channel() const { return k_ + 1; }

  uint16_t count(int x, int y, int ch) const {
    return data_[static_cast<size_t>(cell_index(x, y, l_)) * channels() + ch];
  }
  bool occupied(int x, int y) const { return (bits_[cell_index(x, y, l_)] & 2) != 0; }
  bool explored(int x, int y) const { return (bits_[cell_index(x, y, l_)] & 1) != 0; }
  // True when any channel of the cell holds a positive count.
  bool any_counts(int x, int y) const { return (bits_[cell_index(x, y, l_)] & 4) != 0; }

  void add(int x, int y, int ch, uint16_t amount = 1);

  // Replays one observation into the counters: traversed cells gain
  // `explored`, the hit cell gains `occupied` (and its category channel
  // when labeled). Uses the same ray traversal as observe(), so a hit at
  // depth d lands exactly round(d / 0.05) cells out along a straight ray.
  void project_observation(const Observation& obs);

  // Cellwise, channelwise saturating sum. Commutative and associative up
  // to saturation. Throws std::invalid_argument("dims-mismatch").
  void merge_from(const SemanticMap& other);

  std::vector<uint8_t> serialize() const;
  static SemanticMap deserialize(const std::vector<uint8_t>& bytes);

  bool operator==(const SemanticMap& o) const {
    return l_ == o.l_ && w_ == o.w_ && k_ == o.k_ && data_ == o.data_;
  }

  const std::vector<uint16_t>& raw() const { return data_; }
  std::vector<uint16_t>& raw() { return data_; }
  // Recomputes the per-cell occupied/explored bits after raw edits.
  void rebuild_bits();

 private:
  int l_ = 0, w_ = 0, k_ = 0;
  std::vector<uint16_t> data_;  // cell-major (row-major), channel-minor
  std::vector<uint8_t> bits_;   // bit0 explored>0, bit1 occupied>0, bit2 any>0
};

inline constexpr int32_t kUnreachable = std::numeric_limits<int32_t>::max();

// Multi-source BFS hop counts over cells not marked occupied
// (4-connectivity). Goal cells are seeded at 0 even when occupied, so
// object footprints can act as goals; expansion never passes through an
// occupied cell. Unreached cells hold kUnreachable.
std::vector<int32_t> distance_field(const SemanticMap& map,
                                    const std::vector<Cell>& goals);

}  // namespace semnav
