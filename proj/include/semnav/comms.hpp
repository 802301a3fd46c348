#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "semnav/perception.hpp"
#include "semnav/rng.hpp"
#include "semnav/semantic_map.hpp"

namespace semnav {

enum class MsgKind : uint8_t {
  map_vector = 0,   // fixed-length map summary, codec-encoded
  found_notice = 1, // payload = {category, round}; tiny, never dropped
};

struct Message {
  int sender = 0;
  MsgKind kind = MsgKind::map_vector;
  std::vector<float> payload;
};

struct BandwidthLedger {
  uint64_t total_values_sent = 0;  // floats delivered, all kinds
  uint64_t map_msgs = 0;           // per-recipient map deliveries
  uint64_t found_msgs = 0;         // per-recipient notice deliveries
  uint64_t dropped_msgs = 0;       // map sends rejected by the round cap
  std::map<std::pair<int, int>, uint64_t> per_pair;  // (sender, recipient) -> values
};

enum class CodecVariant : uint8_t { quantized = 0, learned = 1 };

const char* codec_variant_name(CodecVariant v);

// Turns a semantic map into exactly v floats and back.
//
// quantized: the map is tiled by a coarse grid of at most v blocks
//   (side floor(sqrt(v)), capped by the map dims). Each block packs into
//   one float: (majority category + 1) * 4 + occupied * 2 + explored.
//   Unused payload slots stay 0. Decoding paints whole blocks, so the
//   result is a lossy, block-resolution map with counts in {0, 1}.
//
// learned: affine encoder/decoder pair over the flattened boolean
//   presence tensor, trained by gradient descent (see train_learned_codec).
//   Decoding thresholds reconstructions at 0.5.
class Codec {
 public:
  Codec() = default;
  static Codec quantized(int l, int w, int k_total, int v);
  static Codec learned_init(int l, int w, int k_total, int v, uint64_t seed);

  CodecVariant variant() const { return variant_; }
  int v() const { return v_; }
  int l() const { return l_; }
  int w() const { return w_; }
  int k_total() const { return k_total_; }

  // Always returns exactly v() floats.
  std::vector<float> encode(const SemanticMap& map) const;
  // Inverse direction; every channel count of the result is 0 or 1 and
  // any cell with an occupied or category mark is also explored.
  SemanticMap decode(const std::vector<float>& payload) const;

  // Mean squared reconstruction error over the given maps (learned only).
  double reconstruction_loss(const std::vector<SemanticMap>& maps) const;

  std::string to_blob() const;
  static Codec from_blob(const std::string& blob);

  Eigen::MatrixXf& enc_w() { return enc_w_; }
  Eigen::VectorXf& enc_b() { return enc_b_; }
  Eigen::MatrixXf& dec_w() { return dec_w_; }
  Eigen::VectorXf& dec_b() { return dec_b_; }

 private:
  CodecVariant variant_ = CodecVariant::quantized;
  int l_ = 0, w_ = 0, k_total_ = 0, v_ = 0;
  int cx_ = 0, cy_ = 0;  // coarse grid dims (quantized)
  Eigen::MatrixXf enc_w_;  // v x f
  Eigen::VectorXf enc_b_;  // v
  Eigen::MatrixXf dec_w_;  // f x v
  Eigen::VectorXf dec_b_;  // f

  Eigen::VectorXf flatten(const SemanticMap& map) const;
};

struct CodecTrainResult {
  Codec codec;
  // loss before training, then after each epoch (length epochs + 1).
  std::vector<double> loss_trace;
};

// Full-batch gradient descent on mean squared reconstruction error.
// Needs at least 32 sample maps, all with identical dims.
CodecTrainResult train_learned_codec(const std::vector<SemanticMap>& maps, int v,
                                     int epochs, double lr, uint64_t seed);

// Distance from a point to the closed sector (apex, heading, fov, radius).
// Zero inside. Used for the who-hears-a-broadcast rule.
double point_sector_distance(double px, double py, double ax, double ay,
                             double heading_deg, double fov_deg, double radius);

// Agents whose cell centers lie within reach_m of sender's view sector.
std::vector<int> select_recipients(int sender, const std::vector<Pose>& poses,
                                   const SensorParams& sensor, double reach_m);

struct Outbox {
  bool has_map = false;
  std::vector<float> map_payload;
  std::vector<std::pair<int, int>> notices;  // (category, round)
};

// One synchronous exchange round. Senders go in ascending id order; a map
// send costs payload-size floats per recipient and is dropped whole if it
// would push the round total over value_cap. Found notices broadcast to
// every other agent, never dropped, and still count toward the ledger.
std::vector<std::vector<Message>> exchange(const std::vector<Outbox>& outboxes,
                                           const std::vector<Pose>& poses,
                                           const SensorParams& sensor,
                                           double reach_m, uint64_t value_cap,
                                           BandwidthLedger& ledger);

}  // namespace semnav
