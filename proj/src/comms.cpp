#include "semnav/comms.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "semnav/error.hpp"

namespace semnav {

const char* codec_variant_name(CodecVariant v) {
  return v == CodecVariant::quantized ? "quantized" : "learned";
}

namespace {

void check_codec_dims(int l, int w, int k_total, int v) {
  if (l < 1 || w < 1) throw std::invalid_argument("bad-codec-dims");
  if (k_total < 1 || k_total > 254) throw std::invalid_argument("bad-codec-dims");
  if (v < 1) throw std::invalid_argument("bad-codec-capacity");
}

}  // namespace

Codec Codec::quantized(int l, int w, int k_total, int v) {
  check_codec_dims(l, w, k_total, v);
  Codec c;
  c.variant_ = CodecVariant::quantized;
  c.l_ = l;
  c.w_ = w;
  c.k_total_ = k_total;
  c.v_ = v;
  int side = static_cast<int>(std::sqrt(static_cast<double>(v)));
  while (side * side > v) --side;  // guard against fp rounding
  c.cx_ = std::min(l, std::max(1, side));
  c.cy_ = std::min(w, std::max(1, side));
  return c;
}

Codec Codec::learned_init(int l, int w, int k_total, int v, uint64_t seed) {
  check_codec_dims(l, w, k_total, v);
  Codec c;
  c.variant_ = CodecVariant::learned;
  c.l_ = l;
  c.w_ = w;
  c.k_total_ = k_total;
  c.v_ = v;
  const int f = l * w * (k_total + 2);
  Rng rng(mix_seed(seed, hash_str("codec-init")));
  c.enc_w_.resize(v, f);
  c.dec_w_.resize(f, v);
  c.enc_b_ = Eigen::VectorXf::Zero(v);
  c.dec_b_ = Eigen::VectorXf::Zero(f);
  const float es = 1.0f / std::sqrt(static_cast<float>(f));
  const float ds = 1.0f / std::sqrt(static_cast<float>(v));
  for (int i = 0; i < v; ++i)
    for (int j = 0; j < f; ++j) c.enc_w_(i, j) = es * static_cast<float>(rng.gaussian());
  for (int i = 0; i < f; ++i)
    for (int j = 0; j < v; ++j) c.dec_w_(i, j) = ds * static_cast<float>(rng.gaussian());
  return c;
}

Eigen::VectorXf Codec::flatten(const SemanticMap& map) const {
  const int ch = map.channels();
  const int f = l_ * w_ * ch;
  Eigen::VectorXf x = Eigen::VectorXf::Zero(f);
  const uint16_t* data = map.raw().data();
  for (int i = 0; i < f; ++i) x[i] = data[i] > 0 ? 1.0f : 0.0f;
  return x;
}

std::vector<float> Codec::encode(const SemanticMap& map) const {
  if (map.l() != l_ || map.w() != w_ || map.k_total() != k_total_)
    throw std::invalid_argument("dims-mismatch");
  std::vector<float> out(static_cast<size_t>(v_), 0.0f);
  if (variant_ == CodecVariant::learned) {
    Eigen::VectorXf z = enc_w_ * flatten(map) + enc_b_;
    for (int i = 0; i < v_; ++i) out[static_cast<size_t>(i)] = z[i];
    return out;
  }
  const int sx = (l_ + cx_ - 1) / cx_;
  const int sy = (w_ + cy_ - 1) / cy_;
  std::vector<uint32_t> cat_sum(static_cast<size_t>(k_total_));
  for (int by = 0; by < cy_; ++by) {
    for (int bx = 0; bx < cx_; ++bx) {
      std::fill(cat_sum.begin(), cat_sum.end(), 0u);
      bool exp = false, occ = false;
      const int x0 = bx * sx, y0 = by * sy;
      const int x1 = std::min(l_, x0 + sx), y1 = std::min(w_, y0 + sy);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          exp = exp || map.explored(x, y);
          occ = occ || map.occupied(x, y);
          for (int k = 0; k < k_total_; ++k)
            cat_sum[static_cast<size_t>(k)] += map.count(x, y, k);
        }
      }
      int best = -1;
      uint32_t best_sum = 0;
      for (int k = 0; k < k_total_; ++k) {
        if (cat_sum[static_cast<size_t>(k)] > best_sum) {
          best_sum = cat_sum[static_cast<size_t>(k)];
          best = k;
        }
      }
      const int packed = (best + 1) * 4 + (occ ? 2 : 0) + (exp ? 1 : 0);
      out[static_cast<size_t>(by * cx_ + bx)] = static_cast<float>(packed);
    }
  }
  return out;
}

SemanticMap Codec::decode(const std::vector<float>& payload) const {
  if (static_cast<int>(payload.size()) != v_)
    throw std::invalid_argument("bad-length");
  SemanticMap out(l_, w_, k_total_);
  if (variant_ == CodecVariant::learned) {
    Eigen::VectorXf z(v_);
    for (int i = 0; i < v_; ++i) z[i] = payload[static_cast<size_t>(i)];
    Eigen::VectorXf xh = dec_w_ * z + dec_b_;
    const int ch = out.channels();
    uint16_t* data = out.raw().data();
    for (int cell = 0; cell < l_ * w_; ++cell) {
      bool any = false;
      for (int k = 0; k < ch; ++k) {
        if (xh[cell * ch + k] > 0.5f) {
          data[cell * ch + k] = 1;
          any = true;
        }
      }
      if (any) data[cell * ch + out.explored_channel()] = 1;
    }
    out.rebuild_bits();
    return out;
  }
  const int sx = (l_ + cx_ - 1) / cx_;
  const int sy = (w_ + cy_ - 1) / cy_;
  for (int i = 0; i < v_; ++i) {
    const float fv = payload[static_cast<size_t>(i)];
    const long pv = std::lround(fv);
    if (pv < 0 || std::abs(fv - static_cast<float>(pv)) > 1e-3f ||
        pv > (static_cast<long>(k_total_)) * 4 + 3)
      throw std::invalid_argument("bad-payload");
    if (i >= cx_ * cy_) {
      if (pv != 0) throw std::invalid_argument("bad-payload");
      continue;
    }
    if (pv == 0) continue;
    const bool exp = (pv & 1) != 0;
    const bool occ = (pv & 2) != 0;
    const int cat = static_cast<int>(pv / 4) - 1;
    const int bx = i % cx_, by = i / cx_;
    const int x0 = bx * sx, y0 = by * sy;
    const int x1 = std::min(l_, x0 + sx), y1 = std::min(w_, y0 + sy);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        if (exp || occ || cat >= 0) out.add(x, y, out.explored_channel(), 1);
        if (occ) out.add(x, y, out.occupied_channel(), 1);
        if (cat >= 0) out.add(x, y, cat, 1);
      }
    }
  }
  return out;
}

double Codec::reconstruction_loss(const std::vector<SemanticMap>& maps) const {
  if (variant_ != CodecVariant::learned)
    throw std::invalid_argument("wrong-variant");
  if (maps.empty()) throw std::invalid_argument("empty-input");
  const int f = l_ * w_ * (k_total_ + 2);
  double total = 0.0;
  for (const auto& m : maps) {
    Eigen::VectorXf x = flatten(m);
    Eigen::VectorXf xh = dec_w_ * (enc_w_ * x + enc_b_) + dec_b_;
    total += static_cast<double>((xh - x).squaredNorm()) / f;
  }
  return total / static_cast<double>(maps.size());
}

namespace {

template <typename T>
void put_raw(std::string& s, const T& v) {
  s.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_raw(const std::string& s, size_t& off) {
  if (off + sizeof(T) > s.size()) throw ParseError("bad-codec-blob: truncated");
  T v;
  std::memcpy(&v, s.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

void put_matrix(std::string& s, const Eigen::MatrixXf& m) {
  put_raw<uint32_t>(s, static_cast<uint32_t>(m.rows()));
  put_raw<uint32_t>(s, static_cast<uint32_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) put_raw<float>(s, m(r, c));
}

Eigen::MatrixXf get_matrix(const std::string& s, size_t& off) {
  const auto rows = get_raw<uint32_t>(s, off);
  const auto cols = get_raw<uint32_t>(s, off);
  if (static_cast<uint64_t>(rows) * cols > (1u << 28))
    throw ParseError("bad-codec-blob: oversized matrix");
  Eigen::MatrixXf m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = get_raw<float>(s, off);
  return m;
}

}  // namespace

std::string Codec::to_blob() const {
  std::string s;
  s.append("SNC1", 4);
  put_raw<uint8_t>(s, static_cast<uint8_t>(variant_));
  put_raw<uint32_t>(s, static_cast<uint32_t>(l_));
  put_raw<uint32_t>(s, static_cast<uint32_t>(w_));
  put_raw<uint32_t>(s, static_cast<uint32_t>(k_total_));
  put_raw<uint32_t>(s, static_cast<uint32_t>(v_));
  put_raw<uint32_t>(s, static_cast<uint32_t>(cx_));
  put_raw<uint32_t>(s, static_cast<uint32_t>(cy_));
  if (variant_ == CodecVariant::learned) {
    put_matrix(s, enc_w_);
    put_matrix(s, dec_w_);
    put_matrix(s, enc_b_);
    put_matrix(s, dec_b_);
  }
  return s;
}

Codec Codec::from_blob(const std::string& blob) {
  if (blob.size() < 4 || blob.compare(0, 4, "SNC1") != 0)
    throw ParseError("bad-codec-blob: magic");
  size_t off = 4;
  Codec c;
  const auto variant = get_raw<uint8_t>(blob, off);
  if (variant > 1) throw ParseError("bad-codec-blob: variant");
  c.variant_ = static_cast<CodecVariant>(variant);
  c.l_ = static_cast<int>(get_raw<uint32_t>(blob, off));
  c.w_ = static_cast<int>(get_raw<uint32_t>(blob, off));
  c.k_total_ = static_cast<int>(get_raw<uint32_t>(blob, off));
  c.v_ = static_cast<int>(get_raw<uint32_t>(blob, off));
  c.cx_ = static_cast<int>(get_raw<uint32_t>(blob, off));
  c.cy_ = static_cast<int>(get_raw<uint32_t>(blob, off));
  if (c.l_ < 1 || c.w_ < 1 || c.k_total_ < 1 || c.v_ < 1)
    throw ParseError("bad-codec-blob: dims");
  if (c.variant_ == CodecVariant::learned) {
    c.enc_w_ = get_matrix(blob, off);
    c.dec_w_ = get_matrix(blob, off);
    c.enc_b_ = get_matrix(blob, off).col(0);
    c.dec_b_ = get_matrix(blob, off).col(0);
    const int f = c.l_ * c.w_ * (c.k_total_ + 2);
    if (c.enc_w_.rows() != c.v_ || c.enc_w_.cols() != f || c.dec_w_.rows() != f ||
        c.dec_w_.cols() != c.v_ || c.enc_b_.size() != c.v_ || c.dec_b_.size() != f)
      throw ParseError("bad-codec-blob: matrix dims");
  }
  if (off != blob.size()) throw ParseError("bad-codec-blob: trailing bytes");
  return c;
}

CodecTrainResult train_learned_codec(const std::vector<SemanticMap>& maps, int v,
                                     int epochs, double lr, uint64_t seed) {
  if (maps.size() < 32) throw std::invalid_argument("too-few-samples");
  if (epochs < 0 || lr <= 0.0) throw std::invalid_argument("bad-train-params");
  const int l = maps[0].l(), w = maps[0].w(), k = maps[0].k_total();
  for (const auto& m : maps)
    if (m.l() != l || m.w() != w || m.k_total() != k)
      throw std::invalid_argument("dims-mismatch");

  CodecTrainResult res;
  res.codec = Codec::learned_init(l, w, k, v, seed);
  const int f = l * w * (k + 2);
  const int n = static_cast<int>(maps.size());

  Eigen::MatrixXf x(f, n);
  for (int j = 0; j < n; ++j) {
    const uint16_t* data = maps[static_cast<size_t>(j)].raw().data();
    for (int i = 0; i < f; ++i) x(i, j) = data[i] > 0 ? 1.0f : 0.0f;
  }

  Eigen::MatrixXf& a = res.codec.enc_w();
  Eigen::MatrixXf& d = res.codec.dec_w();
  Eigen::VectorXf& be = res.codec.enc_b();
  Eigen::VectorXf& bd = res.codec.dec_b();

  Eigen::MatrixXf z, xh, r;
  auto forward = [&]() {
    z = (a * x).colwise() + be;
    xh = (d * z).colwise() + bd;
    r = xh - x;
    return static_cast<double>(r.squaredNorm()) / (static_cast<double>(f) * n);
  };

  res.loss_trace.push_back(forward());
  const float scale = 2.0f / (static_cast<float>(f) * static_cast<float>(n));
  const float flr = static_cast<float>(lr);
  for (int e = 0; e < epochs; ++e) {
    Eigen::MatrixXf gd = scale * (r * z.transpose());
    Eigen::VectorXf gbd = scale * r.rowwise().sum();
    Eigen::MatrixXf gz = scale * (d.transpose() * r);
    Eigen::MatrixXf ga = gz * x.transpose();
    Eigen::VectorXf gbe = gz.rowwise().sum();
    a -= flr * ga;
    be -= flr * gbe;
    d -= flr * gd;
    bd -= flr * gbd;
    res.loss_trace.push_back(forward());
  }
  return res;
}

double point_sector_distance(double px, double py, double ax, double ay,
                             double heading_deg, double fov_deg, double radius) {
  if (radius <= 0.0 || fov_deg <= 0.0) throw std::invalid_argument("bad-sector");
  const double dx = px - ax, dy = py - ay;
  const double r = std::hypot(dx, dy);
  if (r < 1e-12) return 0.0;
  const double half = fov_deg / 2.0;
  const double ang = std::atan2(dy, dx) / kPi * 180.0;
  const double diff = std::abs(angle_diff_deg(ang, heading_deg));
  if (diff <= half && r <= radius) return 0.0;
  if (diff <= half) return r - radius;  // beyond the arc, radially outside

  auto seg_dist = [&](double edge_deg) {
    const double ex = std::cos(deg2rad(edge_deg)), ey = std::sin(deg2rad(edge_deg));
    // project onto the edge ray, clamp to [0, radius]
    double t = dx * ex + dy * ey;
    t = std::clamp(t, 0.0, radius);
    const double cx = ex * t, cy = ey * t;
    return std::hypot(dx - cx, dy - cy);
  };
  return std::min(seg_dist(heading_deg - half), seg_dist(heading_deg + half));
}

std::vector<int> select_recipients(int sender, const std::vector<Pose>& poses,
                                   const SensorParams& sensor, double reach_m) {
  if (sender < 0 || sender >= static_cast<int>(poses.size()))
    throw std::invalid_argument("bad-sender");
  if (reach_m < 0.0) throw std::invalid_argument("bad-reach");
  const Pose& sp = poses[static_cast<size_t>(sender)];
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(poses.size()); ++j) {
    if (j == sender) continue;
    const Pose& tp = poses[static_cast<size_t>(j)];
    const double d =
        point_sector_distance(tp.x_m(), tp.y_m(), sp.x_m(), sp.y_m(),
                              static_cast<double>(sp.heading), sensor.fov_deg,
                              sensor.max_range);
    if (d <= reach_m + 1e-12) out.push_back(j);
  }
  return out;
}

std::vector<std::vector<Message>> exchange(const std::vector<Outbox>& outboxes,
                                           const std::vector<Pose>& poses,
                                           const SensorParams& sensor,
                                           double reach_m, uint64_t value_cap,
                                           BandwidthLedger& ledger) {
  if (outboxes.size() != poses.size()) throw std::invalid_argument("size-mismatch");
  const int n = static_cast<int>(outboxes.size());
  std::vector<std::vector<Message>> inboxes(static_cast<size_t>(n));

  uint64_t round_total = 0;
  for (int s = 0; s < n; ++s) {
    const Outbox& ob = outboxes[static_cast<size_t>(s)];
    if (!ob.has_map) continue;
    const std::vector<int> recipients = select_recipients(s, poses, sensor, reach_m);
    if (recipients.empty()) continue;
    const uint64_t cost =
        static_cast<uint64_t>(ob.map_payload.size()) * recipients.size();
    if (round_total + cost > value_cap) {
      ledger.dropped_msgs += 1;
      continue;
    }
    round_total += cost;
    for (int rcp : recipients) {
      inboxes[static_cast<size_t>(rcp)].push_back(
          Message{s, MsgKind::map_vector, ob.map_payload});
      ledger.map_msgs += 1;
      ledger.total_values_sent += ob.map_payload.size();
      ledger.per_pair[{s, rcp}] += ob.map_payload.size();
    }
  }

  for (int s = 0; s < n; ++s) {
    for (const auto& [cat, round] : outboxes[static_cast<size_t>(s)].notices) {
      for (int rcp = 0; rcp < n; ++rcp) {
        if (rcp == s) continue;
        inboxes[static_cast<size_t>(rcp)].push_back(Message{
            s, MsgKind::found_notice,
            {static_cast<float>(cat), static_cast<float>(round)}});
        ledger.found_msgs += 1;
        ledger.total_values_sent += 2;
        ledger.per_pair[{s, rcp}] += 2;
      }
    }
  }
  return inboxes;
}

}  // namespace semnav
