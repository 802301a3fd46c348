#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "semnav/comms.hpp"
#include "semnav/error.hpp"
#include "semnav/rng.hpp"

using namespace semnav;

namespace {

double point_segment_dist(double px, double py, double x0, double y0, double x1,
                          double y1) {
  const double vx = x1 - x0, vy = y1 - y0;
  const double wx = px - x0, wy = py - y0;
  const double vv = vx * vx + vy * vy;
  double t = vv > 0 ? (wx * vx + wy * vy) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (x0 + t * vx), py - (y0 + t * vy));
}

// Closed-form distance to the sector, built from first principles: zero
// inside; otherwise the nearest boundary point lies on the arc (when the
// bearing falls inside the wedge) or on one of the two edge segments.
double sector_dist_oracle(double px, double py, double ax, double ay,
                          double heading_deg, double fov_deg, double radius) {
  const double dx = px - ax, dy = py - ay;
  const double r = std::hypot(dx, dy);
  if (r < 1e-12) return 0.0;
  const double half = fov_deg / 2.0;
  double diff = std::atan2(dy, dx) * 180.0 / kPi - heading_deg;
  while (diff > 180.0) diff -= 360.0;
  while (diff < -180.0) diff += 360.0;
  const bool in_wedge = std::abs(diff) <= half;
  if (in_wedge && r <= radius) return 0.0;
  double best = in_wedge ? r - radius : std::numeric_limits<double>::infinity();
  for (double edge : {heading_deg - half, heading_deg + half}) {
    const double ex = std::cos(deg2rad(edge)), ey = std::sin(deg2rad(edge));
    best = std::min(best, point_segment_dist(px, py, ax, ay, ax + radius * ex,
                                             ay + radius * ey));
  }
  return best;
}

SemanticMap random_map(int l, int w, int k, Rng& rng) {
  SemanticMap m(l, w, k);
  for (int y = 0; y < w; ++y)
    for (int x = 0; x < l; ++x) {
      if (rng.uniform01() < 0.5) m.add(x, y, m.explored_channel());
      if (rng.uniform01() < 0.15) m.add(x, y, m.occupied_channel());
      if (rng.uniform01() < 0.1)
        m.add(x, y, static_cast<int>(rng.below(static_cast<uint64_t>(k))));
    }
  return m;
}

}  // namespace

TEST_CASE("sector distance hand fixtures") {
  // Apex at origin, facing +x, 90 degree fov, 2 m radius.
  CHECK(point_sector_distance(0, 0, 0, 0, 0, 90, 2) == 0.0);
  CHECK(point_sector_distance(1, 0, 0, 0, 0, 90, 2) == 0.0);
  CHECK(point_sector_distance(3, 0, 0, 0, 0, 90, 2) == doctest::Approx(1.0));
  // On the 45 degree boundary at full radius: still inside.
  const double s = std::sqrt(2.0);
  CHECK(point_sector_distance(s, s, 0, 0, 0, 90, 2) ==
        doctest::Approx(0.0).epsilon(1e-9));
  // Straight up is 45 degrees outside the wedge; nearest edge point is
  // the projection onto the +45 edge.
  CHECK(point_sector_distance(0, 1, 0, 0, 0, 90, 2) ==
        doctest::Approx(std::sqrt(0.5)));
  // Directly behind: the apex is the nearest sector point.
  CHECK(point_sector_distance(-1, 0, 0, 0, 0, 90, 2) == doctest::Approx(1.0));
  // Heading wraps like the rest of the geometry.
  CHECK(point_sector_distance(0, -1.5, 0, 0, 270, 90, 2) == 0.0);
  CHECK_THROWS_AS(point_sector_distance(1, 1, 0, 0, 0, 0, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(point_sector_distance(1, 1, 0, 0, 0, 90, 0),
                  std::invalid_argument);
}

TEST_CASE("sector distance matches the closed-form oracle") {
  Rng rng(61);
  for (int rep = 0; rep < 2000; ++rep) {
    const double ax = rng.uniform01() * 4 - 2, ay = rng.uniform01() * 4 - 2;
    const double px = rng.uniform01() * 8 - 4, py = rng.uniform01() * 8 - 4;
    const double heading = static_cast<double>(rng.below(8)) * 45.0;
    const double fov = 30.0 + rng.uniform01() * 140.0;
    const double radius = 0.5 + rng.uniform01() * 4.0;
    const double got =
        point_sector_distance(px, py, ax, ay, heading, fov, radius);
    const double want = sector_dist_oracle(px, py, ax, ay, heading, fov, radius);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("recipients are agents within reach of the sender's sector") {
  SensorParams sensor;  // fov 90, range 5 m
  std::vector<Pose> poses = {
      {{10, 10}, 0, 0},   // sender
      {{20, 10}, 180, 0}, // 0.5 m dead ahead
      {{10, 40}, 0, 0},   // 1.5 m off to the side
      {{150, 10}, 0, 0},  // 7 m ahead, past the sector by ~2 m
  };
  // Side agent: bearing 90 degrees, nearest edge point ~1.06 m away.
  const auto got = select_recipients(0, poses, sensor, 1.2);
  CHECK(got == std::vector<int>{1, 2});
  const auto tight = select_recipients(0, poses, sensor, 0.5);
  CHECK(tight == std::vector<int>{1});

  CHECK_THROWS_AS(select_recipients(9, poses, sensor, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(select_recipients(0, poses, sensor, -1.0),
                  std::invalid_argument);
}

TEST_CASE("recipient selection agrees with the oracle on random teams") {
  SensorParams sensor;
  Rng rng(62);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<Pose> poses;
    const int n = 2 + static_cast<int>(rng.below(4));
    for (int i = 0; i < n; ++i)
      poses.push_back({{static_cast<int>(rng.below(80)),
                        static_cast<int>(rng.below(80))},
                       static_cast<int>(rng.below(4)) * 90, 0});
    const double reach = rng.uniform01() * 2.0;
    const int sender = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
    const auto got = select_recipients(sender, poses, sensor, reach);
    std::vector<int> want;
    for (int j = 0; j < n; ++j) {
      if (j == sender) continue;
      const double d = sector_dist_oracle(
          poses[j].x_m(), poses[j].y_m(), poses[sender].x_m(),
          poses[sender].y_m(), poses[sender].heading, sensor.fov_deg,
          sensor.max_range);
      if (d <= reach + 1e-12) want.push_back(j);
    }
    CHECK(got == want);
  }
}

TEST_CASE("exchange delivers maps per recipient and respects the cap") {
  SensorParams sensor;
  // 0 and 1 face each other half a meter apart; 2 sits far behind both.
  std::vector<Pose> poses = {
      {{10, 10}, 0, 0}, {{20, 10}, 180, 0}, {{10, 150}, 90, 0}};
  std::vector<Outbox> out(3);
  out[0].has_map = true;
  out[0].map_payload = {1.0f, 2.0f, 3.0f};
  out[1].has_map = true;
  out[1].map_payload = {4.0f, 5.0f};

  BandwidthLedger ledger;
  auto inboxes = exchange(out, poses, sensor, 1.0, 1000, ledger);
  REQUIRE(inboxes.size() == 3);
  REQUIRE(inboxes[1].size() == 1);
  CHECK(inboxes[1][0].sender == 0);
  CHECK(inboxes[1][0].kind == MsgKind::map_vector);
  CHECK(inboxes[1][0].payload == std::vector<float>{1.0f, 2.0f, 3.0f});
  REQUIRE(inboxes[0].size() == 1);
  CHECK(inboxes[0][0].sender == 1);
  CHECK(inboxes[2].empty());

  CHECK(ledger.map_msgs == 2);
  CHECK(ledger.found_msgs == 0);
  CHECK(ledger.dropped_msgs == 0);
  CHECK(ledger.total_values_sent == 5);
  CHECK(ledger.per_pair.at({0, 1}) == 3);
  CHECK(ledger.per_pair.at({1, 0}) == 2);
}

TEST_CASE("the cap drops whole messages in ascending sender order") {
  SensorParams sensor;
  std::vector<Pose> poses = {{{10, 10}, 0, 0}, {{20, 10}, 180, 0}};
  std::vector<Outbox> out(2);
  out[0].has_map = true;
  out[0].map_payload.assign(8, 1.0f);
  out[1].has_map = true;
  out[1].map_payload.assign(8, 2.0f);

  // Cap fits exactly one payload: the lower id wins, the other drops whole.
  BandwidthLedger ledger;
  auto inboxes = exchange(out, poses, sensor, 1.0, 8, ledger);
  CHECK(inboxes[1].size() == 1);
  CHECK(inboxes[0].empty());
  CHECK(ledger.map_msgs == 1);
  CHECK(ledger.dropped_msgs == 1);
  CHECK(ledger.total_values_sent == 8);

  // A cap of zero drops everything.
  BandwidthLedger none;
  inboxes = exchange(out, poses, sensor, 1.0, 0, none);
  CHECK(inboxes[0].empty());
  CHECK(inboxes[1].empty());
  CHECK(none.dropped_msgs == 2);
  CHECK(none.total_values_sent == 0);
}

TEST_CASE("a send with no one in reach neither costs nor drops") {
  SensorParams sensor;
  std::vector<Pose> poses = {{{10, 10}, 0, 0}, {{10, 150}, 90, 0}};
  std::vector<Outbox> out(2);
  out[0].has_map = true;
  out[0].map_payload.assign(4, 1.0f);
  BandwidthLedger ledger;
  auto inboxes = exchange(out, poses, sensor, 1.0, 100, ledger);
  CHECK(inboxes[0].empty());
  CHECK(inboxes[1].empty());
  CHECK(ledger.map_msgs == 0);
  CHECK(ledger.dropped_msgs == 0);
  CHECK(ledger.total_values_sent == 0);
}

TEST_CASE("found notices reach everyone and ignore the cap") {
  SensorParams sensor;
  std::vector<Pose> poses = {
      {{10, 10}, 0, 0}, {{20, 10}, 180, 0}, {{10, 150}, 90, 0}};
  std::vector<Outbox> out(3);
  out[0].notices = {{3, 7}};
  out[2].notices = {{1, 7}, {2, 8}};

  BandwidthLedger ledger;
  auto inboxes = exchange(out, poses, sensor, 1.0, 0, ledger);
  // Agent 1 hears agent 0 and both of agent 2's notices.
  REQUIRE(inboxes[1].size() == 3);
  CHECK(inboxes[1][0].kind == MsgKind::found_notice);
  CHECK(inboxes[1][0].payload == std::vector<float>{3.0f, 7.0f});
  CHECK(inboxes[0].size() == 2);   // both from agent 2
  CHECK(inboxes[2].size() == 1);   // from agent 0
  CHECK(ledger.found_msgs == 6);
  CHECK(ledger.dropped_msgs == 0);
  CHECK(ledger.total_values_sent == 12);

  std::vector<Outbox> lopsided(2);
  CHECK_THROWS_AS(exchange(lopsided, poses, sensor, 1.0, 10, ledger),
                  std::invalid_argument);
}

TEST_CASE("quantized payloads are exactly v floats") {
  Rng rng(63);
  for (int v : {1, 5, 16, 64, 100, 257}) {
    Codec c = Codec::quantized(20, 15, 3, v);
    SemanticMap m = random_map(20, 15, 3, rng);
    const auto payload = c.encode(m);
    CHECK(static_cast<int>(payload.size()) == v);
    CHECK(c.v() == v);
  }
}

TEST_CASE("quantized block packing follows the documented formula") {
  // 8x8 map, v=16: coarse grid is 4x4 with 2x2 blocks.
  Codec c = Codec::quantized(8, 8, 2, 16);
  SemanticMap m(8, 8, 2);
  m.add(0, 0, 1);                     // block 0: category 1 only
  m.add(2, 0, m.explored_channel());  // block 1: explored
  m.add(4, 0, m.occupied_channel());  // block 2: occupied
  m.add(4, 0, m.explored_channel());
  m.add(1, 3, 0);                     // block 4 (bx=0, by=1): cat 0 + explored
  m.add(1, 3, m.explored_channel());

  const auto p = c.encode(m);
  CHECK(p[0] == doctest::Approx((1 + 1) * 4));          // cat only
  CHECK(p[1] == doctest::Approx(1));                    // explored
  CHECK(p[2] == doctest::Approx(2 + 1));                // occupied + explored
  CHECK(p[3] == doctest::Approx(0));                    // empty
  CHECK(p[4] == doctest::Approx((0 + 1) * 4 + 1));      // cat 0 + explored
  for (int i = 5; i < 16; ++i) CHECK(p[i] == 0.0f);

  // Majority: two category-0 cells beat one category-1 cell; ties keep
  // the lower id.
  SemanticMap maj(8, 8, 2);
  maj.add(0, 0, 0);
  maj.add(1, 0, 0);
  maj.add(0, 1, 1);
  CHECK(c.encode(maj)[0] == doctest::Approx((0 + 1) * 4));
  SemanticMap tie(8, 8, 2);
  tie.add(0, 0, 1);
  tie.add(1, 0, 0);
  CHECK(c.encode(tie)[0] == doctest::Approx((0 + 1) * 4));
}

TEST_CASE("quantized decode paints whole blocks with unit counts") {
  Codec c = Codec::quantized(8, 8, 2, 16);
  Rng rng(64);
  for (int rep = 0; rep < 20; ++rep) {
    SemanticMap m = random_map(8, 8, 2, rng);
    const auto payload = c.encode(m);
    SemanticMap d = c.decode(payload);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        // Block-level truth, recomputed directly.
        const int x0 = (x / 2) * 2, y0 = (y / 2) * 2;
        bool exp = false, occ = false;
        uint32_t c0 = 0, c1 = 0;
        for (int yy = y0; yy < y0 + 2; ++yy)
          for (int xx = x0; xx < x0 + 2; ++xx) {
            exp = exp || m.explored(xx, yy);
            occ = occ || m.occupied(xx, yy);
            c0 += m.count(xx, yy, 0);
            c1 += m.count(xx, yy, 1);
          }
        const int major = c1 > c0 ? 1 : (c0 > 0 ? 0 : -1);
        CHECK(d.occupied(x, y) == occ);
        // Any block content at all implies explored after decoding.
        CHECK(d.explored(x, y) == (exp || occ || major >= 0));
        for (int ch = 0; ch < d.channels(); ++ch) CHECK(d.count(x, y, ch) <= 1);
        if (major >= 0) CHECK(d.count(x, y, major) == 1);
      }
  }
}

TEST_CASE("decode validates payload shape and content") {
  Codec c = Codec::quantized(8, 8, 2, 16);
  SemanticMap m(8, 8, 2);
  auto p = c.encode(m);
  CHECK_THROWS_AS(c.decode(std::vector<float>(15, 0.0f)), std::invalid_argument);
  p[0] = 97.0f;  // past (k_total)*4+3
  CHECK_THROWS_AS(c.decode(p), std::invalid_argument);
  p[0] = 1.4f;  // not near an integer
  CHECK_THROWS_AS(c.decode(p), std::invalid_argument);
  p[0] = 0.0f;
  p[15] = 0.0f;
  CHECK_NOTHROW(c.decode(p));
  // Slots past the coarse grid must stay zero (grid is 4x4 = 16 here, so
  // use a capacity with slack).
  Codec slack = Codec::quantized(8, 8, 2, 20);
  auto q = slack.encode(m);
  q[17] = 1.0f;
  CHECK_THROWS_AS(slack.decode(q), std::invalid_argument);
}

TEST_CASE("encode rejects maps with the wrong shape") {
  Codec c = Codec::quantized(8, 8, 2, 16);
  SemanticMap wrong(8, 9, 2);
  CHECK_THROWS_AS(c.encode(wrong), std::invalid_argument);
  SemanticMap wrong_k(8, 8, 3);
  CHECK_THROWS_AS(c.encode(wrong_k), std::invalid_argument);
}

TEST_CASE("learned codec training lowers reconstruction loss") {
  // Draws cycle over a handful of prototype maps, the way episode maps
  // repeat structure, so a rank-limited codec has something to learn.
  Rng rng(65);
  std::vector<SemanticMap> protos;
  for (int i = 0; i < 8; ++i) protos.push_back(random_map(6, 6, 2, rng));
  std::vector<SemanticMap> maps;
  for (int i = 0; i < 40; ++i) maps.push_back(protos[i % 8]);

  CodecTrainResult res = train_learned_codec(maps, 12, 120, 0.5, 7);
  REQUIRE(res.loss_trace.size() == 121);
  CHECK(res.loss_trace.back() < 0.5 * res.loss_trace.front());
  CHECK(res.codec.variant() == CodecVariant::learned);
  CHECK(res.loss_trace.back() ==
        doctest::Approx(res.codec.reconstruction_loss(maps)));

  // Encoded payloads still have exactly v entries and decode into a
  // binary map whose marked cells are explored.
  const auto payload = res.codec.encode(maps[0]);
  CHECK(payload.size() == 12);
  SemanticMap d = res.codec.decode(payload);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      for (int ch = 0; ch < d.channels(); ++ch) CHECK(d.count(x, y, ch) <= 1);
      if (d.occupied(x, y) || d.count(x, y, 0) > 0 || d.count(x, y, 1) > 0)
        CHECK(d.explored(x, y));
    }
}

TEST_CASE("codec training validates its inputs") {
  Rng rng(66);
  std::vector<SemanticMap> few;
  for (int i = 0; i < 31; ++i) few.push_back(random_map(6, 6, 2, rng));
  CHECK_THROWS_AS(train_learned_codec(few, 8, 10, 0.5, 1),
                  std::invalid_argument);
  few.push_back(random_map(7, 6, 2, rng));
  CHECK_THROWS_AS(train_learned_codec(few, 8, 10, 0.5, 1),
                  std::invalid_argument);
  std::vector<SemanticMap> ok;
  for (int i = 0; i < 32; ++i) ok.push_back(random_map(6, 6, 2, rng));
  CHECK_THROWS_AS(train_learned_codec(ok, 8, 10, -0.5, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_learned_codec(ok, 0, 10, 0.5, 1),
                  std::invalid_argument);
}

TEST_CASE("reconstruction_loss is learned-only") {
  Codec q = Codec::quantized(6, 6, 2, 8);
  Rng rng(67);
  std::vector<SemanticMap> maps = {random_map(6, 6, 2, rng)};
  CHECK_THROWS_AS(q.reconstruction_loss(maps), std::invalid_argument);
  Codec le = Codec::learned_init(6, 6, 2, 8, 1);
  CHECK_THROWS_AS(le.reconstruction_loss({}), std::invalid_argument);
  CHECK(le.reconstruction_loss(maps) > 0.0);
}

TEST_CASE("codec blobs round-trip both variants") {
  Codec q = Codec::quantized(12, 9, 4, 25);
  Codec q2 = Codec::from_blob(q.to_blob());
  CHECK(q2.variant() == CodecVariant::quantized);
  CHECK(q2.l() == 12);
  CHECK(q2.w() == 9);
  CHECK(q2.k_total() == 4);
  CHECK(q2.v() == 25);
  Rng rng(68);
  SemanticMap m = random_map(12, 9, 4, rng);
  CHECK(q.encode(m) == q2.encode(m));

  Codec le = Codec::learned_init(5, 5, 2, 6, 3);
  Codec le2 = Codec::from_blob(le.to_blob());
  CHECK(le2.variant() == CodecVariant::learned);
  SemanticMap s = random_map(5, 5, 2, rng);
  CHECK(le.encode(s) == le2.encode(s));
  CHECK(le.decode(le.encode(s)) == le2.decode(le2.encode(s)));

  CHECK_THROWS_AS(Codec::from_blob("junk"), ParseError);
  std::string blob = q.to_blob();
  blob.pop_back();
  CHECK_THROWS_AS(Codec::from_blob(blob), ParseError);
  blob = le.to_blob() + "z";
  CHECK_THROWS_AS(Codec::from_blob(blob), ParseError);
}
