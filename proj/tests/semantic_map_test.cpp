#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <queue>
#include <vector>

#include "semnav/perception.hpp"
#include "semnav/rng.hpp"
#include "semnav/scene.hpp"
#include "semnav/semantic_map.hpp"

using namespace semnav;

namespace {

// Reference hop-count BFS, written independently of distance_field.
std::vector<int32_t> bfs_oracle(int l, int w, const std::vector<uint8_t>& blocked,
                                const std::vector<Cell>& goals) {
  std::vector<int32_t> d(static_cast<size_t>(l) * w, kUnreachable);
  std::queue<Cell> q;
  for (const Cell& g : goals) {
    if (d[cell_index(g.x, g.y, l)] != 0) {
      d[cell_index(g.x, g.y, l)] = 0;
      q.push(g);
    }
  }
  while (!q.empty()) {
    Cell c = q.front();
    q.pop();
    const int32_t nd = d[cell_index(c.x, c.y, l)] + 1;
    const Cell nb[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
    for (const Cell& n : nb) {
      if (n.x < 0 || n.y < 0 || n.x >= l || n.y >= w) continue;
      if (blocked[cell_index(n.x, n.y, l)]) continue;
      int32_t& slot = d[cell_index(n.x, n.y, l)];
      if (nd < slot) {
        slot = nd;
        q.push(n);
      }
    }
  }
  return d;
}

SemanticMap random_map(int l, int w, int k, Rng& rng, double fill = 0.2) {
  SemanticMap m(l, w, k);
  for (int y = 0; y < w; ++y)
    for (int x = 0; x < l; ++x) {
      if (rng.uniform01() < fill)
        m.add(x, y, static_cast<int>(rng.below(static_cast<uint64_t>(k))),
              static_cast<uint16_t>(1 + rng.below(3)));
      if (rng.uniform01() < fill) m.add(x, y, m.occupied_channel());
      if (rng.uniform01() < 0.6) m.add(x, y, m.explored_channel());
    }
  return m;
}

}  // namespace

TEST_CASE("fresh map is empty and add updates counts and bits") {
  SemanticMap m(8, 6, 3);
  CHECK(m.l() == 8);
  CHECK(m.w() == 6);
  CHECK(m.k_total() == 3);
  CHECK(m.channels() == 5);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) {
      CHECK(!m.explored(x, y));
      CHECK(!m.occupied(x, y));
      CHECK(!m.any_counts(x, y));
    }

  m.add(2, 3, 1, 5);
  CHECK(m.count(2, 3, 1) == 5);
  CHECK(m.any_counts(2, 3));
  CHECK(!m.explored(2, 3));
  CHECK(!m.occupied(2, 3));

  m.add(2, 3, m.occupied_channel());
  CHECK(m.occupied(2, 3));
  m.add(2, 3, m.explored_channel());
  CHECK(m.explored(2, 3));
}

TEST_CASE("counts saturate instead of wrapping") {
  SemanticMap m(4, 4, 2);
  m.add(1, 1, 0, 0xfff0);
  m.add(1, 1, 0, 0x00ff);
  CHECK(m.count(1, 1, 0) == 0xffff);
  m.add(1, 1, 0);
  CHECK(m.count(1, 1, 0) == 0xffff);
}

TEST_CASE("merge is a cellwise saturating sum") {
  Rng rng(11);
  SemanticMap a = random_map(12, 12, 4, rng);
  SemanticMap b = random_map(12, 12, 4, rng);
  SemanticMap merged = a;
  merged.merge_from(b);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x)
      for (int ch = 0; ch < merged.channels(); ++ch) {
        const uint32_t want =
            std::min<uint32_t>(0xffff, static_cast<uint32_t>(a.count(x, y, ch)) +
                                           b.count(x, y, ch));
        CHECK(merged.count(x, y, ch) == want);
      }
  // Bits follow the summed counts.
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) {
      CHECK(merged.explored(x, y) == (a.explored(x, y) || b.explored(x, y)));
      CHECK(merged.occupied(x, y) == (a.occupied(x, y) || b.occupied(x, y)));
    }
}

TEST_CASE("merge is commutative and rejects mismatched shapes") {
  Rng rng(12);
  SemanticMap a = random_map(10, 7, 3, rng);
  SemanticMap b = random_map(10, 7, 3, rng);
  SemanticMap ab = a, ba = b;
  ab.merge_from(b);
  ba.merge_from(a);
  CHECK(ab == ba);

  SemanticMap wrong(10, 7, 4);
  CHECK_THROWS_AS(ab.merge_from(wrong), std::invalid_argument);
  SemanticMap wrong2(7, 10, 3);
  CHECK_THROWS_AS(ab.merge_from(wrong2), std::invalid_argument);
}

TEST_CASE("serialize round-trips bit-exactly") {
  Rng rng(13);
  SemanticMap m = random_map(15, 9, 5, rng);
  const auto bytes = m.serialize();
  SemanticMap back = SemanticMap::deserialize(bytes);
  CHECK(back == m);
  CHECK(back.serialize() == bytes);
  // Bits are reconstructed, not just copied.
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 15; ++x) {
      CHECK(back.explored(x, y) == m.explored(x, y));
      CHECK(back.occupied(x, y) == m.occupied(x, y));
      CHECK(back.any_counts(x, y) == m.any_counts(x, y));
    }
}

TEST_CASE("deserialize rejects truncated or garbage input") {
  Rng rng(14);
  SemanticMap m = random_map(6, 6, 2, rng);
  auto bytes = m.serialize();
  bytes.pop_back();
  CHECK_THROWS(SemanticMap::deserialize(bytes));
  CHECK_THROWS(SemanticMap::deserialize({1, 2, 3}));
}

TEST_CASE("rebuild_bits recovers flags after raw edits") {
  SemanticMap m(5, 5, 2);
  m.raw()[(cell_index(3, 2, 5)) * m.channels() + m.occupied_channel()] = 7;
  CHECK(!m.occupied(3, 2));  // stale until rebuilt
  m.rebuild_bits();
  CHECK(m.occupied(3, 2));
  CHECK(m.any_counts(3, 2));
  CHECK(!m.explored(3, 2));

  m.raw()[(cell_index(3, 2, 5)) * m.channels() + m.occupied_channel()] = 0;
  m.rebuild_bits();
  CHECK(!m.occupied(3, 2));
  CHECK(!m.any_counts(3, 2));
}

TEST_CASE("projection marks the path explored and the hit occupied") {
  // Agent at (5,10) facing +x, wall 10 cells out at (15,10).
  Scene s;
  s.id = "proj";
  s.l = 30;
  s.w = 20;
  s.walls.assign(30 * 20, 0);
  for (int x = 0; x < 30; ++x) {
    s.walls[cell_index(x, 0, 30)] = 1;
    s.walls[cell_index(x, 19, 30)] = 1;
  }
  for (int y = 0; y < 20; ++y) {
    s.walls[cell_index(0, y, 30)] = 1;
    s.walls[cell_index(29, y, 30)] = 1;
  }
  s.walls[cell_index(15, 10, 30)] = 1;
  s.vocab = {"Box", "Ball"};
  s.validate();

  SensorParams sp;
  sp.ray_count = 1;
  Observation obs = observe(s, {{5, 10}, 0, 0}, sp);
  REQUIRE(obs.rays[0].kind == HitKind::wall);

  SemanticMap m(30, 20, 2);
  m.project_observation(obs);
  for (int x = 5; x < 15; ++x) {
    CHECK(m.explored(x, 10));
    CHECK(!m.occupied(x, 10));
  }
  CHECK(m.explored(15, 10));
  CHECK(m.occupied(15, 10));
  CHECK(m.count(15, 10, m.occupied_channel()) == 1);
  // A wall hit carries no label, so no category channel moves.
  CHECK(m.count(15, 10, 0) == 0);
  CHECK(m.count(15, 10, 1) == 0);
  // Off-ray cells stay untouched.
  CHECK(!m.explored(5, 11));
  CHECK(!m.explored(16, 10));
}

TEST_CASE("projection lands labeled hits on the category channel") {
  Scene s;
  s.id = "proj2";
  s.l = 30;
  s.w = 20;
  s.walls.assign(30 * 20, 0);
  for (int x = 0; x < 30; ++x) {
    s.walls[cell_index(x, 0, 30)] = 1;
    s.walls[cell_index(x, 19, 30)] = 1;
  }
  for (int y = 0; y < 20; ++y) {
    s.walls[cell_index(0, y, 30)] = 1;
    s.walls[cell_index(29, y, 30)] = 1;
  }
  s.vocab = {"Box", "Ball"};
  s.objects.push_back({0, 1, {{12, 10}}, HeightBand::eye});
  s.validate();

  SensorParams sp;
  sp.ray_count = 1;
  Observation obs = observe(s, {{4, 10}, 0, 0}, sp);
  REQUIRE(obs.rays[0].kind == HitKind::object);

  SemanticMap m(30, 20, 2);
  m.project_observation(obs);
  CHECK(m.occupied(12, 10));
  CHECK(m.count(12, 10, 1) == 1);
  CHECK(m.count(12, 10, 0) == 0);

  // A second identical observation doubles the evidence.
  m.project_observation(obs);
  CHECK(m.count(12, 10, 1) == 2);
  CHECK(m.count(12, 10, m.occupied_channel()) == 2);
}

TEST_CASE("a none ray explores its full length without occupying") {
  Scene s;
  s.id = "proj3";
  s.l = 200;
  s.w = 9;
  s.walls.assign(200 * 9, 0);
  for (int x = 0; x < 200; ++x) {
    s.walls[cell_index(x, 0, 200)] = 1;
    s.walls[cell_index(x, 8, 200)] = 1;
  }
  for (int y = 0; y < 9; ++y) {
    s.walls[cell_index(0, y, 200)] = 1;
    s.walls[cell_index(199, y, 200)] = 1;
  }
  s.vocab = {"Box"};
  s.validate();

  SensorParams sp;
  sp.ray_count = 1;
  sp.max_range = 1.0;  // 20 cells
  Observation obs = observe(s, {{3, 4}, 0, 0}, sp);
  REQUIRE(obs.rays[0].kind == HitKind::none);

  SemanticMap m(200, 9, 1);
  m.project_observation(obs);
  for (int x = 3; x <= 23; ++x) CHECK(m.explored(x, 4));
  CHECK(!m.explored(24, 4));
  for (int x = 0; x < 200; ++x) CHECK(!m.occupied(x, 4));
}

TEST_CASE("projection reproduces what the sensor saw") {
  // Property: after projecting a clean observation, every labeled hit cell
  // is occupied in the map with its category counted.
  GenParams gp;
  gp.l = 40;
  gp.w = 40;
  gp.rooms = 2;
  gp.object_density = 1.0;
  gp.category_count = 6;
  gp.spawn_count = 4;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Scene s = generate_scene(seed, gp);
    SemanticMap m(s.l, s.w, static_cast<int>(s.vocab.size()));
    SensorParams sp;
    for (const Cell& spawn : s.spawns) {
      for (int heading : {0, 90, 180, 270}) {
        Observation obs = observe(s, {spawn, heading, 0}, sp);
        m.project_observation(obs);
        for (const RayHit& r : obs.rays) {
          if (r.kind != HitKind::object || r.category < 0) continue;
          const double rad = deg2rad(heading + r.bearing);
          const int hx = spawn.x + static_cast<int>(std::lround(
                                       std::cos(rad) * r.depth / kCellSize));
          const int hy = spawn.y + static_cast<int>(std::lround(
                                       std::sin(rad) * r.depth / kCellSize));
          // Straight rays land exactly; diagonals can round to a neighbor,
          // so only the axis-aligned ones are pinned here.
          if (r.bearing == 0.0) {
            CHECK(m.occupied(hx, hy));
            CHECK(m.count(hx, hy, r.category) > 0);
          }
        }
      }
    }
  }
}

TEST_CASE("distance_field matches a reference BFS on random maps") {
  Rng rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    const int l = 10 + static_cast<int>(rng.below(15));
    const int w = 10 + static_cast<int>(rng.below(15));
    SemanticMap m(l, w, 2);
    std::vector<uint8_t> blocked(static_cast<size_t>(l) * w, 0);
    for (int y = 0; y < w; ++y)
      for (int x = 0; x < l; ++x)
        if (rng.uniform01() < 0.25) {
          m.add(x, y, m.occupied_channel());
          blocked[cell_index(x, y, l)] = 1;
        }
    std::vector<Cell> goals;
    const int n_goals = 1 + static_cast<int>(rng.below(3));
    for (int g = 0; g < n_goals; ++g)
      goals.push_back({static_cast<int>(rng.below(static_cast<uint64_t>(l))),
                       static_cast<int>(rng.below(static_cast<uint64_t>(w)))});
    const auto got = distance_field(m, goals);
    const auto want = bfs_oracle(l, w, blocked, goals);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
  }
}

TEST_CASE("occupied goals seed at zero but do not expand new paths") {
  SemanticMap m(5, 5, 1);
  // Wall off the middle column; goal sits inside it.
  for (int y = 0; y < 5; ++y) m.add(2, y, m.occupied_channel());
  const auto d = distance_field(m, {{2, 2}});
  CHECK(d[cell_index(2, 2, 5)] == 0);
  // Neighbors of the goal are reachable in one hop (expansion out of the
  // seeded goal itself is allowed; it is the walls beyond that stop it).
  CHECK(d[cell_index(1, 2, 5)] == 1);
  CHECK(d[cell_index(3, 2, 5)] == 1);
  // But other occupied cells in the column stay unreachable.
  CHECK(d[cell_index(2, 0, 5)] == kUnreachable);
  CHECK(d[cell_index(2, 4, 5)] == kUnreachable);
}

TEST_CASE("unknown cells count as traversable for planning") {
  SemanticMap m(7, 3, 1);  // nothing explored at all
  const auto d = distance_field(m, {{0, 1}});
  CHECK(d[cell_index(6, 1, 7)] == 6);
}

TEST_CASE("distance_field walls split the grid") {
  SemanticMap m(9, 9, 1);
  for (int y = 0; y < 9; ++y) m.add(4, y, m.occupied_channel());
  const auto d = distance_field(m, {{1, 1}});
  CHECK(d[cell_index(3, 1, 9)] == 2);
  for (int y = 0; y < 9; ++y) {
    CHECK(d[cell_index(4, y, 9)] == kUnreachable);
    for (int x = 5; x < 9; ++x) CHECK(d[cell_index(x, y, 9)] == kUnreachable);
  }
}
