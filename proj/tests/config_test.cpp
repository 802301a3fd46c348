#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <string>

#include "semnav/config.hpp"
#include "semnav/error.hpp"

using namespace semnav;

TEST_CASE("an empty document keeps every default") {
  const RunConfig cfg = config_from_json_string("{}");
  const RunConfig def;
  CHECK(cfg.seed == def.seed);
  CHECK(cfg.paths.scenes_dir == def.paths.scenes_dir);
  CHECK(cfg.gen.count == def.gen.count);
  CHECK(cfg.gen.l == def.gen.l);
  CHECK(cfg.simulation.max_steps == def.simulation.max_steps);
  CHECK(cfg.simulation.ray_count == def.simulation.ray_count);
  CHECK(cfg.comms.enabled == def.comms.enabled);
  CHECK(cfg.comms.codec == def.comms.codec);
  CHECK(cfg.policy.mode == def.policy.mode);
  CHECK(cfg.policy.alpha == def.policy.alpha);
  CHECK(cfg.train.epochs == def.train.epochs);
  CHECK(cfg.suite.n_list == def.suite.n_list);
  CHECK(cfg.suite.known_fraction == def.suite.known_fraction);
}

TEST_CASE("partial documents override only what they name") {
  const RunConfig cfg = config_from_json_string(R"({
    "seed": 42,
    "gen": {"l": 48, "seed": 9},
    "policy": {"mode": "learned", "alpha": 0.5},
    "suite": {"n_list": [1, 4], "seeds": [3, 5]}
  })");
  CHECK(cfg.seed == 42);
  CHECK(cfg.gen.l == 48);
  CHECK(cfg.gen.w == 60);  // untouched
  CHECK(cfg.gen.seed == 9);
  CHECK(cfg.policy.mode == "learned");
  CHECK(cfg.policy.alpha == 0.5);
  CHECK(cfg.policy.beta == 0.3);
  CHECK(cfg.suite.n_list == std::vector<int>{1, 4});
  CHECK(cfg.suite.seeds == std::vector<uint64_t>{3, 5});
  CHECK(cfg.suite.m_list == std::vector<int>{1});
}

TEST_CASE("configs survive a dump and reload unchanged") {
  RunConfig cfg;
  cfg.seed = 1234;
  cfg.paths.out_dir = "runs/exp-3";
  cfg.paths.policy = "ckpt.bin";
  cfg.gen.count = 4;
  cfg.gen.object_density = 0.9;
  cfg.simulation.p_miss = 0.25;
  cfg.simulation.depth_sigma = 0.05;
  cfg.comms.enabled = false;
  cfg.comms.codec = "learned";
  cfg.comms.budget_values = 64;
  cfg.policy.mode = "flat";
  cfg.policy.central = true;
  cfg.policy.gamma = 0.95;
  cfg.train.epochs = 7;
  cfg.train.target_pool = "known";
  cfg.suite.n_list = {2, 5};
  cfg.suite.workers = 3;

  const std::string dumped = config_to_json_string(cfg);
  const RunConfig back = config_from_json_string(dumped);
  CHECK(back.seed == cfg.seed);
  CHECK(back.paths.out_dir == cfg.paths.out_dir);
  CHECK(back.paths.policy == cfg.paths.policy);
  CHECK(back.gen.count == cfg.gen.count);
  CHECK(back.gen.object_density == cfg.gen.object_density);
  CHECK(back.simulation.p_miss == cfg.simulation.p_miss);
  CHECK(back.simulation.depth_sigma == cfg.simulation.depth_sigma);
  CHECK(back.comms.enabled == cfg.comms.enabled);
  CHECK(back.comms.codec == cfg.comms.codec);
  CHECK(back.comms.budget_values == cfg.comms.budget_values);
  CHECK(back.policy.mode == cfg.policy.mode);
  CHECK(back.policy.central == cfg.policy.central);
  CHECK(back.policy.gamma == cfg.policy.gamma);
  CHECK(back.train.epochs == cfg.train.epochs);
  CHECK(back.train.target_pool == cfg.train.target_pool);
  CHECK(back.suite.n_list == cfg.suite.n_list);
  CHECK(back.suite.workers == cfg.suite.workers);

  // A second dump of the reloaded config is byte-identical.
  CHECK(config_to_json_string(back) == dumped);
}

TEST_CASE("typos fail loudly with the offending key named") {
  CHECK_THROWS_WITH_AS(config_from_json_string(R"({"sede": 1})"),
                       "unknown-key: config.sede", ConfigError);
  CHECK_THROWS_WITH_AS(config_from_json_string(R"({"gen": {"lw": 40}})"),
                       "unknown-key: gen.lw", ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_json_string(R"({"suite": {"worker": 2}})"),
      "unknown-key: suite.worker", ConfigError);
}

TEST_CASE("type mismatches name the full field path") {
  CHECK_THROWS_WITH_AS(config_from_json_string(R"({"gen": {"count": "ten"}})"),
                       "bad-field: gen.count", ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_json_string(R"({"simulation": {"p_miss": {}}})"),
      "bad-field: simulation.p_miss", ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_json_string(R"({"suite": {"n_list": [1, "two"]}})"),
      "bad-field: suite.n_list", ConfigError);
}

TEST_CASE("malformed documents are rejected up front") {
  CHECK_THROWS_AS(config_from_json_string("{nope"), ConfigError);
  CHECK_THROWS_WITH_AS(config_from_json_string("[1, 2]"),
                       "bad-config: not an object", ConfigError);
}

TEST_CASE("validate names the first out-of-range field") {
  RunConfig cfg;
  CHECK_NOTHROW(validate_config(cfg));

  auto expect = [](RunConfig c, const std::string& field) {
    CHECK_THROWS_WITH_AS(validate_config(c), ("bad-field: " + field).c_str(),
                         ConfigError);
  };

  RunConfig c;
  c.gen.count = 0;
  expect(c, "gen.count");
  c = RunConfig{};
  c.gen.l = 8;
  expect(c, "gen.l");
  c = RunConfig{};
  c.simulation.ray_count = 1;
  expect(c, "simulation.ray_count");
  c = RunConfig{};
  c.simulation.fov_deg = 400.0;
  expect(c, "simulation.fov_deg");
  c = RunConfig{};
  c.simulation.p_confuse = 1.5;
  expect(c, "simulation.p_confuse");
  c = RunConfig{};
  c.comms.codec = "morse";
  expect(c, "comms.codec");
  c = RunConfig{};
  c.comms.budget_values = 0;
  expect(c, "comms.budget_values");
  c = RunConfig{};
  c.policy.mode = "psychic";
  expect(c, "policy.mode");
  c = RunConfig{};
  c.policy.gamma = 1.5;
  expect(c, "policy.gamma");
  c = RunConfig{};
  c.policy.lr = 0.0;
  expect(c, "policy.lr");
  c = RunConfig{};
  c.train.n_agents = 6;
  expect(c, "train.n_agents");
  c = RunConfig{};
  c.suite.n_list = {1, 7};
  expect(c, "suite.n_list");
  c = RunConfig{};
  c.suite.seeds.clear();
  expect(c, "suite.seeds");
  c = RunConfig{};
  c.suite.known_fraction = 0.0;
  expect(c, "suite.known_fraction");
  c = RunConfig{};
  c.suite.workers = 0;
  expect(c, "suite.workers");
}

TEST_CASE("episode config mirrors the simulation, comms, and policy sections") {
  RunConfig cfg;
  cfg.simulation.max_steps = 321;
  cfg.simulation.fov_deg = 120.0;
  cfg.simulation.ray_count = 31;
  cfg.simulation.max_range_m = 2.5;
  cfg.simulation.p_miss = 0.1;
  cfg.simulation.p_confuse = 0.2;
  cfg.simulation.depth_sigma = 0.01;
  cfg.comms.enabled = false;
  cfg.comms.send_interval = 9;
  cfg.comms.round_value_cap = 77;
  cfg.comms.reach_m = 1.4;
  cfg.policy.mode = "random-subgoal";
  cfg.policy.central = true;
  cfg.policy.use_priors = false;
  cfg.policy.p = 8;
  cfg.policy.replan_interval = 6;
  cfg.policy.alpha = 0.6;
  cfg.policy.beta = 0.4;
  cfg.policy.gamma = 0.9;
  cfg.policy.arrival_tolerance = 1;
  cfg.policy.pitch_sweep = false;

  const EpisodeConfig ec = episode_config_from(cfg);
  CHECK(ec.max_steps == 321);
  CHECK(ec.sensor.fov_deg == 120.0);
  CHECK(ec.sensor.ray_count == 31);
  CHECK(ec.sensor.max_range == 2.5);
  CHECK(ec.noise.p_miss == 0.1);
  CHECK(ec.noise.p_confuse == 0.2);
  CHECK(ec.noise.depth_sigma == 0.01);
  CHECK(ec.mode == AgentMode::random_subgoal);
  CHECK(ec.central);
  CHECK_FALSE(ec.use_priors);
  CHECK_FALSE(ec.comms);
  CHECK(ec.map_send_interval == 9);
  CHECK(ec.round_value_cap == 77);
  CHECK(ec.comm_reach_m == 1.4);
  CHECK(ec.hp.p == 8);
  CHECK(ec.hp.replan_interval == 6);
  CHECK(ec.hp.alpha == 0.6);
  CHECK(ec.hp.beta == 0.4);
  CHECK(ec.hp.gamma == 0.9);
  CHECK(ec.hp.arrival_tolerance == 1);
  CHECK_FALSE(ec.hp.pitch_sweep);
}

TEST_CASE("configs load from disk and missing paths are named") {
  const std::string path = "/tmp/semnav_config_test.json";
  RunConfig cfg;
  cfg.seed = 99;
  cfg.gen.count = 2;
  save_config(cfg, path);
  const RunConfig back = load_config(path);
  CHECK(back.seed == 99);
  CHECK(back.gen.count == 2);
  std::remove(path.c_str());

  CHECK_THROWS_WITH_AS(load_config("/tmp/definitely-not-here.json"),
                       "cannot-open: /tmp/definitely-not-here.json", ConfigError);
}
