#include "semnav/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "semnav/error.hpp"

namespace semnav {

using nlohmann::json;

namespace {

// Typed getter that names the full field path on any mismatch.
template <typename T>
void get_field(const json& j, const std::string& section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad-field: " + section + "." + key);
  }
}

void reject_unknown(const json& j, const std::string& section,
                    const std::set<std::string>& known) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("unknown-key: " + section + "." + it.key());
}

}  // namespace

RunConfig config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad-json: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("bad-config: not an object");
  reject_unknown(j, "config",
                 {"paths", "gen", "simulation", "comms", "policy", "train",
                  "suite", "seed"});

  RunConfig cfg;
  get_field(j, "config", "seed", cfg.seed);
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    reject_unknown(p, "paths", {"scenes_dir", "priors", "policy", "out_dir"});
    get_field(p, "paths", "scenes_dir", cfg.paths.scenes_dir);
    get_field(p, "paths", "priors", cfg.paths.priors);
    get_field(p, "paths", "policy", cfg.paths.policy);
    get_field(p, "paths", "out_dir", cfg.paths.out_dir);
  }
  if (j.contains("gen")) {
    const json& g = j.at("gen");
    reject_unknown(g, "gen",
                   {"count", "l", "w", "rooms", "object_density",
                    "category_count", "spawn_count", "seed"});
    get_field(g, "gen", "count", cfg.gen.count);
    get_field(g, "gen", "l", cfg.gen.l);
    get_field(g, "gen", "w", cfg.gen.w);
    get_field(g, "gen", "rooms", cfg.gen.rooms);
    get_field(g, "gen", "object_density", cfg.gen.object_density);
    get_field(g, "gen", "category_count", cfg.gen.category_count);
    get_field(g, "gen", "spawn_count", cfg.gen.spawn_count);
    get_field(g, "gen", "seed", cfg.gen.seed);
  }
  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    reject_unknown(s, "simulation",
                   {"max_steps", "fov_deg", "ray_count", "max_range_m",
                    "p_miss", "p_confuse", "depth_sigma"});
    get_field(s, "simulation", "max_steps", cfg.simulation.max_steps);
    get_field(s, "simulation", "fov_deg", cfg.simulation.fov_deg);
    get_field(s, "simulation", "ray_count", cfg.simulation.ray_count);
    get_field(s, "simulation", "max_range_m", cfg.simulation.max_range_m);
    get_field(s, "simulation", "p_miss", cfg.simulation.p_miss);
    get_field(s, "simulation", "p_confuse", cfg.simulation.p_confuse);
    get_field(s, "simulation", "depth_sigma", cfg.simulation.depth_sigma);
  }
  if (j.contains("comms")) {
    const json& c = j.at("comms");
    reject_unknown(c, "comms",
                   {"enabled", "codec", "budget_values", "reach_m",
                    "send_interval", "round_value_cap"});
    get_field(c, "comms", "enabled", cfg.comms.enabled);
    get_field(c, "comms", "codec", cfg.comms.codec);
    get_field(c, "comms", "budget_values", cfg.comms.budget_values);
    get_field(c, "comms", "reach_m", cfg.comms.reach_m);
    get_field(c, "comms", "send_interval", cfg.comms.send_interval);
    get_field(c, "comms", "round_value_cap", cfg.comms.round_value_cap);
  }
  if (j.contains("policy")) {
    const json& p = j.at("policy");
    reject_unknown(p, "policy",
                   {"mode", "central", "use_priors", "p", "replan_interval",
                    "alpha", "beta", "gamma", "lr", "clip", "entropy_coef",
                    "ppo_epochs", "normalize_advantages", "arrival_tolerance",
                    "pitch_sweep"});
    get_field(p, "policy", "mode", cfg.policy.mode);
    get_field(p, "policy", "central", cfg.policy.central);
    get_field(p, "policy", "use_priors", cfg.policy.use_priors);
    get_field(p, "policy", "p", cfg.policy.p);
    get_field(p, "policy", "replan_interval", cfg.policy.replan_interval);
    get_field(p, "policy", "alpha", cfg.policy.alpha);
    get_field(p, "policy", "beta", cfg.policy.beta);
    get_field(p, "policy", "gamma", cfg.policy.gamma);
    get_field(p, "policy", "lr", cfg.policy.lr);
    get_field(p, "policy", "clip", cfg.policy.clip);
    get_field(p, "policy", "entropy_coef", cfg.policy.entropy_coef);
    get_field(p, "policy", "ppo_epochs", cfg.policy.ppo_epochs);
    get_field(p, "policy", "normalize_advantages", cfg.policy.normalize_advantages);
    get_field(p, "policy", "arrival_tolerance", cfg.policy.arrival_tolerance);
    get_field(p, "policy", "pitch_sweep", cfg.policy.pitch_sweep);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, "train",
                   {"epochs", "episodes_per_epoch", "n_agents", "m_targets",
                    "max_steps", "seed", "target_pool"});
    get_field(t, "train", "epochs", cfg.train.epochs);
    get_field(t, "train", "episodes_per_epoch", cfg.train.episodes_per_epoch);
    get_field(t, "train", "n_agents", cfg.train.n_agents);
    get_field(t, "train", "m_targets", cfg.train.m_targets);
    get_field(t, "train", "max_steps", cfg.train.max_steps);
    get_field(t, "train", "seed", cfg.train.seed);
    get_field(t, "train", "target_pool", cfg.train.target_pool);
  }
  if (j.contains("suite")) {
    const json& s = j.at("suite");
    reject_unknown(s, "suite",
                   {"n_list", "m_list", "seeds", "tasks_per_scene", "task_seed",
                    "target_pool", "known_fraction", "workers"});
    get_field(s, "suite", "n_list", cfg.suite.n_list);
    get_field(s, "suite", "m_list", cfg.suite.m_list);
    get_field(s, "suite", "seeds", cfg.suite.seeds);
    get_field(s, "suite", "tasks_per_scene", cfg.suite.tasks_per_scene);
    get_field(s, "suite", "task_seed", cfg.suite.task_seed);
    get_field(s, "suite", "target_pool", cfg.suite.target_pool);
    get_field(s, "suite", "known_fraction", cfg.suite.known_fraction);
    get_field(s, "suite", "workers", cfg.suite.workers);
  }
  validate_config(cfg);
  return cfg;
}

std::string config_to_json_string(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["paths"] = {{"scenes_dir", cfg.paths.scenes_dir},
                {"priors", cfg.paths.priors},
                {"policy", cfg.paths.policy},
                {"out_dir", cfg.paths.out_dir}};
  j["gen"] = {{"count", cfg.gen.count},
              {"l", cfg.gen.l},
              {"w", cfg.gen.w},
              {"rooms", cfg.gen.rooms},
              {"object_density", cfg.gen.object_density},
              {"category_count", cfg.gen.category_count},
              {"spawn_count", cfg.gen.spawn_count},
              {"seed", cfg.gen.seed}};
  j["simulation"] = {{"max_steps", cfg.simulation.max_steps},
                     {"fov_deg", cfg.simulation.fov_deg},
                     {"ray_count", cfg.simulation.ray_count},
                     {"max_range_m", cfg.simulation.max_range_m},
                     {"p_miss", cfg.simulation.p_miss},
                     {"p_confuse", cfg.simulation.p_confuse},
                     {"depth_sigma", cfg.simulation.depth_sigma}};
  j["comms"] = {{"enabled", cfg.comms.enabled},
                {"codec", cfg.comms.codec},
                {"budget_values", cfg.comms.budget_values},
                {"reach_m", cfg.comms.reach_m},
                {"send_interval", cfg.comms.send_interval},
                {"round_value_cap", cfg.comms.round_value_cap}};
  j["policy"] = {{"mode", cfg.policy.mode},
                 {"central", cfg.policy.central},
                 {"use_priors", cfg.policy.use_priors},
                 {"p", cfg.policy.p},
                 {"replan_interval", cfg.policy.replan_interval},
                 {"alpha", cfg.policy.alpha},
                 {"beta", cfg.policy.beta},
                 {"gamma", cfg.policy.gamma},
                 {"lr", cfg.policy.lr},
                 {"clip", cfg.policy.clip},
                 {"entropy_coef", cfg.policy.entropy_coef},
                 {"ppo_epochs", cfg.policy.ppo_epochs},
                 {"normalize_advantages", cfg.policy.normalize_advantages},
                 {"arrival_tolerance", cfg.policy.arrival_tolerance},
                 {"pitch_sweep", cfg.policy.pitch_sweep}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"episodes_per_epoch", cfg.train.episodes_per_epoch},
                {"n_agents", cfg.train.n_agents},
                {"m_targets", cfg.train.m_targets},
                {"max_steps", cfg.train.max_steps},
                {"seed", cfg.train.seed},
                {"target_pool", cfg.train.target_pool}};
  j["suite"] = {{"n_list", cfg.suite.n_list},
                {"m_list", cfg.suite.m_list},
                {"seeds", cfg.suite.seeds},
                {"tasks_per_scene", cfg.suite.tasks_per_scene},
                {"task_seed", cfg.suite.task_seed},
                {"target_pool", cfg.suite.target_pool},
                {"known_fraction", cfg.suite.known_fraction},
                {"workers", cfg.suite.workers}};
  return j.dump(2) + "\n";
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot-open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json_string(ss.str());
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot-open: " + path);
  out << config_to_json_string(cfg);
}

void validate_config(const RunConfig& cfg) {
  auto bad = [](const std::string& field) {
    throw ConfigError("bad-field: " + field);
  };
  if (cfg.gen.count < 1) bad("gen.count");
  if (cfg.gen.l < 16 || cfg.gen.w < 16) bad("gen.l");
  if (cfg.gen.rooms < 1) bad("gen.rooms");
  if (cfg.gen.object_density <= 0.0) bad("gen.object_density");
  if (cfg.gen.category_count < 1) bad("gen.category_count");
  if (cfg.gen.spawn_count < 1) bad("gen.spawn_count");
  if (cfg.simulation.max_steps < 1) bad("simulation.max_steps");
  if (cfg.simulation.fov_deg <= 0.0 || cfg.simulation.fov_deg > 360.0)
    bad("simulation.fov_deg");
  if (cfg.simulation.ray_count < 2) bad("simulation.ray_count");
  if (cfg.simulation.max_range_m <= 0.0) bad("simulation.max_range_m");
  if (cfg.simulation.p_miss < 0.0 || cfg.simulation.p_miss > 1.0)
    bad("simulation.p_miss");
  if (cfg.simulation.p_confuse < 0.0 || cfg.simulation.p_confuse > 1.0)
    bad("simulation.p_confuse");
  if (cfg.simulation.depth_sigma < 0.0) bad("simulation.depth_sigma");
  if (cfg.comms.codec != "quantized" && cfg.comms.codec != "learned")
    bad("comms.codec");
  if (cfg.comms.budget_values < 1) bad("comms.budget_values");
  if (cfg.comms.reach_m < 0.0) bad("comms.reach_m");
  if (cfg.comms.send_interval < 1) bad("comms.send_interval");
  if (cfg.policy.mode != "greedy" && cfg.policy.mode != "learned" &&
      cfg.policy.mode != "random-subgoal" && cfg.policy.mode != "flat" &&
      cfg.policy.mode != "random")
    bad("policy.mode");
  if (cfg.policy.p < 1) bad("policy.p");
  if (cfg.policy.replan_interval < 1) bad("policy.replan_interval");
  if (cfg.policy.gamma < 0.0 || cfg.policy.gamma > 1.0) bad("policy.gamma");
  if (cfg.policy.lr <= 0.0) bad("policy.lr");
  if (cfg.policy.clip <= 0.0) bad("policy.clip");
  if (cfg.policy.ppo_epochs < 1) bad("policy.ppo_epochs");
  if (cfg.policy.arrival_tolerance < 0) bad("policy.arrival_tolerance");
  if (cfg.train.epochs < 0) bad("train.epochs");
  if (cfg.train.episodes_per_epoch < 1) bad("train.episodes_per_epoch");
  if (cfg.train.n_agents < 1 || cfg.train.n_agents > 5) bad("train.n_agents");
  if (cfg.train.m_targets < 1) bad("train.m_targets");
  if (cfg.train.max_steps < 1) bad("train.max_steps");
  if (cfg.train.target_pool != "all" && cfg.train.target_pool != "known" &&
      cfg.train.target_pool != "unknown")
    bad("train.target_pool");
  if (cfg.suite.n_list.empty()) bad("suite.n_list");
  for (int n : cfg.suite.n_list)
    if (n < 1 || n > 5) bad("suite.n_list");
  if (cfg.suite.m_list.empty()) bad("suite.m_list");
  for (int m : cfg.suite.m_list)
    if (m < 1 || m > 5) bad("suite.m_list");
  if (cfg.suite.seeds.empty()) bad("suite.seeds");
  if (cfg.suite.tasks_per_scene < 1) bad("suite.tasks_per_scene");
  if (cfg.suite.target_pool != "all" && cfg.suite.target_pool != "known" &&
      cfg.suite.target_pool != "unknown")
    bad("suite.target_pool");
  if (cfg.suite.known_fraction <= 0.0 || cfg.suite.known_fraction > 1.0)
    bad("suite.known_fraction");
  if (cfg.suite.workers < 1) bad("suite.workers");
}

EpisodeConfig episode_config_from(const RunConfig& cfg) {
  EpisodeConfig ec;
  ec.sensor.fov_deg = cfg.simulation.fov_deg;
  ec.sensor.ray_count = cfg.simulation.ray_count;
  ec.sensor.max_range = cfg.simulation.max_range_m;
  ec.noise.p_miss = cfg.simulation.p_miss;
  ec.noise.p_confuse = cfg.simulation.p_confuse;
  ec.noise.depth_sigma = cfg.simulation.depth_sigma;
  ec.max_steps = cfg.simulation.max_steps;
  ec.mode = agent_mode_from_name(cfg.policy.mode);
  ec.central = cfg.policy.central;
  ec.use_priors = cfg.policy.use_priors;
  ec.comms = cfg.comms.enabled;
  ec.map_send_interval = cfg.comms.send_interval;
  ec.round_value_cap = cfg.comms.round_value_cap;
  ec.comm_reach_m = cfg.comms.reach_m;
  ec.hp.p = cfg.policy.p;
  ec.hp.replan_interval = cfg.policy.replan_interval;
  ec.hp.alpha = cfg.policy.alpha;
  ec.hp.beta = cfg.policy.beta;
  ec.hp.gamma = cfg.policy.gamma;
  ec.hp.lr = cfg.policy.lr;
  ec.hp.clip = cfg.policy.clip;
  ec.hp.entropy_coef = cfg.policy.entropy_coef;
  ec.hp.ppo_epochs = cfg.policy.ppo_epochs;
  ec.hp.normalize_advantages = cfg.policy.normalize_advantages;
  ec.hp.arrival_tolerance = cfg.policy.arrival_tolerance;
  ec.hp.pitch_sweep = cfg.policy.pitch_sweep;
  return ec;
}

}  // namespace semnav
