#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semnav/eval.hpp"
#include "semnav/scene.hpp"

namespace semnav {

// Everything a run needs, loadable from one JSON file. Field names in the
// file mirror the struct fields; unknown keys are rejected so typos fail
// loudly instead of silently keeping a default.
struct RunConfig {
  struct Paths {
    std::string scenes_dir = "scenes";
    std::string priors;      // prior-graph JSON; empty = derive from scenes
    std::string policy;      // policy checkpoint; empty = none
    std::string out_dir = "out";
  } paths;

  struct Gen {
    int count = 10;
    int l = 60, w = 60;
    int rooms = 3;
    double object_density = 1.1;
    int category_count = 10;
    int spawn_count = 8;
    uint64_t seed = 1;
  } gen;

  struct Simulation {
    int max_steps = 500;
    double fov_deg = 90.0;
    int ray_count = 61;
    double max_range_m = 5.0;
    double p_miss = 0.0;
    double p_confuse = 0.0;
    double depth_sigma = 0.0;
  } simulation;

  struct Comms {
    bool enabled = true;
    std::string codec = "quantized";  // quantized | learned
    int budget_values = 256;          // payload length v
    double reach_m = 1.0;
    int send_interval = 5;
    uint64_t round_value_cap = 1024;
  } comms;

  struct Policy {
    std::string mode = "greedy";  // greedy | learned | random-subgoal | flat | random
    bool central = false;
    bool use_priors = true;
    int p = 16;
    int replan_interval = 10;
    double alpha = 0.7;
    double beta = 0.3;
    double gamma = 0.99;
    double lr = 0.0001;
    double clip = 0.2;
    double entropy_coef = 0.0;
    int ppo_epochs = 4;
    bool normalize_advantages = true;
    int arrival_tolerance = 2;
    bool pitch_sweep = true;
  } policy;

  struct Train {
    int epochs = 40;
    int episodes_per_epoch = 4;
    int n_agents = 2;
    int m_targets = 1;
    int max_steps = 200;
    uint64_t seed = 1;
    std::string target_pool = "all";
  } train;

  struct Suite {
    std::vector<int> n_list{1, 2, 3};
    std::vector<int> m_list{1};
    std::vector<uint64_t> seeds{1};
    int tasks_per_scene = 3;
    uint64_t task_seed = 7;
    std::string target_pool = "all";
    double known_fraction = 0.7;
    int workers = 1;
  } suite;

  uint64_t seed = 1;  // top-level run seed; SEMNAV_SEED overrides
};

// Throws ConfigError naming the offending field for type errors, range
// errors, and unknown keys. Absent fields keep their defaults.
RunConfig config_from_json_string(const std::string& text);
std::string config_to_json_string(const RunConfig& cfg);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

// Range and cross-field checks shared by load and the CLI; throws
// ConfigError naming the field.
void validate_config(const RunConfig& cfg);

// EpisodeConfig assembled from the simulation/comms/policy sections.
EpisodeConfig episode_config_from(const RunConfig& cfg);

}  // namespace semnav
