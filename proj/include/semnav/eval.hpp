#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "semnav/comms.hpp"
#include "semnav/policy.hpp"
#include "semnav/priors.hpp"
#include "semnav/scene.hpp"

namespace semnav {

// How agents pick actions. The hierarchical modes share the sub-goal
// controller; random_actions samples uniformly from the whole action set
// (the classic do-nothing-smart baseline: its random Done stops agents
// early, so its success rate collapses as intended).
enum class AgentMode : uint8_t {
  greedy = 0,
  learned = 1,
  random_subgoal = 2,
  flat = 3,
  random_actions = 4,
};

const char* agent_mode_name(AgentMode m);
AgentMode agent_mode_from_name(const std::string& name);

struct EpisodeConfig {
  SensorParams sensor;
  NoiseParams noise;
  PolicyHyperparams hp;
  int max_steps = 500;
  AgentMode mode = AgentMode::greedy;
  bool central = false;      // one shared map, shared found set, claimed-cell handoff
  bool use_priors = true;    // related-category layer on/off
  bool comms = true;
  int map_send_interval = 5;  // rounds between map broadcasts per agent
  uint64_t round_value_cap = 1024;
  double comm_reach_m = 1.0;
};

struct EpisodeResult {
  std::string task_id;
  std::string scene_id;
  bool success = false;
  int d = 0;  // rounds until the last agent stopped (== max per-agent steps)
  int l_oracle = -1;  // filled by the benchmark layer; -1 when not computed
  std::vector<int> per_agent_steps;
  std::vector<std::tuple<int, int, int>> found_events;  // (category, agent, step)
  BandwidthLedger ledger;
  uint64_t seed = 0;
};

// Step-by-step record for rendering. Frame 0 is the initial configuration;
// frame t reflects the world after round t.
struct EpisodeTrace {
  std::string scene_id;
  std::string task_id;
  int l = 0, w = 0;
  std::vector<int> targets;
  struct Frame {
    std::vector<Pose> poses;
    std::vector<int> actions;    // executed this round; -1 for idle agents
    std::vector<Cell> subgoals;  // {-1,-1} when none
    std::vector<uint8_t> done;
  };
  std::vector<Frame> frames;
  std::vector<std::tuple<int, int, int>> found_events;
};

// Runs one episode: per round, every active agent observes, integrates its
// inbox, acts; then map messages are exchanged. policy may be null for the
// greedy / random modes. graph may be null (no prior knowledge). codec is
// required only when comms are on with two or more agents. records, when
// given, receives one DecisionRecord list per agent (learned/flat modes).
EpisodeResult run_episode(const Scene& scene, const TaskSpec& task,
                          const EpisodeConfig& cfg, const HighLevelPolicy* policy,
                          const PriorGraph* graph, const Codec* codec,
                          uint64_t seed, EpisodeTrace* trace = nullptr,
                          std::vector<std::vector<DecisionRecord>>* records = nullptr);

// Minimum rounds for the spawned team to find every target and stop:
// minimized over target-to-agent assignments and per-agent visit orders,
// with BFS movement on the true map (5-cell forward slides, unit-cost
// rotations), one step per Found, one Done per agent. Pitch changes are
// free here, which keeps the value a true lower bound on any episode.
// Returns kUnreachable when no assignment completes.
int32_t oracle_makespan(const Scene& scene, const TaskSpec& task,
                        const SensorParams& sensor);

double compute_sr(const std::vector<EpisodeResult>& results);
// Needs l_oracle set on every row.
double compute_spl(const std::vector<EpisodeResult>& results);
// Pairs rows by task_id; each pair where both runs succeeded contributes
// (E - D) / E with E the single-agent round count. Empty optional when no
// pair qualifies.
std::optional<double> compute_ei(const std::vector<EpisodeResult>& multi,
                                 const std::vector<EpisodeResult>& single);

struct VariantSpec {
  AgentMode mode = AgentMode::greedy;
  bool comms = true;
  bool priors = true;
  bool central = false;
  std::string label() const;
};

struct BenchmarkRequest {
  std::vector<Scene> scenes;
  std::vector<VariantSpec> variants;
  std::vector<int> n_list{1, 2, 3};
  std::vector<int> m_list{1};
  std::vector<uint64_t> seeds{1};
  int tasks_per_scene = 3;
  uint64_t task_seed = 7;       // fixes the task draw; run seeds vary the rest
  std::string target_pool = "all";  // all | known | unknown
  double known_fraction = 0.7;
  EpisodeConfig base;
  const HighLevelPolicy* policy = nullptr;
  const PriorGraph* graph = nullptr;
  const Codec* codec = nullptr;
  int workers = 1;
};

struct BenchmarkRow {
  EpisodeResult result;
  std::string variant;
  int n = 1, m = 1;
  uint64_t seed = 0;
  double spl_term = 0.0;
  double ei_term = 0.0;
  bool has_ei = false;
  bool failed_to_run = false;
  std::string error;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;  // sorted by (task_id, variant, N, seed)
};

// Runs every (task, variant, N, seed) cell. N=1 runs are always included
// so EI terms have their single-agent partner. Episodes may run on several
// worker threads; per-episode seeding keeps results identical either way.
BenchmarkReport run_benchmark(const BenchmarkRequest& req);

// The report table, one row per episode. Columns:
//   task_id, scene_id, variant, N, M, seed, success, D, L, spl_term,
//   ei_term, steps_agent_0..4, bandwidth_total, msgs_dropped, map_msgs,
//   found_msgs
// ei_term is empty for N=1 rows and pairs that did not qualify.
std::string report_to_csv(const BenchmarkReport& report);

struct SummaryRow {
  std::string variant;
  int n = 1;
  int tasks = 0;
  double sr = 0.0;
  double spl = 0.0;
  std::optional<double> ei;
};

std::vector<SummaryRow> summarize_report(const BenchmarkReport& report);

// First ceil(fraction * K) categories of the vocabulary, the "seen during
// training" target pool; the rest form the unseen pool.
std::vector<int> known_target_categories(int k_total, double fraction);

}  // namespace semnav
