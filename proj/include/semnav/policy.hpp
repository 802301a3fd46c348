#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "semnav/grid.hpp"
#include "semnav/perception.hpp"
#include "semnav/priors.hpp"
#include "semnav/rng.hpp"
#include "semnav/semantic_map.hpp"

namespace semnav {

// Discrete action set shared by agents, the environment, and the planners.
enum class Action : uint8_t {
  MoveAhead = 0,
  RotateRight = 1,
  RotateLeft = 2,
  LookUp = 3,
  LookDown = 4,
  Found = 5,
  Done = 6,
};
constexpr int kActionCount = 7;
// Movement primitives (the first five actions) form the flat policy's head.
constexpr int kMoveActionCount = 5;

const char* action_name(Action a);
Action action_from_name(const std::string& name);

// Fixed-length observation summary fed to the actor/critic heads.
//
// Layout, in order:
//   p*p blocks, each with (k_total + 4) channels:
//     categories 0..k_total-1, occupied, explored, target layer, related layer.
//     A block reports 1.0 when any covered cell has a positive count
//     (presence pooling), else 0.0.
//   4 pose scalars: x and y normalized by map extent, heading/360,
//     pitch index in {0,1,2} for {-30,0,+30}.
//   kActionCount one-hot of the previous action (all zero before the first).
struct FeatureVector {
  Eigen::VectorXd values;
};

int feature_dim(int k_total, int p);

FeatureVector fuse_features(const SemanticMap& map, const KeyObjectsMap& key,
                            const Pose& pose, int last_action, int p);

enum class PolicyVariant : uint8_t {
  learned = 0,         // actor picks a pooled block as the next sub-goal
  greedy = 1,          // nearest key object, else frontier
  random_subgoal = 2,  // uniform over explored free cells
  flat = 3,            // actor emits movement primitives directly
};

const char* policy_variant_name(PolicyVariant v);

struct PolicyHyperparams {
  int p = 16;                // pooling grid side
  int replan_interval = 10;  // steps between sub-goal decisions
  double alpha = 0.7;        // weight on target-distance progress
  double beta = 0.3;         // weight on key-object-distance progress
  double gamma = 0.99;
  double lr = 1e-4;
  double clip = 0.2;
  double entropy_coef = 0.0;
  int ppo_epochs = 4;
  bool normalize_advantages = true;
  int arrival_tolerance = 2;  // BFS cells; counts as sub-goal reached
  bool pitch_sweep = true;    // scan low/high bands before each decision
};

// Linear actor-critic. Small enough that one matrix per head keeps
// training deterministic and the update hand-checkable in tests.
class HighLevelPolicy {
 public:
  HighLevelPolicy() = default;
  HighLevelPolicy(PolicyVariant variant, int k_total, const PolicyHyperparams& hp,
                  uint64_t init_seed);

  PolicyVariant variant() const { return variant_; }
  const PolicyHyperparams& hyperparams() const { return hp_; }
  int k_total() const { return k_total_; }
  int output_count() const { return static_cast<int>(actor_w_.rows()); }
  int feature_count() const { return static_cast<int>(actor_w_.cols()); }

  // Actor logits for one feature vector.
  Eigen::VectorXd logits(const FeatureVector& f) const;
  // Critic estimate of the discounted return from this state.
  double value(const FeatureVector& f) const;

  // Samples an output index from the softmax; fills logprob of the pick.
  int sample(const FeatureVector& f, Rng& rng, double* logprob) const;

  Eigen::MatrixXd& actor_w() { return actor_w_; }
  Eigen::VectorXd& actor_b() { return actor_b_; }
  Eigen::VectorXd& critic_w() { return critic_w_; }
  double& critic_b() { return critic_b_; }
  const Eigen::MatrixXd& actor_w() const { return actor_w_; }
  const Eigen::VectorXd& actor_b() const { return actor_b_; }
  const Eigen::VectorXd& critic_w() const { return critic_w_; }
  double critic_b() const { return critic_b_; }

 private:
  PolicyVariant variant_ = PolicyVariant::greedy;
  PolicyHyperparams hp_;
  int k_total_ = 0;
  Eigen::MatrixXd actor_w_;  // outputs x features
  Eigen::VectorXd actor_b_;
  Eigen::VectorXd critic_w_;
  double critic_b_ = 0.0;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct SubGoal {
  Cell cell{0, 0};
  // Set when no explored free cell existed; cell falls back to the agent.
  bool fallback = false;
};

// Nearest explored, unoccupied cell to want by squared Euclidean distance,
// ties by smaller x then smaller y. Empty optional when none exists.
std::optional<Cell> snap_subgoal(const SemanticMap& map, Cell want);

struct ProposeContext {
  const SemanticMap* map = nullptr;
  const KeyObjectsMap* key = nullptr;
  Cell agent{0, 0};
  const FeatureVector* features = nullptr;  // required for learned variant
  // Cells claimed by lower-id agents this round; greedy skips them so a
  // centralized team divides targets instead of converging on one.
  const std::vector<Cell>* claimed = nullptr;
  // Key cells this agent already stood next to without a find; greedy
  // skips them so one stale map mark cannot pin the agent forever.
  const std::vector<Cell>* inspected = nullptr;
};

struct ProposeResult {
  SubGoal subgoal;
  Cell raw{0, 0};  // tier pick before snapping; what a teammate should avoid
  // Filled only by the learned variant, for training.
  int action_index = -1;
  double logprob = 0.0;
  double value = 0.0;
};

ProposeResult propose_subgoal(const HighLevelPolicy& policy,
                              const ProposeContext& ctx, Rng& rng);

// Progress reward for swapping sub-goal prev for next:
//   alpha * (d_target(prev) - d_target(next)) + beta * (d_key(prev) - d_key(next))
// A term contributes 0 when its field is empty (no goal cells) or either
// endpoint is unreachable.
double subgoal_reward(Cell next, Cell prev, const std::vector<int32_t>& dist_targets,
                      const std::vector<int32_t>& dist_key, int l, double alpha,
                      double beta);

struct PlanStep {
  bool arrived = false;       // within tolerance of the effective target
  Action action = Action::MoveAhead;
  Cell effective_target{0, 0};  // sub-goal, or nearest reachable stand-in
  bool unreachable = false;     // sub-goal itself had no path
};

// One step of shortest-path pursuit on the agent's believed map, planned
// over (cell, heading) states with the real motion model: one MoveAhead
// slides up to kMoveCells cells, rotations are quarter turns. Unknown cells
// count as free so early plans can cross unexplored space. Arrival means
// the agent's cell is within arrival_tolerance BFS cells of the sub-goal.
PlanStep plan_low_level(const SemanticMap& map, const Pose& pose, Cell subgoal,
                        int arrival_tolerance);

// --- per-agent controller ---------------------------------------------------

struct AgentState {
  int id = 0;
  Pose pose;
  SemanticMap* map = nullptr;  // owned by the episode; shared when centralized
  // Self-observed occupancy for path planning. Decoded teammate maps are
  // block-coarse, so merging them into `map` can paint free corridors shut;
  // plans trust only what this agent saw itself. Null falls back to `map`.
  SemanticMap* nav = nullptr;
  std::vector<int> found;      // categories this agent knows are found
  bool done = false;
  int steps = 0;
  int last_action = -1;

  std::optional<Cell> subgoal;
  Cell prev_subgoal{0, 0};  // reward baseline; agent spawn cell initially
  int steps_since_decision = 0;
  std::deque<Action> sweep_queue;
  bool swept = false;  // pitch sweep already ran for the pending decision
  std::optional<Cell> claimed_cell;  // pre-snap greedy pick, for team exclusion
  std::vector<Cell> inspected;  // key cells visited without a find
  bool arrived_pending = false;  // last sub-goal was actually reached
  int pending_found_category = -1;   // category named by an emitted Found
};

struct DecisionRecord {
  FeatureVector features;
  int action_index = -1;
  double logprob = 0.0;
  double value = 0.0;
  double reward = 0.0;
};

struct StepContext {
  const HighLevelPolicy* policy = nullptr;
  const std::vector<int>* targets = nullptr;  // task target categories
  const PriorGraph* graph = nullptr;          // null disables the related layer
  const PolicyHyperparams* hp = nullptr;
  const std::vector<Cell>* claimed = nullptr;  // centralized coordination
};

// Decides this step's action from the agent's belief. The caller has already
// merged inbox messages and projected the current observation into the map.
// Found and Done are emitted here by rule; sub-goal decisions and their
// rewards are appended to records when the variant is learned.
Action step_agent(AgentState& st, const Observation& obs, const StepContext& ctx,
                  Rng& rng, std::vector<DecisionRecord>* records);

// --- PPO --------------------------------------------------------------------

struct AdamState {
  Eigen::MatrixXd m_aw, v_aw;
  Eigen::VectorXd m_ab, v_ab, m_cw, v_cw;
  double m_cb = 0.0, v_cb = 0.0;
  int64_t t = 0;

  void init_like(const HighLevelPolicy& p);
};

struct PpoBatch {
  std::vector<FeatureVector> features;
  std::vector<int> actions;
  std::vector<double> logprobs;  // behavior policy log-probs
  std::vector<double> returns;   // discounted returns
  std::vector<double> values;    // critic values at collection time
};

// Discounted suffix sums of one episode's rewards.
std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       double gamma);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

// Clipped-surrogate update, full batch, hp.ppo_epochs passes, Adam steps.
PpoStats ppo_update(HighLevelPolicy& policy, AdamState& opt, const PpoBatch& batch);

// --- checkpoints --------------------------------------------------------------

struct TrainerState {
  AdamState adam;
  Rng::State rng;
  int epoch = 0;
  std::vector<double> return_trace;
};

std::string policy_to_blob(const HighLevelPolicy& p, const TrainerState* trainer);
HighLevelPolicy policy_from_blob(const std::string& blob, TrainerState* trainer);
void save_policy(const std::string& path, const HighLevelPolicy& p,
                 const TrainerState* trainer);
HighLevelPolicy load_policy(const std::string& path, TrainerState* trainer);

}  // namespace semnav
