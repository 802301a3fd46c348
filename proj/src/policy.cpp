#include "semnav/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "semnav/error.hpp"

namespace semnav {

const char* action_name(Action a) {
  switch (a) {
    case Action::MoveAhead: return "MoveAhead";
    case Action::RotateRight: return "RotateRight";
    case Action::RotateLeft: return "RotateLeft";
    case Action::LookUp: return "LookUp";
    case Action::LookDown: return "LookDown";
    case Action::Found: return "Found";
    case Action::Done: return "Done";
  }
  return "?";
}

Action action_from_name(const std::string& name) {
  for (int i = 0; i < kActionCount; ++i) {
    const auto a = static_cast<Action>(i);
    if (name == action_name(a)) return a;
  }
  throw std::invalid_argument("unknown-action: " + name);
}

const char* policy_variant_name(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::learned: return "learned";
    case PolicyVariant::greedy: return "greedy";
    case PolicyVariant::random_subgoal: return "random-subgoal";
    case PolicyVariant::flat: return "flat";
  }
  return "?";
}

int feature_dim(int k_total, int p) {
  if (k_total < 1 || p < 1) throw std::invalid_argument("bad-feature-dims");
  return p * p * (k_total + 4) + 4 + kActionCount;
}

FeatureVector fuse_features(const SemanticMap& map, const KeyObjectsMap& key,
                            const Pose& pose, int last_action, int p) {
  if (p < 1) throw std::invalid_argument("bad-pool-size");
  if (key.l != map.l() || key.w != map.w())
    throw std::invalid_argument("dims-mismatch");
  if (last_action < -1 || last_action >= kActionCount)
    throw std::invalid_argument("bad-last-action");
  const int l = map.l(), w = map.w(), k = map.k_total();
  const int ch = k + 4;
  FeatureVector out;
  out.values = Eigen::VectorXd::Zero(feature_dim(k, p));

  const int sx = (l + p - 1) / p;
  const int sy = (w + p - 1) / p;
  for (int y = 0; y < w; ++y) {
    const int by = y / sy;
    for (int x = 0; x < l; ++x) {
      const int bx = x / sx;
      const int base = (by * p + bx) * ch;
      if (map.any_counts(x, y)) {
        for (int c = 0; c < k; ++c)
          if (map.count(x, y, c) > 0) out.values[base + c] = 1.0;
        if (map.occupied(x, y)) out.values[base + k] = 1.0;
        if (map.explored(x, y)) out.values[base + k + 1] = 1.0;
      }
      if (key.target_at(x, y)) out.values[base + k + 2] = 1.0;
      if (key.related_at(x, y)) out.values[base + k + 3] = 1.0;
    }
  }
  const int pose_base = p * p * ch;
  out.values[pose_base + 0] = (pose.cell.x + 0.5) / l;
  out.values[pose_base + 1] = (pose.cell.y + 0.5) / w;
  out.values[pose_base + 2] = pose.heading / 360.0;
  out.values[pose_base + 3] = pose.pitch / 30 + 1;  // {-30,0,30} -> {0,1,2}
  if (last_action >= 0) out.values[pose_base + 4 + last_action] = 1.0;
  return out;
}

HighLevelPolicy::HighLevelPolicy(PolicyVariant variant, int k_total,
                                 const PolicyHyperparams& hp, uint64_t init_seed)
    : variant_(variant), hp_(hp), k_total_(k_total) {
  if (k_total < 1) throw std::invalid_argument("bad-category-count");
  if (hp.p < 1 || hp.replan_interval < 1 || hp.gamma < 0.0 || hp.gamma > 1.0 ||
      hp.lr <= 0.0 || hp.clip <= 0.0 || hp.ppo_epochs < 1 ||
      hp.arrival_tolerance < 0)
    throw std::invalid_argument("bad-hyperparams");
  // Greedy and random-sub-goal policies never query the heads; holding
  // no weights keeps their construction free.
  if (variant == PolicyVariant::greedy || variant == PolicyVariant::random_subgoal)
    return;
  const int feat = feature_dim(k_total, hp.p);
  const int out = variant == PolicyVariant::flat ? kMoveActionCount : hp.p * hp.p;
  Rng rng(mix_seed(init_seed, hash_str("policy-init")));
  actor_w_.resize(out, feat);
  for (int i = 0; i < out; ++i)
    for (int j = 0; j < feat; ++j)
      actor_w_(i, j) = 0.01 * rng.gaussian() / std::sqrt(static_cast<double>(feat));
  actor_b_ = Eigen::VectorXd::Zero(out);
  critic_w_ = Eigen::VectorXd::Zero(feat);
  for (int j = 0; j < feat; ++j)
    critic_w_[j] = 0.01 * rng.gaussian() / std::sqrt(static_cast<double>(feat));
  critic_b_ = 0.0;
}

Eigen::VectorXd HighLevelPolicy::logits(const FeatureVector& f) const {
  if (f.values.size() != actor_w_.cols())
    throw std::invalid_argument("feature-size-mismatch");
  return actor_w_ * f.values + actor_b_;
}

double HighLevelPolicy::value(const FeatureVector& f) const {
  if (f.values.size() != critic_w_.size())
    throw std::invalid_argument("feature-size-mismatch");
  return critic_w_.dot(f.values) + critic_b_;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw std::invalid_argument("empty-logits");
  Eigen::VectorXd z = logits.array() - logits.maxCoeff();
  Eigen::VectorXd e = z.array().exp();
  return e / e.sum();
}

int HighLevelPolicy::sample(const FeatureVector& f, Rng& rng, double* logprob) const {
  const Eigen::VectorXd probs = softmax(logits(f));
  const double u = rng.uniform01();
  double cum = 0.0;
  int pick = static_cast<int>(probs.size()) - 1;
  for (int i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) {
      pick = i;
      break;
    }
  }
  if (logprob) *logprob = std::log(std::max(probs[pick], 1e-300));
  return pick;
}

std::optional<Cell> snap_subgoal(const SemanticMap& map, Cell want) {
  std::optional<Cell> best;
  int64_t best_d = std::numeric_limits<int64_t>::max();
  for (int y = 0; y < map.w(); ++y) {
    for (int x = 0; x < map.l(); ++x) {
      if (!map.explored(x, y) || map.occupied(x, y)) continue;
      const int64_t dx = x - want.x, dy = y - want.y;
      const int64_t d = dx * dx + dy * dy;
      if (d < best_d || (d == best_d && best &&
                         (x < best->x || (x == best->x && y < best->y)))) {
        best_d = d;
        best = Cell{x, y};
      }
    }
  }
  return best;
}

namespace {

// Geodesic cost of standing at cell, allowing occupied candidates to be
// scored through a free 4-neighbor.
int32_t reach_cost(const SemanticMap& map, const std::vector<int32_t>& field,
                   Cell c) {
  const int idx = cell_index(c.x, c.y, map.l());
  if (!map.occupied(c.x, c.y)) return field[static_cast<size_t>(idx)];
  int32_t best = kUnreachable;
  const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  for (int i = 0; i < 4; ++i) {
    const int nx = c.x + dx[i], ny = c.y + dy[i];
    if (nx < 0 || ny < 0 || nx >= map.l() || ny >= map.w()) continue;
    if (map.occupied(nx, ny)) continue;
    const int32_t d = field[static_cast<size_t>(cell_index(nx, ny, map.l()))];
    if (d != kUnreachable && d + 1 < best) best = d + 1;
  }
  return best;
}

bool cell_less(Cell a, Cell b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

// Min reach-cost cell of a tier, ties broken toward smaller (x, y).
std::optional<Cell> pick_tier(const SemanticMap& map,
                              const std::vector<int32_t>& field,
                              const std::vector<Cell>& cells,
                              const std::vector<Cell>* claimed) {
  std::optional<Cell> best;
  int32_t best_d = kUnreachable;
  for (Cell c : cells) {
    if (claimed &&
        std::find(claimed->begin(), claimed->end(), c) != claimed->end())
      continue;
    const int32_t d = reach_cost(map, field, c);
    if (d == kUnreachable) continue;
    if (d < best_d || (d == best_d && best && cell_less(c, *best))) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::vector<Cell> frontier_cells(const SemanticMap& map) {
  std::vector<Cell> out;
  const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  for (int y = 0; y < map.w(); ++y) {
    for (int x = 0; x < map.l(); ++x) {
      if (!map.explored(x, y) || map.occupied(x, y)) continue;
      for (int i = 0; i < 4; ++i) {
        const int nx = x + dx[i], ny = y + dy[i];
        if (nx < 0 || ny < 0 || nx >= map.l() || ny >= map.w()) continue;
        if (!map.explored(nx, ny)) {
          out.push_back(Cell{x, y});
          break;
        }
      }
    }
  }
  return out;
}

std::optional<Cell> random_explored_free(const SemanticMap& map, Rng& rng) {
  std::vector<Cell> candidates;
  for (int y = 0; y < map.w(); ++y)
    for (int x = 0; x < map.l(); ++x)
      if (map.explored(x, y) && !map.occupied(x, y))
        candidates.push_back(Cell{x, y});
  if (candidates.empty()) return std::nullopt;
  return candidates[static_cast<size_t>(
      rng.below(static_cast<int>(candidates.size())))];
}

}  // namespace

ProposeResult propose_subgoal(const HighLevelPolicy& policy,
                              const ProposeContext& ctx, Rng& rng) {
  if (!ctx.map || !ctx.key) throw std::invalid_argument("missing-context");
  const SemanticMap& map = *ctx.map;
  if (ctx.agent.x < 0 || ctx.agent.y < 0 || ctx.agent.x >= map.l() ||
      ctx.agent.y >= map.w())
    throw std::invalid_argument("agent-out-of-bounds");

  ProposeResult res;
  res.raw = ctx.agent;

  switch (policy.variant()) {
    case PolicyVariant::flat:
      throw std::invalid_argument("flat-policy-has-no-subgoal");
    case PolicyVariant::learned: {
      if (!ctx.features) throw std::invalid_argument("missing-features");
      res.action_index = policy.sample(*ctx.features, rng, &res.logprob);
      res.value = policy.value(*ctx.features);
      const int p = policy.hyperparams().p;
      const int sx = (map.l() + p - 1) / p, sy = (map.w() + p - 1) / p;
      const int bx = res.action_index % p, by = res.action_index / p;
      res.raw = Cell{std::min(map.l() - 1, bx * sx + sx / 2),
                     std::min(map.w() - 1, by * sy + sy / 2)};
      break;
    }
    case PolicyVariant::greedy: {
      const std::vector<int32_t> field =
          distance_field(map, {ctx.agent});
      std::vector<Cell> excluded;
      if (ctx.claimed)
        excluded.insert(excluded.end(), ctx.claimed->begin(), ctx.claimed->end());
      if (ctx.inspected)
        excluded.insert(excluded.end(), ctx.inspected->begin(),
                        ctx.inspected->end());
      std::optional<Cell> pick =
          pick_tier(map, field, ctx.key->target_cells(), &excluded);
      if (!pick) pick = pick_tier(map, field, ctx.key->related_cells(), &excluded);
      // Frontier picks honor the exclusions too: a frontier whose unknown
      // side sits behind a wall never clears, so an inspected one must not
      // be chosen again.
      if (!pick) pick = pick_tier(map, field, frontier_cells(map), &excluded);
      // Tiers exhausted: wander to a random explored cell so the sweeps
      // at future decision points keep covering the low and high bands.
      if (!pick) pick = random_explored_free(map, rng);
      if (!pick) {
        res.subgoal = SubGoal{ctx.agent, true};
        return res;
      }
      res.raw = *pick;
      break;
    }
    case PolicyVariant::random_subgoal: {
      const std::optional<Cell> pick = random_explored_free(map, rng);
      if (!pick) {
        res.subgoal = SubGoal{ctx.agent, true};
        return res;
      }
      res.raw = *pick;
      break;
    }
  }

  const std::optional<Cell> snapped = snap_subgoal(map, res.raw);
  if (!snapped) {
    res.subgoal = SubGoal{ctx.agent, true};
    return res;
  }
  res.subgoal = SubGoal{*snapped, false};
  return res;
}

double subgoal_reward(Cell next, Cell prev, const std::vector<int32_t>& dist_targets,
                      const std::vector<int32_t>& dist_key, int l, double alpha,
                      double beta) {
  if (l < 1) throw std::invalid_argument("bad-width");
  auto term = [&](const std::vector<int32_t>& field) -> double {
    if (field.empty()) return 0.0;
    const auto pi = static_cast<size_t>(cell_index(prev.x, prev.y, l));
    const auto ni = static_cast<size_t>(cell_index(next.x, next.y, l));
    if (pi >= field.size() || ni >= field.size())
      throw std::invalid_argument("cell-out-of-field");
    const int32_t dp = field[pi], dn = field[ni];
    if (dp == kUnreachable || dn == kUnreachable) return 0.0;
    return static_cast<double>(dp) - static_cast<double>(dn);
  };
  return alpha * term(dist_targets) + beta * term(dist_key);
}

namespace {

// Landing cell for one MoveAhead from (cell, heading) on the believed map:
// up to kMoveCells steps along the heading over in-bounds, not-occupied
// cells (the same slide the world applies, with belief substituted for
// ground truth).
Cell slide_believed(const SemanticMap& map, Cell from, int heading) {
  const Cell d = heading_dir(heading);
  Cell at = from;
  for (int s = 0; s < kMoveCells; ++s) {
    const int nx = at.x + d.x, ny = at.y + d.y;
    if (nx < 0 || ny < 0 || nx >= map.l() || ny >= map.w()) break;
    if (map.occupied(nx, ny)) break;
    at = Cell{nx, ny};
  }
  return at;
}

}  // namespace

PlanStep plan_low_level(const SemanticMap& map, const Pose& pose, Cell subgoal,
                        int arrival_tolerance) {
  if (pose.cell.x < 0 || pose.cell.y < 0 || pose.cell.x >= map.l() ||
      pose.cell.y >= map.w())
    throw std::invalid_argument("pose-out-of-bounds");
  if (subgoal.x < 0 || subgoal.y < 0 || subgoal.x >= map.l() ||
      subgoal.y >= map.w())
    throw std::invalid_argument("subgoal-out-of-bounds");
  if (arrival_tolerance < 0) throw std::invalid_argument("bad-tolerance");

  PlanStep out;
  out.effective_target = subgoal;
  const int l = map.l(), w = map.w();

  // Arrival is measured in plain 4-neighbor BFS cells around the sub-goal.
  const std::vector<int32_t> cell_dist = distance_field(map, {subgoal});
  const int32_t here =
      cell_dist[static_cast<size_t>(cell_index(pose.cell.x, pose.cell.y, l))];
  if (here != kUnreachable && here <= arrival_tolerance) {
    out.arrived = true;
    return out;
  }

  // Shortest action sequence over (cell, heading) states with the real
  // motion model: rotations cost one step, MoveAhead slides up to five
  // cells. BFS from the agent, keeping the first action of each shortest
  // path; the goal is any state whose cell lies within tolerance.
  const int states = l * w * 4;
  std::vector<int32_t> dist(static_cast<size_t>(states), kUnreachable);
  std::vector<int8_t> first(static_cast<size_t>(states), -1);
  std::vector<int32_t> queue;
  queue.reserve(static_cast<size_t>(states));
  auto sidx = [l](Cell c, int heading) {
    return (c.y * l + c.x) * 4 + heading / 90;
  };
  const int start = sidx(pose.cell, pose.heading);
  dist[static_cast<size_t>(start)] = 0;
  queue.push_back(start);
  int goal_state = -1;
  for (size_t qi = 0; qi < queue.size() && goal_state < 0; ++qi) {
    const int s = queue[qi];
    const Cell at{(s / 4) % l, s / 4 / l};
    const int heading = (s % 4) * 90;
    const int32_t d = dist[static_cast<size_t>(s)];
    const int8_t via = first[static_cast<size_t>(s)];
    // Action preference fixes tie-breaks: straight, then right, then left.
    const Action acts[3] = {Action::MoveAhead, Action::RotateRight,
                            Action::RotateLeft};
    const int nexts[3] = {
        sidx(slide_believed(map, at, heading), heading),
        sidx(at, normalize_heading(heading - 90)),
        sidx(at, normalize_heading(heading + 90))};
    for (int e = 0; e < 3; ++e) {
      const int ns = nexts[e];
      if (ns == s || dist[static_cast<size_t>(ns)] != kUnreachable) continue;
      dist[static_cast<size_t>(ns)] = d + 1;
      first[static_cast<size_t>(ns)] =
          via >= 0 ? via : static_cast<int8_t>(acts[e]);
      const int32_t cd = cell_dist[static_cast<size_t>(ns / 4)];
      if (cd != kUnreachable && cd <= arrival_tolerance) {
        goal_state = ns;
        break;
      }
      queue.push_back(ns);
    }
  }
  if (goal_state >= 0) {
    out.action = static_cast<Action>(first[static_cast<size_t>(goal_state)]);
    return out;
  }

  // No slide path gets within tolerance: steer for the reachable cell
  // closest to the sub-goal (squared Euclidean, ties toward smaller x
  // then y) instead.
  out.unreachable = true;
  int64_t best_d = std::numeric_limits<int64_t>::max();
  Cell best = pose.cell;
  for (int s = 0; s < states; ++s) {
    if (dist[static_cast<size_t>(s)] == kUnreachable) continue;
    const Cell c{(s / 4) % l, s / 4 / l};
    const int64_t dx = c.x - subgoal.x, dy = c.y - subgoal.y;
    const int64_t d = dx * dx + dy * dy;
    if (d < best_d || (d == best_d && cell_less(c, best))) {
      best_d = d;
      best = c;
    }
  }
  out.effective_target = best;
  if (best == pose.cell) {
    out.arrived = true;
    return out;
  }
  int32_t bd = kUnreachable;
  int8_t ba = -1;
  for (int h = 0; h < 4; ++h) {
    const int s = sidx(best, h * 90);
    if (dist[static_cast<size_t>(s)] < bd) {
      bd = dist[static_cast<size_t>(s)];
      ba = first[static_cast<size_t>(s)];
    }
  }
  if (ba < 0) {
    out.arrived = true;  // only rotations separate us from the stand-in
    return out;
  }
  out.action = static_cast<Action>(ba);
  return out;
}

namespace {

std::vector<int> remaining_targets(const AgentState& st,
                                   const std::vector<int>& targets) {
  std::vector<int> out;
  for (int t : targets)
    if (std::find(st.found.begin(), st.found.end(), t) == st.found.end())
      out.push_back(t);
  return out;
}

}  // namespace

Action step_agent(AgentState& st, const Observation& obs, const StepContext& ctx,
                  Rng& rng, std::vector<DecisionRecord>* records) {
  if (!st.map || !ctx.targets || !ctx.hp) throw std::invalid_argument("missing-context");
  const SemanticMap& nav = st.nav ? *st.nav : *st.map;
  const PolicyHyperparams& hp = *ctx.hp;
  const SemanticMap& map = *st.map;
  const std::vector<int> remaining = remaining_targets(st, *ctx.targets);

  if (remaining.empty()) return Action::Done;

  // Claim a visible target first; everything else can wait a step.
  int found_cat = -1;
  double found_depth = std::numeric_limits<double>::max();
  for (const RayHit& ray : obs.rays) {
    if (ray.kind != HitKind::object || ray.category < 0) continue;
    if (ray.depth >= 1.0) continue;
    if (std::find(remaining.begin(), remaining.end(), ray.category) ==
        remaining.end())
      continue;
    if (ray.depth < found_depth ||
        (ray.depth == found_depth && ray.category < found_cat)) {
      found_depth = ray.depth;
      found_cat = ray.category;
    }
  }
  if (found_cat >= 0) {
    st.pending_found_category = found_cat;
    st.steps_since_decision += 1;
    return Action::Found;
  }

  const bool learned = ctx.policy && ctx.policy->variant() == PolicyVariant::learned;
  const bool flat = ctx.policy && ctx.policy->variant() == PolicyVariant::flat;

  static const PriorGraph kEmptyGraph;
  const PriorGraph& graph = ctx.graph ? *ctx.graph : kEmptyGraph;

  if (flat) {
    const KeyObjectsMap key = build_key_objects_map(map, remaining, graph);
    FeatureVector f = fuse_features(map, key, st.pose, st.last_action, hp.p);
    DecisionRecord rec;
    rec.action_index = ctx.policy->sample(f, rng, &rec.logprob);
    rec.value = ctx.policy->value(f);
    rec.features = std::move(f);
    const int picked = rec.action_index;
    if (records) records->push_back(std::move(rec));
    st.steps_since_decision += 1;
    return static_cast<Action>(picked);
  }

  if (!st.sweep_queue.empty()) {
    const Action a = st.sweep_queue.front();
    st.sweep_queue.pop_front();
    st.steps_since_decision += 1;
    return a;
  }

  bool due = !st.subgoal.has_value() || st.steps_since_decision >= hp.replan_interval;
  std::optional<PlanStep> plan;
  if (!due) {
    plan = plan_low_level(nav, st.pose, *st.subgoal, hp.arrival_tolerance);
    if (plan->arrived) {
      due = true;
      st.arrived_pending = true;
    }
  }

  if (due && hp.pitch_sweep && !st.swept) {
    // Scan the low and high bands before committing to a new sub-goal.
    st.sweep_queue = {Action::LookDown, Action::LookUp, Action::LookUp,
                      Action::LookDown};
    st.swept = true;
    const Action a = st.sweep_queue.front();
    st.sweep_queue.pop_front();
    st.steps_since_decision += 1;
    return a;
  }

  if (due) {
    const KeyObjectsMap key = build_key_objects_map(map, remaining, graph);
    // A sub-goal that was reached without a find is spent: remember it,
    // along with the key cells right next to it (the rest of the same
    // object, in practice), so the next pick moves on instead of
    // re-choosing the same spot.
    if (st.arrived_pending && st.claimed_cell) {
      std::vector<Cell> spent{*st.claimed_cell};
      for (const Cell& c : key.target_cells()) {
        const int64_t dx = c.x - st.claimed_cell->x, dy = c.y - st.claimed_cell->y;
        if (dx * dx + dy * dy <= 16) spent.push_back(c);
      }
      for (const Cell& c : key.related_cells()) {
        const int64_t dx = c.x - st.claimed_cell->x, dy = c.y - st.claimed_cell->y;
        if (dx * dx + dy * dy <= 16) spent.push_back(c);
      }
      for (const Cell& c : spent)
        if (std::find(st.inspected.begin(), st.inspected.end(), c) ==
            st.inspected.end())
          st.inspected.push_back(c);
    }
    st.arrived_pending = false;
    ProposeContext pctx;
    pctx.map = &map;
    pctx.key = &key;
    pctx.agent = st.pose.cell;
    pctx.claimed = ctx.claimed;
    pctx.inspected = &st.inspected;
    FeatureVector f;
    if (learned) {
      f = fuse_features(map, key, st.pose, st.last_action, hp.p);
      pctx.features = &f;
    }
    const ProposeResult prop = propose_subgoal(*ctx.policy, pctx, rng);

    // Learned decisions are recorded for training; random-sub-goal ones
    // carry only their reward, as the shaped-return baseline.
    const bool record_decision =
        records && (learned || ctx.policy->variant() == PolicyVariant::random_subgoal);
    if (record_decision) {
      std::vector<Cell> targets_cells = key.target_cells();
      std::vector<Cell> key_cells = targets_cells;
      const std::vector<Cell> related = key.related_cells();
      key_cells.insert(key_cells.end(), related.begin(), related.end());
      std::vector<int32_t> dist_targets, dist_key;
      if (!targets_cells.empty()) dist_targets = distance_field(map, targets_cells);
      if (!key_cells.empty()) dist_key = distance_field(map, key_cells);
      DecisionRecord rec;
      rec.features = std::move(f);
      rec.action_index = prop.action_index;
      rec.logprob = prop.logprob;
      rec.value = prop.value;
      rec.reward = subgoal_reward(prop.subgoal.cell, st.prev_subgoal, dist_targets,
                                  dist_key, map.l(), hp.alpha, hp.beta);
      records->push_back(std::move(rec));
    }

    st.subgoal = prop.subgoal.cell;
    st.prev_subgoal = prop.subgoal.cell;
    st.claimed_cell = prop.raw;
    st.swept = false;
    st.steps_since_decision = 0;
    plan = plan_low_level(nav, st.pose, *st.subgoal, hp.arrival_tolerance);
  }

  st.steps_since_decision += 1;
  if (plan->arrived) return Action::RotateRight;  // wait for the next decision
  return plan->action;
}

// --- PPO ---------------------------------------------------------------------

void AdamState::init_like(const HighLevelPolicy& p) {
  m_aw = Eigen::MatrixXd::Zero(p.actor_w().rows(), p.actor_w().cols());
  v_aw = m_aw;
  m_ab = Eigen::VectorXd::Zero(p.actor_b().size());
  v_ab = m_ab;
  m_cw = Eigen::VectorXd::Zero(p.critic_w().size());
  v_cw = m_cw;
  m_cb = v_cb = 0.0;
  t = 0;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards,
                                       double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("bad-gamma");
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    out[i] = acc;
  }
  return out;
}

namespace {

void adam_step_matrix(Eigen::MatrixXd& theta, const Eigen::MatrixXd& grad,
                      Eigen::MatrixXd& m, Eigen::MatrixXd& v, int64_t t,
                      double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1.0 - b1) * grad;
  v = b2 * v.array().matrix() + (1.0 - b2) * grad.array().square().matrix();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

void adam_step_vector(Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                      Eigen::VectorXd& m, Eigen::VectorXd& v, int64_t t,
                      double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1.0 - b1) * grad;
  v = b2 * v.array().matrix() + (1.0 - b2) * grad.array().square().matrix();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

void adam_step_scalar(double& theta, double grad, double& m, double& v, int64_t t,
                      double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1.0 - b1) * grad;
  v = b2 * v + (1.0 - b2) * grad * grad;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  theta -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
}

}  // namespace

PpoStats ppo_update(HighLevelPolicy& policy, AdamState& opt, const PpoBatch& batch) {
  const size_t n = batch.features.size();
  if (n == 0) throw std::invalid_argument("empty-batch");
  if (batch.actions.size() != n || batch.logprobs.size() != n ||
      batch.returns.size() != n || batch.values.size() != n)
    throw std::invalid_argument("batch-size-mismatch");
  const PolicyHyperparams& hp = policy.hyperparams();

  std::vector<double> adv(n);
  for (size_t i = 0; i < n; ++i) adv[i] = batch.returns[i] - batch.values[i];
  if (hp.normalize_advantages && n >= 2) {
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd > 1e-8)
      for (double& a : adv) a = (a - mean) / sd;
  }

  const int out = policy.output_count();
  const int feat = policy.feature_count();
  Eigen::MatrixXd fmat(feat, static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) {
    if (batch.features[i].values.size() != feat)
      throw std::invalid_argument("feature-size-mismatch");
    if (batch.actions[i] < 0 || batch.actions[i] >= out)
      throw std::invalid_argument("action-out-of-range");
    fmat.col(static_cast<Eigen::Index>(i)) = batch.features[i].values;
  }

  PpoStats stats;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int epoch = 0; epoch < hp.ppo_epochs; ++epoch) {
    Eigen::MatrixXd logit_mat =
        (policy.actor_w() * fmat).colwise() + policy.actor_b();
    Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(out, static_cast<Eigen::Index>(n));
    Eigen::VectorXd dvalue(static_cast<Eigen::Index>(n));
    stats = PpoStats{};

    for (size_t i = 0; i < n; ++i) {
      const Eigen::Index col = static_cast<Eigen::Index>(i);
      const Eigen::VectorXd probs = softmax(logit_mat.col(col));
      const int a = batch.actions[i];
      const double lp = std::log(std::max(probs[a], 1e-300));
      const double ratio = std::exp(lp - batch.logprobs[i]);
      const double advantage = adv[i];

      const bool clipped_out = (ratio > 1.0 + hp.clip && advantage > 0.0) ||
                               (ratio < 1.0 - hp.clip && advantage < 0.0);
      const double surrogate =
          std::min(ratio * advantage,
                   std::clamp(ratio, 1.0 - hp.clip, 1.0 + hp.clip) * advantage);
      stats.policy_loss -= surrogate * inv_n;

      double entropy = 0.0;
      for (int j = 0; j < out; ++j)
        if (probs[j] > 0.0) entropy -= probs[j] * std::log(probs[j]);
      stats.entropy += entropy * inv_n;

      Eigen::VectorXd grad_col = Eigen::VectorXd::Zero(out);
      if (!clipped_out) {
        // d(-ratio*A)/dlogits = -A*ratio*(onehot - probs)
        grad_col = advantage * ratio * probs;
        grad_col[a] -= advantage * ratio;
      }
      if (hp.entropy_coef > 0.0) {
        // d(-H)/dlogit_j = probs_j * (log probs_j + H)
        for (int j = 0; j < out; ++j) {
          const double pj = std::max(probs[j], 1e-300);
          grad_col[j] += hp.entropy_coef * probs[j] * (std::log(pj) + entropy);
        }
      }
      dlogits.col(col) = grad_col * inv_n;

      const double v = policy.critic_w().dot(fmat.col(col)) + policy.critic_b();
      const double verr = v - batch.returns[i];
      stats.value_loss += 0.5 * verr * verr * inv_n;
      dvalue[col] = verr * inv_n;  // d(0.5*err^2) = err
    }

    const Eigen::MatrixXd g_aw = dlogits * fmat.transpose();
    const Eigen::VectorXd g_ab = dlogits.rowwise().sum();
    const Eigen::VectorXd g_cw = fmat * dvalue;
    const double g_cb = dvalue.sum();

    opt.t += 1;
    adam_step_matrix(policy.actor_w(), g_aw, opt.m_aw, opt.v_aw, opt.t, hp.lr);
    adam_step_vector(policy.actor_b(), g_ab, opt.m_ab, opt.v_ab, opt.t, hp.lr);
    adam_step_vector(policy.critic_w(), g_cw, opt.m_cw, opt.v_cw, opt.t, hp.lr);
    adam_step_scalar(policy.critic_b(), g_cb, opt.m_cb, opt.v_cb, opt.t, hp.lr);
  }
  return stats;
}

// --- checkpoints ---------------------------------------------------------------

namespace {

template <typename T>
void put_raw(std::string& s, const T& v) {
  s.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_raw(const std::string& s, size_t& off) {
  if (off + sizeof(T) > s.size()) throw ParseError("bad-policy-blob: truncated");
  T v;
  std::memcpy(&v, s.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

void put_mat(std::string& s, const Eigen::MatrixXd& m) {
  put_raw<uint32_t>(s, static_cast<uint32_t>(m.rows()));
  put_raw<uint32_t>(s, static_cast<uint32_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) put_raw<double>(s, m(r, c));
}

Eigen::MatrixXd get_mat(const std::string& s, size_t& off) {
  const auto rows = get_raw<uint32_t>(s, off);
  const auto cols = get_raw<uint32_t>(s, off);
  if (static_cast<uint64_t>(rows) * cols > (1u << 28))
    throw ParseError("bad-policy-blob: oversized matrix");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = get_raw<double>(s, off);
  return m;
}

void put_vec(std::string& s, const Eigen::VectorXd& v) {
  put_raw<uint32_t>(s, static_cast<uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put_raw<double>(s, v[i]);
}

Eigen::VectorXd get_vec(const std::string& s, size_t& off) {
  const auto size = get_raw<uint32_t>(s, off);
  if (size > (1u << 28)) throw ParseError("bad-policy-blob: oversized vector");
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get_raw<double>(s, off);
  return v;
}

}  // namespace

std::string policy_to_blob(const HighLevelPolicy& p, const TrainerState* trainer) {
  std::string s;
  s.append("SNP1", 4);
  put_raw<uint8_t>(s, static_cast<uint8_t>(p.variant()));
  put_raw<uint32_t>(s, static_cast<uint32_t>(p.k_total()));
  const PolicyHyperparams& hp = p.hyperparams();
  put_raw<uint32_t>(s, static_cast<uint32_t>(hp.p));
  put_raw<uint32_t>(s, static_cast<uint32_t>(hp.replan_interval));
  put_raw<double>(s, hp.alpha);
  put_raw<double>(s, hp.beta);
  put_raw<double>(s, hp.gamma);
  put_raw<double>(s, hp.lr);
  put_raw<double>(s, hp.clip);
  put_raw<double>(s, hp.entropy_coef);
  put_raw<uint32_t>(s, static_cast<uint32_t>(hp.ppo_epochs));
  put_raw<uint8_t>(s, hp.normalize_advantages ? 1 : 0);
  put_raw<uint32_t>(s, static_cast<uint32_t>(hp.arrival_tolerance));
  put_raw<uint8_t>(s, hp.pitch_sweep ? 1 : 0);
  put_mat(s, p.actor_w());
  put_vec(s, p.actor_b());
  put_vec(s, p.critic_w());
  put_raw<double>(s, p.critic_b());
  put_raw<uint8_t>(s, trainer ? 1 : 0);
  if (trainer) {
    put_mat(s, trainer->adam.m_aw);
    put_mat(s, trainer->adam.v_aw);
    put_vec(s, trainer->adam.m_ab);
    put_vec(s, trainer->adam.v_ab);
    put_vec(s, trainer->adam.m_cw);
    put_vec(s, trainer->adam.v_cw);
    put_raw<double>(s, trainer->adam.m_cb);
    put_raw<double>(s, trainer->adam.v_cb);
    put_raw<int64_t>(s, trainer->adam.t);
    for (uint64_t word : trainer->rng.s) put_raw<uint64_t>(s, word);
    put_raw<uint8_t>(s, trainer->rng.has_spare);
    put_raw<double>(s, trainer->rng.spare);
    put_raw<uint32_t>(s, static_cast<uint32_t>(trainer->epoch));
    put_raw<uint32_t>(s, static_cast<uint32_t>(trainer->return_trace.size()));
    for (double r : trainer->return_trace) put_raw<double>(s, r);
  }
  return s;
}

HighLevelPolicy policy_from_blob(const std::string& blob, TrainerState* trainer) {
  if (blob.size() < 4 || blob.compare(0, 4, "SNP1") != 0)
    throw ParseError("bad-policy-blob: magic");
  size_t off = 4;
  const auto variant = get_raw<uint8_t>(blob, off);
  if (variant > 3) throw ParseError("bad-policy-blob: variant");
  const auto k_total = static_cast<int>(get_raw<uint32_t>(blob, off));
  PolicyHyperparams hp;
  hp.p = static_cast<int>(get_raw<uint32_t>(blob, off));
  hp.replan_interval = static_cast<int>(get_raw<uint32_t>(blob, off));
  hp.alpha = get_raw<double>(blob, off);
  hp.beta = get_raw<double>(blob, off);
  hp.gamma = get_raw<double>(blob, off);
  hp.lr = get_raw<double>(blob, off);
  hp.clip = get_raw<double>(blob, off);
  hp.entropy_coef = get_raw<double>(blob, off);
  hp.ppo_epochs = static_cast<int>(get_raw<uint32_t>(blob, off));
  hp.normalize_advantages = get_raw<uint8_t>(blob, off) != 0;
  hp.arrival_tolerance = static_cast<int>(get_raw<uint32_t>(blob, off));
  hp.pitch_sweep = get_raw<uint8_t>(blob, off) != 0;

  HighLevelPolicy p(static_cast<PolicyVariant>(variant), k_total, hp, 0);
  p.actor_w() = get_mat(blob, off);
  p.actor_b() = get_vec(blob, off);
  p.critic_w() = get_vec(blob, off);
  p.critic_b() = get_raw<double>(blob, off);
  if (p.actor_w().cols() != feature_dim(k_total, hp.p) ||
      p.actor_b().size() != p.actor_w().rows() ||
      p.critic_w().size() != p.actor_w().cols())
    throw ParseError("bad-policy-blob: matrix dims");

  const bool has_trainer = get_raw<uint8_t>(blob, off) != 0;
  if (has_trainer) {
    TrainerState ts;
    ts.adam.m_aw = get_mat(blob, off);
    ts.adam.v_aw = get_mat(blob, off);
    ts.adam.m_ab = get_vec(blob, off);
    ts.adam.v_ab = get_vec(blob, off);
    ts.adam.m_cw = get_vec(blob, off);
    ts.adam.v_cw = get_vec(blob, off);
    ts.adam.m_cb = get_raw<double>(blob, off);
    ts.adam.v_cb = get_raw<double>(blob, off);
    ts.adam.t = get_raw<int64_t>(blob, off);
    for (uint64_t& word : ts.rng.s) word = get_raw<uint64_t>(blob, off);
    ts.rng.has_spare = get_raw<uint8_t>(blob, off);
    ts.rng.spare = get_raw<double>(blob, off);
    ts.epoch = static_cast<int>(get_raw<uint32_t>(blob, off));
    const auto trace_len = get_raw<uint32_t>(blob, off);
    if (trace_len > (1u << 24)) throw ParseError("bad-policy-blob: trace");
    ts.return_trace.resize(trace_len);
    for (double& r : ts.return_trace) r = get_raw<double>(blob, off);
    if (trainer) *trainer = std::move(ts);
  } else if (trainer) {
    throw ParseError("bad-policy-blob: no trainer section");
  }
  if (off != blob.size()) throw ParseError("bad-policy-blob: trailing bytes");
  return p;
}

void save_policy(const std::string& path, const HighLevelPolicy& p,
                 const TrainerState* trainer) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot-open: " + path);
  const std::string blob = policy_to_blob(p, trainer);
  f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!f) throw ParseError("cannot-write: " + path);
}

HighLevelPolicy load_policy(const std::string& path, TrainerState* trainer) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot-open: " + path);
  std::string blob((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return policy_from_blob(blob, trainer);
}

}  // namespace semnav
