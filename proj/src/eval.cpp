#include "semnav/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <thread>

#include "semnav/error.hpp"

namespace semnav {

const char* agent_mode_name(AgentMode m) {
  switch (m) {
    case AgentMode::greedy: return "greedy";
    case AgentMode::learned: return "learned";
    case AgentMode::random_subgoal: return "random-subgoal";
    case AgentMode::flat: return "flat";
    case AgentMode::random_actions: return "random";
  }
  return "?";
}

AgentMode agent_mode_from_name(const std::string& name) {
  for (int i = 0; i < 5; ++i) {
    const auto m = static_cast<AgentMode>(i);
    if (name == agent_mode_name(m)) return m;
  }
  throw std::invalid_argument("unknown-policy: " + name);
}

namespace {

PolicyVariant mode_to_variant(AgentMode m) {
  switch (m) {
    case AgentMode::learned: return PolicyVariant::learned;
    case AgentMode::random_subgoal: return PolicyVariant::random_subgoal;
    case AgentMode::flat: return PolicyVariant::flat;
    default: return PolicyVariant::greedy;
  }
}

// True-observation Found adjudication: nearest not-yet-found target hit
// within 1.0 m wins, ties to the smaller category id.
int adjudicate_found(const Observation& truth, const std::vector<int>& targets,
                     const std::vector<int>& already) {
  int best_cat = -1;
  double best_depth = std::numeric_limits<double>::max();
  for (const RayHit& ray : truth.rays) {
    if (ray.kind != HitKind::object || ray.category < 0) continue;
    if (ray.depth >= 1.0) continue;
    if (std::find(targets.begin(), targets.end(), ray.category) == targets.end())
      continue;
    if (std::find(already.begin(), already.end(), ray.category) != already.end())
      continue;
    if (ray.depth < best_depth ||
        (ray.depth == best_depth && ray.category < best_cat)) {
      best_depth = ray.depth;
      best_cat = ray.category;
    }
  }
  return best_cat;
}

}  // namespace

EpisodeResult run_episode(const Scene& scene, const TaskSpec& task,
                          const EpisodeConfig& cfg, const HighLevelPolicy* policy,
                          const PriorGraph* graph, const Codec* codec,
                          uint64_t seed, EpisodeTrace* trace,
                          std::vector<std::vector<DecisionRecord>>* records) {
  if (task.scene_id != scene.id)
    throw ConfigError("config-inconsistency: task-scene-mismatch");
  const int n = static_cast<int>(task.spawn_cells.size());
  if (n < 1 || task.spawn_headings.size() != task.spawn_cells.size())
    throw ConfigError("config-inconsistency: bad-spawns");
  if (task.targets.empty()) throw ConfigError("config-inconsistency: no-targets");
  const int k_total = static_cast<int>(scene.vocab.size());
  for (int t : task.targets)
    if (t < 0 || t >= k_total)
      throw ConfigError("config-inconsistency: target-out-of-vocab");
  for (Cell c : task.spawn_cells)
    if (!scene.free(c.x, c.y))
      throw ConfigError("config-inconsistency: spawn-not-free");
  if (cfg.max_steps < 1) throw ConfigError("config-inconsistency: max-steps");

  const bool mapless = cfg.mode == AgentMode::random_actions;
  const bool learned_mode =
      cfg.mode == AgentMode::learned || cfg.mode == AgentMode::flat;
  if (learned_mode && !policy)
    throw std::invalid_argument("missing-policy");
  const bool comms_active = cfg.comms && !cfg.central && n >= 2 && !mapless;
  if (comms_active && !codec) throw std::invalid_argument("missing-codec");
  if (comms_active &&
      (codec->l() != scene.l || codec->w() != scene.w || codec->k_total() != k_total))
    throw ConfigError("config-inconsistency: codec-dims");

  // Greedy and random-sub-goal agents need a policy object for its variant
  // tag only; build a weightless one when the caller passed none.
  HighLevelPolicy local_policy;
  const HighLevelPolicy* active_policy = policy;
  if (!mapless && !policy)
    active_policy = &(local_policy = HighLevelPolicy(mode_to_variant(cfg.mode),
                                                     k_total, cfg.hp, 0));

  SemanticMap shared_map(1, 1, 1);
  std::vector<std::unique_ptr<SemanticMap>> own_maps, nav_maps;
  if (!mapless && cfg.central) shared_map = SemanticMap(scene.l, scene.w, k_total);

  std::vector<AgentState> agents(static_cast<size_t>(n));
  std::vector<Rng> decision_rng, noise_rng;
  for (int i = 0; i < n; ++i) {
    AgentState& st = agents[static_cast<size_t>(i)];
    st.id = i;
    st.pose = Pose{task.spawn_cells[static_cast<size_t>(i)],
                   task.spawn_headings[static_cast<size_t>(i)], 0};
    st.prev_subgoal = st.pose.cell;
    if (!mapless) {
      if (cfg.central) {
        st.map = &shared_map;
        st.nav = &shared_map;  // nothing lossy ever lands in the shared map
      } else {
        own_maps.push_back(std::make_unique<SemanticMap>(scene.l, scene.w, k_total));
        st.map = own_maps.back().get();
        if (comms_active) {
          // Decoded teammate maps are merged into st.map; keep a clean
          // self-observed copy for planning and as the broadcast source.
          nav_maps.push_back(std::make_unique<SemanticMap>(scene.l, scene.w, k_total));
          st.nav = nav_maps.back().get();
        } else {
          st.nav = st.map;
        }
      }
    }
    decision_rng.emplace_back(mix_seed(seed, 200 + static_cast<uint64_t>(i)));
    noise_rng.emplace_back(mix_seed(seed, 300 + static_cast<uint64_t>(i)));
  }
  if (records) records->assign(static_cast<size_t>(n), {});

  EpisodeResult result;
  result.task_id = scene.id + "#" + std::to_string(task.seed);
  result.scene_id = scene.id;
  result.seed = seed;
  result.per_agent_steps.assign(static_cast<size_t>(n), 0);

  if (trace) {
    trace->scene_id = scene.id;
    trace->task_id = result.task_id;
    trace->l = scene.l;
    trace->w = scene.w;
    trace->targets = task.targets;
    trace->frames.clear();
    trace->found_events.clear();
    EpisodeTrace::Frame f0;
    for (const AgentState& st : agents) f0.poses.push_back(st.pose);
    f0.actions.assign(static_cast<size_t>(n), -1);
    f0.subgoals.assign(static_cast<size_t>(n), Cell{-1, -1});
    f0.done.assign(static_cast<size_t>(n), 0);
    trace->frames.push_back(std::move(f0));
  }

  std::vector<std::vector<Message>> inboxes(static_cast<size_t>(n));
  std::vector<std::vector<std::pair<int, int>>> pending_notices(
      static_cast<size_t>(n));

  bool all_done = false;
  for (int round = 1; round <= cfg.max_steps && !all_done; ++round) {
    std::vector<Observation> obs_true(static_cast<size_t>(n));
    std::vector<Observation> obs_belief(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      AgentState& st = agents[static_cast<size_t>(i)];
      if (st.done) continue;
      obs_true[static_cast<size_t>(i)] = observe(scene, st.pose, cfg.sensor);
      obs_belief[static_cast<size_t>(i)] =
          corrupt_segmentation(obs_true[static_cast<size_t>(i)], cfg.noise,
                               k_total, noise_rng[static_cast<size_t>(i)]);
    }

    std::vector<int> frame_actions(static_cast<size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
      AgentState& st = agents[static_cast<size_t>(i)];
      if (st.done) {
        inboxes[static_cast<size_t>(i)].clear();
        continue;
      }

      if (!mapless) {
        for (const Message& msg : inboxes[static_cast<size_t>(i)]) {
          if (msg.kind == MsgKind::map_vector) {
            st.map->merge_from(codec->decode(msg.payload));
          } else if (!msg.payload.empty()) {
            const int cat = static_cast<int>(msg.payload[0]);
            if (std::find(st.found.begin(), st.found.end(), cat) == st.found.end())
              st.found.push_back(cat);
          }
        }
        inboxes[static_cast<size_t>(i)].clear();
        st.map->project_observation(obs_belief[static_cast<size_t>(i)]);
        if (st.nav != st.map)
          st.nav->project_observation(obs_belief[static_cast<size_t>(i)]);
      }

      Action a;
      if (mapless) {
        a = static_cast<Action>(
            decision_rng[static_cast<size_t>(i)].below(kActionCount));
      } else {
        std::vector<Cell> claimed;
        if (cfg.central) {
          for (int j = 0; j < n; ++j) {
            const AgentState& other = agents[static_cast<size_t>(j)];
            if (j != i && !other.done && other.claimed_cell)
              claimed.push_back(*other.claimed_cell);
          }
        }
        StepContext ctx;
        ctx.policy = active_policy;
        ctx.targets = &task.targets;
        ctx.graph = cfg.use_priors ? graph : nullptr;
        ctx.hp = &cfg.hp;
        ctx.claimed = cfg.central ? &claimed : nullptr;
        a = step_agent(st, obs_belief[static_cast<size_t>(i)], ctx,
                       decision_rng[static_cast<size_t>(i)],
                       records ? &(*records)[static_cast<size_t>(i)] : nullptr);
      }

      // Per-step progress reward for the flat head, measured on the map the
      // decision used; filled after the move below.
      std::vector<int32_t> flat_targets_field, flat_key_field;
      Cell flat_prev = st.pose.cell;
      const bool flat_reward =
          cfg.mode == AgentMode::flat && records && a != Action::Done &&
          !(*records)[static_cast<size_t>(i)].empty();
      if (flat_reward) {
        std::vector<int> remaining;
        for (int t : task.targets)
          if (std::find(st.found.begin(), st.found.end(), t) == st.found.end())
            remaining.push_back(t);
        const KeyObjectsMap key = build_key_objects_map(
            *st.map, remaining,
            cfg.use_priors && graph ? *graph : PriorGraph{});
        std::vector<Cell> tc = key.target_cells();
        std::vector<Cell> kc = tc;
        const std::vector<Cell> rc = key.related_cells();
        kc.insert(kc.end(), rc.begin(), rc.end());
        if (!tc.empty()) flat_targets_field = distance_field(*st.map, tc);
        if (!kc.empty()) flat_key_field = distance_field(*st.map, kc);
      }

      switch (a) {
        case Action::MoveAhead: {
          const auto [dx, dy] = heading_dir(st.pose.heading);
          const Cell before = st.pose.cell;
          for (int s = 0; s < kMoveCells; ++s) {
            const int nx = st.pose.cell.x + dx, ny = st.pose.cell.y + dy;
            if (!scene.in_bounds(nx, ny) || !scene.free(nx, ny)) break;
            st.pose.cell = Cell{nx, ny};
          }
          // A bump against something the map calls free (an object below the
          // current pitch, say) would otherwise repeat forever; record the
          // blocker so the next plan routes around it.
          if (st.pose.cell == before && !mapless) {
            const int bx = before.x + dx, by = before.y + dy;
            if (scene.in_bounds(bx, by)) {
              st.map->add(bx, by, st.map->occupied_channel());
              st.map->add(bx, by, st.map->explored_channel());
              if (st.nav != st.map) {
                st.nav->add(bx, by, st.nav->occupied_channel());
                st.nav->add(bx, by, st.nav->explored_channel());
              }
            }
          }
          break;
        }
        case Action::RotateRight:
          st.pose.heading = normalize_heading(st.pose.heading - 90);
          break;
        case Action::RotateLeft:
          st.pose.heading = normalize_heading(st.pose.heading + 90);
          break;
        case Action::LookUp:
          st.pose.pitch = std::min(30, st.pose.pitch + 30);
          break;
        case Action::LookDown:
          st.pose.pitch = std::max(-30, st.pose.pitch - 30);
          break;
        case Action::Found: {
          const int cat = adjudicate_found(obs_true[static_cast<size_t>(i)],
                                           task.targets, st.found);
          if (cat >= 0) {
            if (cfg.central) {
              for (AgentState& other : agents)
                if (std::find(other.found.begin(), other.found.end(), cat) ==
                    other.found.end())
                  other.found.push_back(cat);
            } else {
              st.found.push_back(cat);
              if (comms_active) pending_notices[static_cast<size_t>(i)].push_back(
                  {cat, round});
            }
            result.found_events.emplace_back(cat, i, st.steps + 1);
            if (trace) trace->found_events.emplace_back(cat, i, st.steps + 1);
          }
          break;
        }
        case Action::Done:
          st.done = true;
          break;
      }
      st.steps += 1;
      st.last_action = static_cast<int>(a);
      st.pending_found_category = -1;
      frame_actions[static_cast<size_t>(i)] = static_cast<int>(a);

      if (flat_reward) {
        auto delta = [&](const std::vector<int32_t>& field) -> double {
          if (field.empty()) return 0.0;
          const int32_t dp =
              field[static_cast<size_t>(cell_index(flat_prev.x, flat_prev.y, scene.l))];
          const int32_t dn = field[static_cast<size_t>(
              cell_index(st.pose.cell.x, st.pose.cell.y, scene.l))];
          if (dp == kUnreachable || dn == kUnreachable) return 0.0;
          return static_cast<double>(dp) - static_cast<double>(dn);
        };
        (*records)[static_cast<size_t>(i)].back().reward =
            cfg.hp.alpha * delta(flat_targets_field) +
            cfg.hp.beta * delta(flat_key_field);
      }
    }

    all_done = std::all_of(agents.begin(), agents.end(),
                           [](const AgentState& st) { return st.done; });

    if (trace) {
      EpisodeTrace::Frame f;
      for (const AgentState& st : agents) f.poses.push_back(st.pose);
      f.actions = frame_actions;
      for (const AgentState& st : agents)
        f.subgoals.push_back(st.subgoal.value_or(Cell{-1, -1}));
      for (const AgentState& st : agents) f.done.push_back(st.done ? 1 : 0);
      trace->frames.push_back(std::move(f));
    }

    if (!all_done && comms_active) {
      std::vector<Outbox> outboxes(static_cast<size_t>(n));
      std::vector<Pose> poses;
      for (int i = 0; i < n; ++i) {
        const AgentState& st = agents[static_cast<size_t>(i)];
        poses.push_back(st.pose);
        if (st.done) continue;
        Outbox& ob = outboxes[static_cast<size_t>(i)];
        if (cfg.map_send_interval > 0 &&
            (round + i) % cfg.map_send_interval == 0) {
          ob.has_map = true;
          // Broadcast own evidence only; re-encoding merged maps would pile
          // decode artifacts on top of each other at every hop.
          ob.map_payload = codec->encode(*st.nav);
        }
        ob.notices = std::move(pending_notices[static_cast<size_t>(i)]);
        pending_notices[static_cast<size_t>(i)].clear();
      }
      inboxes = exchange(outboxes, poses, cfg.sensor, cfg.comm_reach_m,
                         cfg.round_value_cap, result.ledger);
    } else {
      for (auto& p : pending_notices) p.clear();
    }
  }

  for (int i = 0; i < n; ++i)
    result.per_agent_steps[static_cast<size_t>(i)] =
        agents[static_cast<size_t>(i)].steps;
  result.d = *std::max_element(result.per_agent_steps.begin(),
                               result.per_agent_steps.end());
  bool all_found = true;
  for (int t : task.targets) {
    bool hit = false;
    for (const auto& [cat, agent, step] : result.found_events)
      if (cat == t) hit = true;
    if (!hit) all_found = false;
  }
  result.success = all_done && all_found;
  return result;
}

// --- oracle -------------------------------------------------------------------

namespace {

struct OracleWorld {
  int l = 0, w = 0, states = 0;
  std::vector<uint8_t> free;      // per cell
  std::vector<int32_t> slide;     // per state: state after MoveAhead
};

int state_index(int x, int y, int heading, int l) {
  return (y * l + x) * 4 + heading / 90;
}

OracleWorld build_oracle_world(const Scene& scene) {
  OracleWorld ow;
  ow.l = scene.l;
  ow.w = scene.w;
  ow.states = scene.l * scene.w * 4;
  ow.free.assign(static_cast<size_t>(scene.l * scene.w), 0);
  for (int y = 0; y < scene.w; ++y)
    for (int x = 0; x < scene.l; ++x)
      ow.free[static_cast<size_t>(y * scene.l + x)] = scene.free(x, y) ? 1 : 0;
  ow.slide.assign(static_cast<size_t>(ow.states), -1);
  for (int y = 0; y < scene.w; ++y) {
    for (int x = 0; x < scene.l; ++x) {
      if (!ow.free[static_cast<size_t>(y * scene.l + x)]) continue;
      for (int h = 0; h < 360; h += 90) {
        const auto [dx, dy] = heading_dir(h);
        int cx = x, cy = y;
        for (int s = 0; s < kMoveCells; ++s) {
          const int nx = cx + dx, ny = cy + dy;
          if (nx < 0 || ny < 0 || nx >= scene.l || ny >= scene.w) break;
          if (!ow.free[static_cast<size_t>(ny * scene.l + nx)]) break;
          cx = nx;
          cy = ny;
        }
        ow.slide[static_cast<size_t>(state_index(x, y, h, scene.l))] =
            state_index(cx, cy, h, scene.l);
      }
    }
  }
  return ow;
}

// Dial-style unit-cost relaxation from per-state seed distances.
void relax_states(const OracleWorld& ow, std::vector<int32_t>& dist) {
  const int maxd = ow.states + 8;
  std::vector<std::vector<int32_t>> buckets(static_cast<size_t>(maxd + 2));
  for (int s = 0; s < ow.states; ++s)
    if (dist[static_cast<size_t>(s)] != kUnreachable &&
        dist[static_cast<size_t>(s)] <= maxd)
      buckets[static_cast<size_t>(dist[static_cast<size_t>(s)])].push_back(s);
  for (int d = 0; d <= maxd; ++d) {
    for (size_t qi = 0; qi < buckets[static_cast<size_t>(d)].size(); ++qi) {
      const int s = buckets[static_cast<size_t>(d)][qi];
      if (dist[static_cast<size_t>(s)] != d) continue;
      const int cell = s / 4;
      const int h = (s % 4) * 90;
      const int x = cell % ow.l, y = cell / ow.l;
      const int next[3] = {state_index(x, y, normalize_heading(h - 90), ow.l),
                           state_index(x, y, normalize_heading(h + 90), ow.l),
                           ow.slide[static_cast<size_t>(s)]};
      for (int ns : next) {
        if (ns < 0 || ns == s) continue;
        if (d + 1 < dist[static_cast<size_t>(ns)]) {
          dist[static_cast<size_t>(ns)] = d + 1;
          if (d + 1 <= maxd) buckets[static_cast<size_t>(d + 1)].push_back(ns);
        }
      }
    }
    buckets[static_cast<size_t>(d)].clear();
  }
}

// States from which the success rule for category cat holds at some pitch.
std::vector<uint8_t> success_states(const Scene& scene, const OracleWorld& ow,
                                    int cat, const SensorParams& sensor) {
  std::vector<uint8_t> suc(static_cast<size_t>(ow.states), 0);
  std::vector<Cell> instance_cells;
  std::set<int> pitches;
  for (const ObjectInstance& o : scene.objects) {
    if (o.category != cat) continue;
    pitches.insert(band_pitch(o.band));
    for (Cell c : o.footprint) instance_cells.push_back(c);
  }
  if (instance_cells.empty()) return suc;
  // 1.0 m is exactly 20 cells; only cells strictly inside can qualify.
  constexpr int64_t kRadius2 = 400;
  // Only sub-meter hits matter, so the scan never needs longer rays.
  SensorParams near_sensor = sensor;
  near_sensor.max_range = std::min(sensor.max_range, 1.0);
  for (int y = 0; y < ow.w; ++y) {
    for (int x = 0; x < ow.l; ++x) {
      if (!ow.free[static_cast<size_t>(y * ow.l + x)]) continue;
      bool near = false;
      for (Cell c : instance_cells) {
        const int64_t dx = c.x - x, dy = c.y - y;
        if (dx * dx + dy * dy < kRadius2) {
          near = true;
          break;
        }
      }
      if (!near) continue;
      for (int h = 0; h < 360; h += 90) {
        bool ok = false;
        for (int pitch : pitches) {
          const Observation obs =
              observe(scene, Pose{Cell{x, y}, h, pitch}, near_sensor);
          for (const RayHit& ray : obs.rays) {
            if (ray.kind == HitKind::object && ray.category == cat &&
                ray.depth < 1.0) {
              ok = true;
              break;
            }
          }
          if (ok) break;
        }
        if (ok) suc[static_cast<size_t>(state_index(x, y, h, ow.l))] = 1;
      }
    }
  }
  return suc;
}

}  // namespace

int32_t oracle_makespan(const Scene& scene, const TaskSpec& task,
                        const SensorParams& sensor) {
  const int n = static_cast<int>(task.spawn_cells.size());
  const int m = static_cast<int>(task.targets.size());
  if (m < 1 || m > 6 || n < 1 || n > 5)
    throw std::invalid_argument("instance-too-large");
  if (task.scene_id != scene.id)
    throw std::invalid_argument("task-scene-mismatch");
  for (Cell c : task.spawn_cells)
    if (!scene.free(c.x, c.y)) throw std::invalid_argument("spawn-not-free");

  const OracleWorld ow = build_oracle_world(scene);
  std::vector<std::vector<uint8_t>> suc;
  for (int t : task.targets) suc.push_back(success_states(scene, ow, t, sensor));

  const int masks = 1 << m;
  // cost[a][mask] = fewest rounds for agent a to find every target in mask
  // and stop (its Done included).
  std::vector<std::vector<int32_t>> cost(static_cast<size_t>(n));
  for (int a = 0; a < n; ++a) {
    std::vector<std::vector<int32_t>> dist(
        static_cast<size_t>(masks),
        std::vector<int32_t>(static_cast<size_t>(ow.states), kUnreachable));
    const Cell spawn = task.spawn_cells[static_cast<size_t>(a)];
    dist[0][static_cast<size_t>(state_index(
        spawn.x, spawn.y, task.spawn_headings[static_cast<size_t>(a)], ow.l))] = 0;
    relax_states(ow, dist[0]);
    for (int mask = 1; mask < masks; ++mask) {
      std::vector<int32_t>& cur = dist[static_cast<size_t>(mask)];
      for (int b = 0; b < m; ++b) {
        if (!(mask & (1 << b))) continue;
        const std::vector<int32_t>& prev = dist[static_cast<size_t>(mask ^ (1 << b))];
        const std::vector<uint8_t>& sb = suc[static_cast<size_t>(b)];
        for (int s = 0; s < ow.states; ++s) {
          if (!sb[static_cast<size_t>(s)]) continue;
          const int32_t p = prev[static_cast<size_t>(s)];
          if (p != kUnreachable && p + 1 < cur[static_cast<size_t>(s)])
            cur[static_cast<size_t>(s)] = p + 1;  // the Found step
        }
      }
      relax_states(ow, cur);
    }
    cost[static_cast<size_t>(a)].assign(static_cast<size_t>(masks), kUnreachable);
    for (int mask = 0; mask < masks; ++mask) {
      int32_t best = kUnreachable;
      for (int s = 0; s < ow.states; ++s)
        best = std::min(best, dist[static_cast<size_t>(mask)][static_cast<size_t>(s)]);
      if (best != kUnreachable)
        cost[static_cast<size_t>(a)][static_cast<size_t>(mask)] = best + 1;  // Done
    }
  }

  // Assign each target to an agent; makespan is the slowest agent.
  int32_t best = kUnreachable;
  std::vector<int> owner(static_cast<size_t>(m), 0);
  while (true) {
    std::vector<int> agent_mask(static_cast<size_t>(n), 0);
    for (int b = 0; b < m; ++b)
      agent_mask[static_cast<size_t>(owner[static_cast<size_t>(b)])] |= 1 << b;
    int32_t makespan = 0;
    for (int a = 0; a < n && makespan != kUnreachable; ++a) {
      const int32_t c = cost[static_cast<size_t>(a)]
                            [static_cast<size_t>(agent_mask[static_cast<size_t>(a)])];
      makespan = c == kUnreachable ? kUnreachable : std::max(makespan, c);
    }
    if (makespan != kUnreachable) best = std::min(best, makespan);
    int b = 0;
    while (b < m && owner[static_cast<size_t>(b)] == n - 1) {
      owner[static_cast<size_t>(b)] = 0;
      ++b;
    }
    if (b == m) break;
    owner[static_cast<size_t>(b)] += 1;
  }
  return best;
}

// --- metrics ------------------------------------------------------------------

double compute_sr(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw std::invalid_argument("empty-input");
  double s = 0.0;
  for (const auto& r : results) s += r.success ? 1.0 : 0.0;
  return s / static_cast<double>(results.size());
}

namespace {

double spl_term_of(const EpisodeResult& r) {
  if (r.l_oracle < 0) throw std::invalid_argument("missing-oracle");
  if (!r.success || r.l_oracle == kUnreachable) return 0.0;
  const double l = static_cast<double>(r.l_oracle);
  const double d = static_cast<double>(std::max(r.d, r.l_oracle));
  return d > 0.0 ? l / d : 0.0;
}

}  // namespace

double compute_spl(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw std::invalid_argument("empty-input");
  double s = 0.0;
  for (const auto& r : results) s += spl_term_of(r);
  return s / static_cast<double>(results.size());
}

std::optional<double> compute_ei(const std::vector<EpisodeResult>& multi,
                                 const std::vector<EpisodeResult>& single) {
  std::map<std::string, const EpisodeResult*> by_task;
  for (const auto& r : single) by_task[r.task_id] = &r;
  double sum = 0.0;
  int qualifying = 0;
  for (const auto& r : multi) {
    const auto it = by_task.find(r.task_id);
    if (it == by_task.end()) throw std::invalid_argument("unpaired-task");
    const EpisodeResult& s = *it->second;
    if (!r.success || !s.success) continue;
    const double e = static_cast<double>(s.d);
    if (e <= 0.0) continue;
    sum += (e - static_cast<double>(r.d)) / e;
    qualifying += 1;
  }
  if (qualifying == 0) return std::nullopt;
  return sum / qualifying;
}

// --- benchmark ----------------------------------------------------------------

std::string VariantSpec::label() const {
  std::string s = agent_mode_name(mode);
  if (central) s += "+central";
  if (!comms) s += "-nocomm";
  if (!priors) s += "-nopriors";
  return s;
}

std::vector<int> known_target_categories(int k_total, double fraction) {
  if (k_total < 1 || fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("bad-split");
  const int count = std::min(
      k_total, static_cast<int>(std::ceil(fraction * static_cast<double>(k_total))));
  std::vector<int> out;
  for (int i = 0; i < count; ++i) out.push_back(i);
  return out;
}

namespace {

struct SuiteTask {
  int scene_idx = 0;
  TaskSpec task;       // spawns sized for the largest N
  std::string task_id;
  int m = 1;
};

TaskSpec restrict_agents(const TaskSpec& task, int n) {
  TaskSpec t = task;
  t.spawn_cells.resize(static_cast<size_t>(n));
  t.spawn_headings.resize(static_cast<size_t>(n));
  return t;
}

struct Job {
  int task_idx;
  int variant_idx;
  int n;
  uint64_t seed;
};

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkRequest& req) {
  if (req.scenes.empty()) throw std::invalid_argument("empty-suite: scenes");
  if (req.variants.empty()) throw std::invalid_argument("empty-suite: variants");
  if (req.n_list.empty() || req.m_list.empty() || req.seeds.empty())
    throw std::invalid_argument("empty-suite: sweep");
  if (req.tasks_per_scene < 1) throw std::invalid_argument("empty-suite: tasks");

  const int k_total = static_cast<int>(req.scenes[0].vocab.size());
  std::vector<int> pool;
  const std::vector<int>* pool_ptr = nullptr;
  if (req.target_pool == "known") {
    pool = known_target_categories(k_total, req.known_fraction);
    pool_ptr = &pool;
  } else if (req.target_pool == "unknown") {
    const std::vector<int> known = known_target_categories(k_total, req.known_fraction);
    for (int c = 0; c < k_total; ++c)
      if (std::find(known.begin(), known.end(), c) == known.end()) pool.push_back(c);
    pool_ptr = &pool;
  } else if (req.target_pool != "all") {
    throw std::invalid_argument("bad-target-pool: " + req.target_pool);
  }

  std::vector<int> n_values = req.n_list;
  if (std::find(n_values.begin(), n_values.end(), 1) == n_values.end())
    n_values.push_back(1);  // EI needs the single-agent partner
  std::sort(n_values.begin(), n_values.end());
  n_values.erase(std::unique(n_values.begin(), n_values.end()), n_values.end());
  const int n_max = n_values.back();
  for (int nv : n_values)
    if (nv < 1 || nv > 5) throw std::invalid_argument("bad-agent-count");

  // Fixed task draw: re-sample a task until its single-agent oracle is
  // finite, so every suite task is actually solvable.
  std::vector<SuiteTask> tasks;
  int auto_idx = 0;
  for (size_t si = 0; si < req.scenes.size(); ++si) {
    const Scene& scene = req.scenes[si];
    for (int t = 0; t < req.tasks_per_scene; ++t, ++auto_idx) {
      const int m = req.m_list[static_cast<size_t>(auto_idx) % req.m_list.size()];
      TaskSpec picked;
      bool ok = false;
      for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
        const uint64_t ts = mix_seed(mix_seed(req.task_seed, hash_str(scene.id)),
                                     static_cast<uint64_t>(t * 100 + attempt));
        TaskSpec cand = sample_task(scene, m, n_max, ts, pool_ptr);
        if (oracle_makespan(scene, restrict_agents(cand, 1), req.base.sensor) !=
            kUnreachable) {
          picked = cand;
          ok = true;
        }
      }
      if (!ok) throw GenerationFailure("task-generation-exhausted: " + scene.id);
      SuiteTask st;
      st.scene_idx = static_cast<int>(si);
      st.task = picked;
      st.task_id = scene.id + "-t" + std::to_string(auto_idx);
      st.m = m;
      tasks.push_back(std::move(st));
    }
  }

  // Oracle L depends on the spawn set, so cache it per (task, N).
  std::map<std::pair<int, int>, int32_t> oracle_cache;
  for (size_t ti = 0; ti < tasks.size(); ++ti)
    for (int nv : n_values)
      oracle_cache[{static_cast<int>(ti), nv}] =
          oracle_makespan(req.scenes[static_cast<size_t>(tasks[ti].scene_idx)],
                          restrict_agents(tasks[ti].task, nv), req.base.sensor);

  std::vector<Job> jobs;
  for (size_t ti = 0; ti < tasks.size(); ++ti)
    for (size_t vi = 0; vi < req.variants.size(); ++vi)
      for (int nv : n_values)
        for (uint64_t seed : req.seeds)
          jobs.push_back(Job{static_cast<int>(ti), static_cast<int>(vi), nv, seed});

  std::vector<BenchmarkRow> rows(jobs.size());
  auto run_job = [&](size_t ji) {
    const Job& job = jobs[ji];
    const SuiteTask& st = tasks[static_cast<size_t>(job.task_idx)];
    const VariantSpec& vs = req.variants[static_cast<size_t>(job.variant_idx)];
    BenchmarkRow& row = rows[ji];
    row.variant = vs.label();
    row.n = job.n;
    row.m = st.m;
    row.seed = job.seed;
    try {
      EpisodeConfig cfg = req.base;
      cfg.mode = vs.mode;
      cfg.comms = req.base.comms && vs.comms;
      cfg.use_priors = req.base.use_priors && vs.priors;
      cfg.central = vs.central;
      const uint64_t ep_seed =
          mix_seed(mix_seed(mix_seed(job.seed, hash_str(st.task_id)),
                            hash_str(row.variant)),
                   static_cast<uint64_t>(job.n));
      row.result = run_episode(req.scenes[static_cast<size_t>(st.scene_idx)],
                               restrict_agents(st.task, job.n), cfg, req.policy,
                               req.graph, req.codec, ep_seed);
      row.result.task_id = st.task_id;
      row.result.l_oracle = oracle_cache[{job.task_idx, job.n}];
      row.spl_term = spl_term_of(row.result);
    } catch (const std::exception& e) {
      row.failed_to_run = true;
      row.error = e.what();
      row.result.task_id = st.task_id;
      row.result.scene_id = req.scenes[static_cast<size_t>(st.scene_idx)].id;
      row.result.seed = job.seed;
    }
  };

  if (req.workers <= 1) {
    for (size_t ji = 0; ji < jobs.size(); ++ji) run_job(ji);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < req.workers; ++t)
      threads.emplace_back([&]() {
        for (size_t ji = next.fetch_add(1); ji < jobs.size();
             ji = next.fetch_add(1))
          run_job(ji);
      });
    for (auto& th : threads) th.join();
  }

  // EI terms come from the N=1 row with the same task, variant, and seed.
  std::map<std::tuple<std::string, std::string, uint64_t>, const BenchmarkRow*>
      singles;
  for (const BenchmarkRow& row : rows)
    if (row.n == 1 && !row.failed_to_run)
      singles[{row.result.task_id, row.variant, row.seed}] = &row;
  for (BenchmarkRow& row : rows) {
    if (row.n == 1 || row.failed_to_run) continue;
    const auto it = singles.find({row.result.task_id, row.variant, row.seed});
    if (it == singles.end()) continue;
    const BenchmarkRow& s = *it->second;
    if (row.result.success && s.result.success && s.result.d > 0) {
      row.ei_term = (static_cast<double>(s.result.d) -
                     static_cast<double>(row.result.d)) /
                    static_cast<double>(s.result.d);
      row.has_ei = true;
    }
  }

  std::sort(rows.begin(), rows.end(),
            [](const BenchmarkRow& a, const BenchmarkRow& b) {
              return std::tie(a.result.task_id, a.variant, a.n, a.seed) <
                     std::tie(b.result.task_id, b.variant, b.n, b.seed);
            });
  BenchmarkReport report;
  report.rows = std::move(rows);
  return report;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string report_to_csv(const BenchmarkReport& report) {
  std::string out =
      "task_id,scene_id,variant,N,M,seed,success,D,L,spl_term,ei_term,"
      "steps_agent_0,steps_agent_1,steps_agent_2,steps_agent_3,steps_agent_4,"
      "bandwidth_total,msgs_dropped,map_msgs,found_msgs\n";
  for (const BenchmarkRow& row : report.rows) {
    const EpisodeResult& r = row.result;
    out += r.task_id + "," + r.scene_id + "," + row.variant + "," +
           std::to_string(row.n) + "," + std::to_string(row.m) + "," +
           std::to_string(row.seed) + ",";
    out += (r.success ? "1" : "0");
    out += "," + std::to_string(r.d) + ",";
    out += (r.l_oracle == kUnreachable ? std::string("-1")
                                       : std::to_string(r.l_oracle));
    out += "," + fmt_double(row.spl_term) + ",";
    if (row.has_ei) out += fmt_double(row.ei_term);
    for (int i = 0; i < 5; ++i) {
      out += ",";
      out += i < static_cast<int>(r.per_agent_steps.size())
                 ? std::to_string(r.per_agent_steps[static_cast<size_t>(i)])
                 : "0";
    }
    out += "," + std::to_string(r.ledger.total_values_sent);
    out += "," + std::to_string(r.ledger.dropped_msgs);
    out += "," + std::to_string(r.ledger.map_msgs);
    out += "," + std::to_string(r.ledger.found_msgs);
    out += "\n";
  }
  return out;
}

std::vector<SummaryRow> summarize_report(const BenchmarkReport& report) {
  std::map<std::pair<std::string, int>, SummaryRow> acc;
  std::map<std::pair<std::string, int>, std::pair<double, int>> ei_acc;
  for (const BenchmarkRow& row : report.rows) {
    if (row.failed_to_run) continue;
    SummaryRow& s = acc[{row.variant, row.n}];
    s.variant = row.variant;
    s.n = row.n;
    s.tasks += 1;
    s.sr += row.result.success ? 1.0 : 0.0;
    s.spl += row.spl_term;
    if (row.has_ei) {
      auto& [sum, count] = ei_acc[{row.variant, row.n}];
      sum += row.ei_term;
      count += 1;
    }
  }
  std::vector<SummaryRow> out;
  for (auto& [key, s] : acc) {
    if (s.tasks > 0) {
      s.sr /= s.tasks;
      s.spl /= s.tasks;
    }
    const auto it = ei_acc.find(key);
    if (it != ei_acc.end() && it->second.second > 0)
      s.ei = it->second.first / it->second.second;
    out.push_back(s);
  }
  return out;
}

}  // namespace semnav
