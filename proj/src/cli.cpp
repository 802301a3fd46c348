#include "semnav/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "semnav/config.hpp"
#include "semnav/error.hpp"
#include "semnav/eval.hpp"
#include "semnav/replay.hpp"
#include "semnav/train.hpp"

namespace semnav {

namespace fs = std::filesystem;
using nlohmann::json;

void save_manifest(const SceneSet& set, const std::string& dir) {
  json j;
  j["vocab"] = set.vocab;
  j["scenes"] = set.files;
  j["seed"] = set.seed;
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!out) throw ConfigError("cannot-open: " + dir + "/manifest.json");
  out << j.dump(2) << "\n";
}

SceneSet load_manifest(const std::string& dir) {
  const fs::path path = fs::path(dir) / "manifest.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot-open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
    SceneSet set;
    set.vocab = j.at("vocab").get<std::vector<std::string>>();
    set.files = j.at("scenes").get<std::vector<std::string>>();
    set.seed = j.at("seed").get<uint64_t>();
    return set;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad-manifest: ") + e.what());
  }
}

namespace {

std::vector<Scene> load_scene_set(const std::string& dir, SceneSet* set_out) {
  const SceneSet set = load_manifest(dir);
  if (set.files.empty()) throw ConfigError("empty-scene-set: " + dir);
  std::vector<Scene> scenes;
  for (const std::string& f : set.files)
    scenes.push_back(load_scene((fs::path(dir) / f).string(), set.vocab));
  if (set_out) *set_out = set;
  return scenes;
}

// SEMNAV_SEED wins over both the config file and --seed.
void apply_env_seed(RunConfig& cfg) {
  const char* env = std::getenv("SEMNAV_SEED");
  if (!env || !*env) return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') throw ConfigError("bad-env: SEMNAV_SEED");
  cfg.seed = v;
  cfg.gen.seed = v;
  cfg.train.seed = v;
  cfg.suite.seeds = {v};
}

PriorGraph obtain_priors(const RunConfig& cfg, const std::vector<Scene>& scenes,
                         const std::vector<std::string>& vocab) {
  if (!cfg.paths.priors.empty()) return load_prior_graph(cfg.paths.priors, vocab);
  return derive_prior_graph(scenes, 0.3);
}

Codec build_codec(const RunConfig& cfg, const std::vector<Scene>& scenes) {
  const Scene& s0 = scenes[0];
  for (const Scene& s : scenes)
    if (s.l != s0.l || s.w != s0.w)
      throw ConfigError("config-inconsistency: mixed-scene-dims");
  const int k_total = static_cast<int>(s0.vocab.size());
  if (cfg.comms.codec == "quantized")
    return Codec::quantized(s0.l, s0.w, k_total, cfg.comms.budget_values);
  // Learned codec: fit on maps built from random viewpoints of the set.
  const int64_t f = static_cast<int64_t>(s0.l) * s0.w * (k_total + 2);
  if (f > 65536) throw ConfigError("learned-codec-too-large");
  std::vector<SemanticMap> samples;
  Rng rng(mix_seed(cfg.seed, hash_str("codec-fit")));
  SensorParams sensor;
  sensor.fov_deg = cfg.simulation.fov_deg;
  sensor.ray_count = cfg.simulation.ray_count;
  sensor.max_range = cfg.simulation.max_range_m;
  const int per_scene =
      std::max<int>(1, static_cast<int>((40 + scenes.size() - 1) / scenes.size()));
  for (const Scene& s : scenes) {
    std::vector<Cell> free_cells;
    for (int y = 0; y < s.w; ++y)
      for (int x = 0; x < s.l; ++x)
        if (s.free(x, y)) free_cells.push_back({x, y});
    for (int i = 0; i < per_scene; ++i) {
      SemanticMap map(s.l, s.w, k_total);
      for (int v = 0; v < 30 && !free_cells.empty(); ++v) {
        const Cell c =
            free_cells[static_cast<size_t>(rng.below(static_cast<int>(free_cells.size())))];
        const int heading = 90 * rng.below(4);
        const int pitch = 30 * (rng.below(3) - 1);
        map.project_observation(observe(s, Pose{c, heading, pitch}, sensor));
      }
      samples.push_back(std::move(map));
    }
  }
  return train_learned_codec(samples, cfg.comms.budget_values, 120, 0.5,
                             mix_seed(cfg.seed, hash_str("codec-init")))
      .codec;
}

int cmd_gen_scenes(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  GenParams params;
  params.l = cfg.gen.l;
  params.w = cfg.gen.w;
  params.rooms = cfg.gen.rooms;
  params.object_density = cfg.gen.object_density;
  params.category_count = cfg.gen.category_count;
  params.spawn_count = cfg.gen.spawn_count;
  SceneSet set;
  set.vocab = default_vocabulary();
  set.seed = cfg.gen.seed;
  std::vector<Scene> scenes;
  for (int i = 0; i < cfg.gen.count; ++i) {
    const Scene scene =
        generate_scene(mix_seed(cfg.gen.seed, static_cast<uint64_t>(i)), params);
    const std::string name =
        "scene_" + std::to_string(cfg.gen.seed) + "_" + std::to_string(i) + ".json";
    save_scene(scene, (fs::path(out_dir) / name).string());
    set.files.push_back(name);
    scenes.push_back(scene);
    std::cout << name << " objects=" << scene.objects.size()
              << " spawns=" << scene.spawns.size() << "\n";
  }
  save_manifest(set, out_dir);
  const PriorGraph graph = derive_prior_graph(scenes, 0.3);
  save_prior_graph(graph, (fs::path(out_dir) / "priors.json").string(), set.vocab);
  std::cout << "wrote " << cfg.gen.count << " scenes + manifest + priors to "
            << out_dir << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, bool flat, const std::string& out_path) {
  SceneSet set;
  const std::vector<Scene> scenes = load_scene_set(cfg.paths.scenes_dir, &set);
  const PriorGraph graph = obtain_priors(cfg, scenes, set.vocab);

  TrainParams params;
  params.epochs = cfg.train.epochs;
  params.episodes_per_epoch = cfg.train.episodes_per_epoch;
  params.n_agents = cfg.train.n_agents;
  params.m_targets = cfg.train.m_targets;
  params.seed = cfg.train.seed;
  params.target_pool = cfg.train.target_pool;
  params.known_fraction = cfg.suite.known_fraction;
  params.base = episode_config_from(cfg);
  params.base.max_steps = cfg.train.max_steps;

  Codec codec;
  if (params.base.comms && !params.base.central && params.n_agents >= 2) {
    codec = build_codec(cfg, scenes);
    params.codec = &codec;
  }

  const PolicyVariant variant = flat ? PolicyVariant::flat : PolicyVariant::learned;
  HighLevelPolicy init;
  TrainerState resume;
  bool resuming = false;
  if (!cfg.paths.policy.empty() && fs::exists(cfg.paths.policy)) {
    init = load_policy(cfg.paths.policy, &resume);
    resuming = true;
    std::cout << "resuming from " << cfg.paths.policy << " at epoch "
              << resume.epoch << "\n";
  }
  const TrainResult result = train_high_level(
      scenes, &graph, variant, params, resuming ? &init : nullptr,
      resuming ? &resume : nullptr);

  for (size_t e = 0; e < result.return_trace.size(); ++e) {
    char line[96];
    std::snprintf(line, sizeof(line), "epoch %zu return %.6f", e,
                  result.return_trace[e]);
    std::cout << line << "\n";
  }
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out_path).parent_path());
  save_policy(out_path, result.policy, &result.trainer);
  std::cout << "saved policy to " << out_path << "\n";
  return 0;
}

std::string format_summary(const std::vector<SummaryRow>& rows) {
  std::string out = "variant             N  tasks  SR      SPL     EI\n";
  for (const SummaryRow& r : rows) {
    char line[128];
    if (r.ei)
      std::snprintf(line, sizeof(line), "%-18s %2d  %5d  %.4f  %.4f  %.4f",
                    r.variant.c_str(), r.n, r.tasks, r.sr, r.spl, *r.ei);
    else
      std::snprintf(line, sizeof(line), "%-18s %2d  %5d  %.4f  %.4f  -",
                    r.variant.c_str(), r.n, r.tasks, r.sr, r.spl);
    out += line;
    out += "\n";
  }
  return out;
}

int cmd_eval(const RunConfig& cfg, const std::string& out_dir) {
  SceneSet set;
  BenchmarkRequest req;
  req.scenes = load_scene_set(cfg.paths.scenes_dir, &set);
  const PriorGraph graph = obtain_priors(cfg, req.scenes, set.vocab);
  req.graph = &graph;

  VariantSpec variant;
  variant.mode = agent_mode_from_name(cfg.policy.mode);
  variant.comms = cfg.comms.enabled;
  variant.priors = cfg.policy.use_priors;
  variant.central = cfg.policy.central;
  req.variants = {variant};

  req.n_list = cfg.suite.n_list;
  req.m_list = cfg.suite.m_list;
  req.seeds = cfg.suite.seeds;
  req.tasks_per_scene = cfg.suite.tasks_per_scene;
  req.task_seed = cfg.suite.task_seed;
  req.target_pool = cfg.suite.target_pool;
  req.known_fraction = cfg.suite.known_fraction;
  req.workers = cfg.suite.workers;
  req.base = episode_config_from(cfg);

  HighLevelPolicy policy;
  if (variant.mode == AgentMode::learned || variant.mode == AgentMode::flat) {
    if (cfg.paths.policy.empty())
      throw ConfigError("missing-field: paths.policy");
    policy = load_policy(cfg.paths.policy, nullptr);
    req.policy = &policy;
  }
  Codec codec;
  if (cfg.comms.enabled && !variant.central &&
      *std::max_element(req.n_list.begin(), req.n_list.end()) >= 2 &&
      variant.mode != AgentMode::random_actions) {
    codec = build_codec(cfg, req.scenes);
    req.codec = &codec;
  }

  const BenchmarkReport report = run_benchmark(req);
  for (const BenchmarkRow& row : report.rows)
    if (row.failed_to_run)
      std::cerr << "episode-failed: " << row.result.task_id << " " << row.variant
                << " N=" << row.n << " seed=" << row.seed << ": " << row.error
                << "\n";

  fs::create_directories(out_dir);
  const fs::path csv_path = fs::path(out_dir) / "report.csv";
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw ConfigError("cannot-open: " + csv_path.string());
  csv << report_to_csv(report);
  csv.close();
  std::cout << format_summary(summarize_report(report));
  std::cout << "wrote " << csv_path.string() << "\n";
  return 0;
}

int cmd_replay(const RunConfig& cfg, const std::string& trace_path,
               const std::string& scene_file, int n, int m, uint64_t seed,
               const std::string& format, const std::string& out_path) {
  EpisodeTrace trace;
  Scene scene;
  if (!trace_path.empty()) {
    trace = load_trace(trace_path);
    SceneSet set;
    const std::vector<Scene> scenes = load_scene_set(cfg.paths.scenes_dir, &set);
    bool found = false;
    for (const Scene& s : scenes)
      if (s.id == trace.scene_id) {
        scene = s;
        found = true;
      }
    if (!found) throw ConfigError("scene-not-found: " + trace.scene_id);
  } else {
    SceneSet set;
    if (!scene_file.empty()) {
      set = load_manifest(cfg.paths.scenes_dir);
      scene = load_scene((fs::path(cfg.paths.scenes_dir) / scene_file).string(),
                         set.vocab);
    } else {
      const std::vector<Scene> scenes = load_scene_set(cfg.paths.scenes_dir, &set);
      scene = scenes[0];
    }
    std::vector<Scene> for_priors{scene};
    const PriorGraph graph = obtain_priors(cfg, for_priors, set.vocab);
    const TaskSpec task = sample_task(scene, m, n, mix_seed(seed, 99));
    EpisodeConfig ec = episode_config_from(cfg);
    HighLevelPolicy policy;
    const HighLevelPolicy* policy_ptr = nullptr;
    if (ec.mode == AgentMode::learned || ec.mode == AgentMode::flat) {
      if (cfg.paths.policy.empty())
        throw ConfigError("missing-field: paths.policy");
      policy = load_policy(cfg.paths.policy, nullptr);
      policy_ptr = &policy;
    }
    Codec codec;
    const Codec* codec_ptr = nullptr;
    if (ec.comms && !ec.central && n >= 2 && ec.mode != AgentMode::random_actions) {
      std::vector<Scene> single{scene};
      codec = build_codec(cfg, single);
      codec_ptr = &codec;
    }
    const EpisodeResult result =
        run_episode(scene, task, ec, policy_ptr, &graph, codec_ptr, seed, &trace);
    std::cout << "episode " << result.task_id << " success=" << result.success
              << " D=" << result.d << "\n";
  }

  std::string rendered;
  std::string ext;
  if (format == "svg") {
    rendered = render_svg(trace, scene);
    ext = ".svg";
  } else if (format == "text") {
    for (const std::string& frame : render_text_frames(trace, scene))
      rendered += frame + "\n";
    ext = ".txt";
  } else if (format == "json") {
    rendered = trace_to_json_string(trace);
    ext = ".json";
  } else {
    throw ConfigError("bad-field: replay.format");
  }

  if (out_path == "-") {
    std::cout << rendered;
    return 0;
  }
  std::string path = out_path;
  if (path.empty()) {
    fs::create_directories(cfg.paths.out_dir);
    path = (fs::path(cfg.paths.out_dir) / ("replay" + ext)).string();
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot-open: " + path);
  out << rendered;
  std::cout << "wrote " << path << "\n";
  return 0;
}

int run_cli_impl(const std::vector<std::string>& args) {
  CLI::App app{"multi-agent semantic navigation sandbox"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON run config")->expected(1);

  // gen-scenes
  CLI::App* gen = app.add_subcommand("gen-scenes", "generate a scene set");
  std::string gen_out;
  int gen_count = -1, gen_l = -1, gen_w = -1, gen_rooms = -1;
  int64_t gen_seed = -1;
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--count", gen_count, "number of scenes");
  gen->add_option("--l", gen_l, "scene x extent, cells");
  gen->add_option("--w", gen_w, "scene y extent, cells");
  gen->add_option("--rooms", gen_rooms, "rooms per scene");
  gen->add_option("--seed", gen_seed, "generator seed");

  // train
  CLI::App* train = app.add_subcommand("train", "train the high-level policy");
  std::string train_out, train_scenes, train_policy;
  bool train_flat = false;
  int train_epochs = -1, train_agents = -1, train_targets = -1;
  int64_t train_seed = -1;
  train->add_option("--scenes", train_scenes, "scene-set directory");
  train->add_option("--out", train_out, "checkpoint output path");
  train->add_option("--policy", train_policy, "checkpoint to resume from");
  train->add_flag("--flat-policy", train_flat, "train movement head directly");
  train->add_option("--epochs", train_epochs, "training epochs");
  train->add_option("--agents", train_agents, "agents per episode");
  train->add_option("--targets", train_targets, "targets per episode");
  train->add_option("--seed", train_seed, "training seed");

  // eval
  CLI::App* eval = app.add_subcommand("eval", "run the benchmark suite");
  std::string eval_scenes, eval_policy, eval_out, eval_mode, eval_codec;
  bool no_comm = false, no_priors = false, eval_flat = false, central = false;
  int eval_workers = -1, eval_tasks = -1;
  int64_t eval_seed = -1, eval_task_seed = -1;
  std::vector<int> eval_n, eval_m;
  eval->add_option("--scenes", eval_scenes, "scene-set directory");
  eval->add_option("--policy", eval_policy, "policy checkpoint");
  eval->add_option("--out", eval_out, "report output directory");
  eval->add_option("--mode", eval_mode,
                   "greedy | learned | random-subgoal | flat | random");
  eval->add_flag("--no-comm", no_comm, "disable inter-agent messages");
  eval->add_flag("--no-priors", no_priors, "disable the related-object layer");
  eval->add_flag("--flat-policy", eval_flat, "movement-head policy");
  eval->add_flag("--central", central, "one shared map and planner state");
  eval->add_option("--workers", eval_workers, "episode worker threads");
  eval->add_option("--tasks-per-scene", eval_tasks, "tasks drawn per scene");
  eval->add_option("--seed", eval_seed, "run seed (single)");
  eval->add_option("--task-seed", eval_task_seed, "task draw seed");
  eval->add_option("--n-list", eval_n, "agent counts to sweep");
  eval->add_option("--m-list", eval_m, "target counts to sweep");
  eval->add_option("--codec", eval_codec, "quantized | learned");

  // replay
  CLI::App* replay = app.add_subcommand("replay", "render one episode");
  std::string rp_trace, rp_scene, rp_format = "svg", rp_out, rp_scenes, rp_mode;
  int rp_n = 2, rp_m = 1;
  int64_t rp_seed = -1;
  replay->add_option("--trace", rp_trace, "existing trace JSON to render");
  replay->add_option("--scenes", rp_scenes, "scene-set directory");
  replay->add_option("--scene", rp_scene, "scene file within --scenes");
  replay->add_option("--mode", rp_mode, "agent mode for a fresh episode");
  replay->add_option("--n", rp_n, "agents");
  replay->add_option("--m", rp_m, "targets");
  replay->add_option("--seed", rp_seed, "episode seed");
  replay->add_option("--format", rp_format, "svg | text | json");
  replay->add_option("--out", rp_out, "output path ('-' = stdout)");

  std::vector<std::string> argv = args;
  argv.insert(argv.begin(), "semnav");
  std::vector<const char*> cargv;
  for (const std::string& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  RunConfig cfg;
  if (!config_path.empty()) cfg = load_config(config_path);

  if (gen->parsed()) {
    if (gen_count >= 0) cfg.gen.count = gen_count;
    if (gen_l >= 0) cfg.gen.l = gen_l;
    if (gen_w >= 0) cfg.gen.w = gen_w;
    if (gen_rooms >= 0) cfg.gen.rooms = gen_rooms;
    if (gen_seed >= 0) cfg.gen.seed = static_cast<uint64_t>(gen_seed);
    apply_env_seed(cfg);
    validate_config(cfg);
    return cmd_gen_scenes(cfg, gen_out.empty() ? cfg.paths.scenes_dir : gen_out);
  }
  if (train->parsed()) {
    if (!train_scenes.empty()) cfg.paths.scenes_dir = train_scenes;
    if (!train_policy.empty()) cfg.paths.policy = train_policy;
    if (train_epochs >= 0) cfg.train.epochs = train_epochs;
    if (train_agents >= 0) cfg.train.n_agents = train_agents;
    if (train_targets >= 0) cfg.train.m_targets = train_targets;
    if (train_seed >= 0) cfg.train.seed = static_cast<uint64_t>(train_seed);
    apply_env_seed(cfg);
    validate_config(cfg);
    const std::string out = train_out.empty()
                                ? (fs::path(cfg.paths.out_dir) / "policy.bin").string()
                                : train_out;
    fs::create_directories(fs::path(out).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(out).parent_path());
    return cmd_train(cfg, train_flat, out);
  }
  if (eval->parsed()) {
    if (!eval_scenes.empty()) cfg.paths.scenes_dir = eval_scenes;
    if (!eval_policy.empty()) cfg.paths.policy = eval_policy;
    if (!eval_mode.empty()) cfg.policy.mode = eval_mode;
    if (eval_flat) cfg.policy.mode = "flat";
    if (no_comm) cfg.comms.enabled = false;
    if (no_priors) cfg.policy.use_priors = false;
    if (central) cfg.policy.central = true;
    if (!eval_codec.empty()) cfg.comms.codec = eval_codec;
    if (eval_workers >= 1) cfg.suite.workers = eval_workers;
    if (eval_tasks >= 1) cfg.suite.tasks_per_scene = eval_tasks;
    if (eval_seed >= 0) cfg.suite.seeds = {static_cast<uint64_t>(eval_seed)};
    if (eval_task_seed >= 0) cfg.suite.task_seed = static_cast<uint64_t>(eval_task_seed);
    if (!eval_n.empty()) cfg.suite.n_list = eval_n;
    if (!eval_m.empty()) cfg.suite.m_list = eval_m;
    apply_env_seed(cfg);
    validate_config(cfg);
    return cmd_eval(cfg, eval_out.empty() ? cfg.paths.out_dir : eval_out);
  }
  if (replay->parsed()) {
    if (!rp_scenes.empty()) cfg.paths.scenes_dir = rp_scenes;
    if (!rp_mode.empty()) cfg.policy.mode = rp_mode;
    apply_env_seed(cfg);
    validate_config(cfg);
    uint64_t seed = rp_seed >= 0 ? static_cast<uint64_t>(rp_seed) : cfg.seed;
    const char* env = std::getenv("SEMNAV_SEED");
    if (env && *env) seed = cfg.seed;
    if (rp_n < 1 || rp_n > 5) throw ConfigError("bad-field: replay.n");
    if (rp_m < 1 || rp_m > 5) throw ConfigError("bad-field: replay.m");
    return cmd_replay(cfg, rp_trace, rp_scene, rp_n, rp_m, seed, rp_format, rp_out);
  }
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  try {
    return run_cli_impl(args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace semnav
