#include "semnav/train.hpp"

#include <algorithm>
#include <stdexcept>

#include "semnav/error.hpp"

namespace semnav {

TrainResult train_high_level(const std::vector<Scene>& scenes,
                             const PriorGraph* graph, PolicyVariant variant,
                             const TrainParams& params,
                             const HighLevelPolicy* init,
                             const TrainerState* resume) {
  if (scenes.empty()) throw std::invalid_argument("empty-scene-list");
  if (variant != PolicyVariant::learned && variant != PolicyVariant::flat)
    throw std::invalid_argument("untrainable-variant");
  if (params.epochs < 0 || params.episodes_per_epoch < 1 ||
      params.n_agents < 1 || params.n_agents > 5 || params.m_targets < 1)
    throw std::invalid_argument("bad-train-params");
  const int k_total = static_cast<int>(scenes[0].vocab.size());
  for (const Scene& s : scenes)
    if (static_cast<int>(s.vocab.size()) != k_total)
      throw std::invalid_argument("vocab-mismatch");

  TrainResult out;
  out.policy = init ? *init
                    : HighLevelPolicy(variant, k_total, params.base.hp, params.seed);
  if (out.policy.variant() != variant)
    throw std::invalid_argument("variant-mismatch");

  Rng rng(mix_seed(params.seed, hash_str("train")));
  if (resume) {
    out.trainer = *resume;
    rng.set_state(resume->rng);
  } else {
    out.trainer.adam.init_like(out.policy);
    out.trainer.epoch = 0;
    out.trainer.rng = rng.state();
  }

  std::vector<int> pool;
  const std::vector<int>* pool_ptr = nullptr;
  if (params.target_pool == "known") {
    pool = known_target_categories(k_total, params.known_fraction);
    pool_ptr = &pool;
  } else if (params.target_pool == "unknown") {
    const std::vector<int> known =
        known_target_categories(k_total, params.known_fraction);
    for (int c = 0; c < k_total; ++c)
      if (std::find(known.begin(), known.end(), c) == known.end())
        pool.push_back(c);
    pool_ptr = &pool;
  } else if (params.target_pool != "all") {
    throw std::invalid_argument("bad-target-pool: " + params.target_pool);
  }

  EpisodeConfig cfg = params.base;
  cfg.mode = variant == PolicyVariant::flat ? AgentMode::flat : AgentMode::learned;

  for (int epoch = out.trainer.epoch; epoch < params.epochs; ++epoch) {
    PpoBatch batch;
    double return_sum = 0.0;
    for (int e = 0; e < params.episodes_per_epoch; ++e) {
      const Scene& scene =
          scenes[static_cast<size_t>(rng.below(static_cast<int>(scenes.size())))];
      TaskSpec task;
      bool ok = false;
      for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
        try {
          task = sample_task(scene, params.m_targets, params.n_agents, rng.next(),
                             pool_ptr);
          ok = true;
        } catch (const std::invalid_argument&) {
          // scene cannot host this draw; redraw
        }
      }
      if (!ok) throw GenerationFailure("task-generation-exhausted: " + scene.id);

      std::vector<std::vector<DecisionRecord>> records;
      run_episode(scene, task, cfg, &out.policy, graph, params.codec, rng.next(),
                  nullptr, &records);

      double episode_return = 0.0;
      for (const auto& agent_records : records) {
        if (agent_records.empty()) continue;
        std::vector<double> rewards;
        for (const DecisionRecord& rec : agent_records) {
          rewards.push_back(rec.reward);
          episode_return += rec.reward;
        }
        const std::vector<double> returns =
            discounted_returns(rewards, params.base.hp.gamma);
        for (size_t i = 0; i < agent_records.size(); ++i) {
          batch.features.push_back(agent_records[i].features);
          batch.actions.push_back(agent_records[i].action_index);
          batch.logprobs.push_back(agent_records[i].logprob);
          batch.returns.push_back(returns[i]);
          batch.values.push_back(agent_records[i].value);
        }
      }
      return_sum += episode_return;
    }

    if (!batch.actions.empty()) ppo_update(out.policy, out.trainer.adam, batch);
    out.trainer.epoch = epoch + 1;
    out.trainer.return_trace.push_back(
        return_sum / static_cast<double>(params.episodes_per_epoch));
    out.trainer.rng = rng.state();
  }

  out.return_trace = out.trainer.return_trace;
  return out;
}

}  // namespace semnav
