#pragma once

#include <cstdint>
#include <vector>

#include "semnav/eval.hpp"
#include "semnav/policy.hpp"
#include "semnav/priors.hpp"
#include "semnav/scene.hpp"

namespace semnav {

struct TrainParams {
  int epochs = 40;
  int episodes_per_epoch = 4;
  int n_agents = 2;
  int m_targets = 1;
  uint64_t seed = 1;
  std::string target_pool = "all";  // all | known | unknown
  double known_fraction = 0.7;
  EpisodeConfig base;  // mode is taken from the policy variant
  const Codec* codec = nullptr;  // needed only when base.comms is on
};

struct TrainResult {
  HighLevelPolicy policy;
  TrainerState trainer;
  // Mean per-episode shaped return for each epoch (the whole history,
  // including epochs from a resumed run).
  std::vector<double> return_trace;
};

// On-policy training loop: each epoch collects episodes_per_epoch episodes
// with the current policy, stacks every agent's decision records into one
// batch (rewards turned into discounted returns per agent), and applies one
// clipped-surrogate update. With epochs == 0 the returned policy is the
// untouched initial one. Resuming from a checkpointed TrainerState
// continues the epoch count, optimizer moments, and rng stream seamlessly.
TrainResult train_high_level(const std::vector<Scene>& scenes,
                             const PriorGraph* graph, PolicyVariant variant,
                             const TrainParams& params,
                             const HighLevelPolicy* init = nullptr,
                             const TrainerState* resume = nullptr);

}  // namespace semnav
