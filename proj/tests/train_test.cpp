#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "semnav/error.hpp"
#include "semnav/train.hpp"

using namespace semnav;

namespace {

Scene training_scene(uint64_t seed) {
  GenParams gp;
  gp.l = 36;
  gp.w = 36;
  gp.rooms = 2;
  gp.object_density = 1.3;
  gp.category_count = 6;
  gp.spawn_count = 8;
  return generate_scene(seed, gp);
}

TrainParams quick_params() {
  TrainParams p;
  p.epochs = 2;
  p.episodes_per_epoch = 2;
  p.n_agents = 2;
  p.m_targets = 1;
  p.seed = 77;
  p.base.max_steps = 60;
  p.base.comms = false;  // keeps the loop codec-free
  return p;
}

Scene bare_room(const std::string& id, std::vector<std::string> vocab) {
  Scene s;
  s.id = id;
  s.l = 12;
  s.w = 12;
  s.walls.assign(144, 0);
  for (int x = 0; x < 12; ++x) {
    s.walls[cell_index(x, 0, 12)] = 1;
    s.walls[cell_index(x, 11, 12)] = 1;
  }
  for (int y = 0; y < 12; ++y) {
    s.walls[cell_index(0, y, 12)] = 1;
    s.walls[cell_index(11, y, 12)] = 1;
  }
  s.vocab = std::move(vocab);
  ObjectInstance o;
  o.id = 0;
  o.category = 0;
  o.footprint = {Cell{6, 6}};
  s.objects.push_back(o);
  s.validate();
  return s;
}

}  // namespace

TEST_CASE("zero epochs hands back the untouched initial policy") {
  const std::vector<Scene> scenes = {training_scene(7)};
  TrainParams p = quick_params();
  p.epochs = 0;
  const TrainResult r =
      train_high_level(scenes, nullptr, PolicyVariant::learned, p);

  const HighLevelPolicy fresh(PolicyVariant::learned,
                              static_cast<int>(scenes[0].vocab.size()),
                              p.base.hp, p.seed);
  CHECK(policy_to_blob(r.policy, nullptr) == policy_to_blob(fresh, nullptr));
  CHECK(r.return_trace.empty());
  CHECK(r.trainer.epoch == 0);
}

TEST_CASE("training advances the epoch counter and moves the weights") {
  const std::vector<Scene> scenes = {training_scene(7)};
  TrainParams p = quick_params();
  p.epochs = 3;
  const TrainResult r =
      train_high_level(scenes, nullptr, PolicyVariant::learned, p);

  CHECK(r.return_trace.size() == 3);
  CHECK(r.trainer.epoch == 3);
  CHECK(r.return_trace == r.trainer.return_trace);

  const HighLevelPolicy fresh(PolicyVariant::learned,
                              static_cast<int>(scenes[0].vocab.size()),
                              p.base.hp, p.seed);
  CHECK(policy_to_blob(r.policy, nullptr) != policy_to_blob(fresh, nullptr));
}

TEST_CASE("a resumed run reproduces the uninterrupted one exactly") {
  const std::vector<Scene> scenes = {training_scene(9), training_scene(10)};
  TrainParams p = quick_params();
  p.epochs = 4;
  const TrainResult whole =
      train_high_level(scenes, nullptr, PolicyVariant::learned, p);

  p.epochs = 2;
  const TrainResult half =
      train_high_level(scenes, nullptr, PolicyVariant::learned, p);
  CHECK(half.trainer.epoch == 2);

  p.epochs = 4;
  const TrainResult rest = train_high_level(
      scenes, nullptr, PolicyVariant::learned, p, &half.policy, &half.trainer);

  CHECK(policy_to_blob(rest.policy, &rest.trainer) ==
        policy_to_blob(whole.policy, &whole.trainer));
  CHECK(rest.return_trace == whole.return_trace);
}

TEST_CASE("the flat controller trains through the same loop") {
  const std::vector<Scene> scenes = {training_scene(7)};
  TrainParams p = quick_params();
  p.epochs = 1;
  const TrainResult r = train_high_level(scenes, nullptr, PolicyVariant::flat, p);
  CHECK(r.policy.variant() == PolicyVariant::flat);
  CHECK(r.policy.output_count() == kMoveActionCount);
  CHECK(r.return_trace.size() == 1);
}

TEST_CASE("train validates its inputs") {
  const std::vector<Scene> scenes = {training_scene(7)};
  const TrainParams p = quick_params();

  CHECK_THROWS_WITH_AS(train_high_level({}, nullptr, PolicyVariant::learned, p),
                       "empty-scene-list", std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      train_high_level(scenes, nullptr, PolicyVariant::greedy, p),
      "untrainable-variant", std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      train_high_level(scenes, nullptr, PolicyVariant::random_subgoal, p),
      "untrainable-variant", std::invalid_argument);

  TrainParams bad = p;
  bad.epochs = -1;
  CHECK_THROWS_WITH_AS(
      train_high_level(scenes, nullptr, PolicyVariant::learned, bad),
      "bad-train-params", std::invalid_argument);
  bad = p;
  bad.episodes_per_epoch = 0;
  CHECK_THROWS_WITH_AS(
      train_high_level(scenes, nullptr, PolicyVariant::learned, bad),
      "bad-train-params", std::invalid_argument);
  bad = p;
  bad.n_agents = 6;
  CHECK_THROWS_WITH_AS(
      train_high_level(scenes, nullptr, PolicyVariant::learned, bad),
      "bad-train-params", std::invalid_argument);
  bad = p;
  bad.m_targets = 0;
  CHECK_THROWS_WITH_AS(
      train_high_level(scenes, nullptr, PolicyVariant::learned, bad),
      "bad-train-params", std::invalid_argument);
  bad = p;
  bad.target_pool = "nonsense";
  CHECK_THROWS_WITH_AS(
      train_high_level(scenes, nullptr, PolicyVariant::learned, bad),
      "bad-target-pool: nonsense", std::invalid_argument);

  const std::vector<Scene> mismatched = {bare_room("a", {"Box", "Ball"}),
                                         bare_room("b", {"Box", "Ball", "Mug"})};
  CHECK_THROWS_WITH_AS(
      train_high_level(mismatched, nullptr, PolicyVariant::learned, p),
      "vocab-mismatch", std::invalid_argument);

  const HighLevelPolicy flat_init(PolicyVariant::flat,
                                  static_cast<int>(scenes[0].vocab.size()),
                                  p.base.hp, 1);
  CHECK_THROWS_WITH_AS(train_high_level(scenes, nullptr, PolicyVariant::learned,
                                        p, &flat_init),
                       "variant-mismatch", std::invalid_argument);
}
