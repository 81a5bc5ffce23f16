#include <doctest.h>

#include <set>

#include "rewind/lang2d/env.hpp"
#include "rewind/lang2d/rollouts.hpp"
#include "rewind/lang2d/tasks.hpp"

using namespace rewindrl;
using namespace rewindrl::lang2d;

namespace {

const TaskRegistry& registry() {
  static TaskRegistry reg = build_registry();
  return reg;
}

double goal_dist_of(Lang2DEnv& env) { return env.goal_distance(); }

}  // namespace

TEST_CASE("registry counts and uniqueness") {
  const auto& reg = registry();
  CHECK(reg.train.size() == 20);
  CHECK(reg.unseen.size() == 8);
  CHECK(reg.proxy.size() == 40);

  std::set<std::string> triples;
  auto triple = [](const data::TaskSpec& t) {
    return std::string(data::family_name(t.family)) + "|" + t.color + " " +
           t.shape + "|" + t.direction;
  };
  for (const auto& t : reg.train) CHECK(triples.insert(triple(t)).second);
  for (const auto& t : reg.unseen) CHECK(triples.insert(triple(t)).second);
  // Proxy tasks never duplicate a target triple either.
  for (const auto& t : reg.proxy) CHECK(triples.insert(triple(t)).second);

  // The proxy vocabulary includes direction words absent from train demos.
  std::set<std::string> train_dirs, proxy_dirs;
  for (const auto& t : reg.train) train_dirs.insert(t.direction);
  for (const auto& t : reg.proxy) proxy_dirs.insert(t.direction);
  bool novel = false;
  for (const auto& d : proxy_dirs)
    if (d != "none" && !train_dirs.count(d)) novel = true;
  CHECK(novel);
  CHECK(reg.proxy.size() > reg.train.size());
}

TEST_CASE("paraphrase bank yields nine distinct new phrasings") {
  const auto& reg = registry();
  for (const auto* t : reg.targets()) {
    auto ps = generate_paraphrases(*t);
    CHECK(ps.size() == 9);
    std::set<std::string> uniq(ps.begin(), ps.end());
    CHECK(uniq.size() == 9);
    CHECK(uniq.count(t->instructions.front().text) == 0);
  }
}

TEST_CASE("reset determinism and non-degenerate starts") {
  Lang2DEnv env;
  const auto& task = registry().train[4];

  Rng a(77), b(77);
  auto o1 = env.reset(task, a);
  auto s1 = env.state();
  auto o2 = env.reset(task, b);
  CHECK(o1 == o2);
  CHECK(s1.ax == env.state().ax);

  // reach task: target present, agent not within eps at reset
  const auto& reach = registry().train[0];
  Rng r(5);
  for (int i = 0; i < 1000; ++i) {
    env.reset(reach, r);
    CHECK(!env.success_now());
    CHECK(env.goal_distance() > env.config().eps);
  }
}

TEST_CASE("step kinematics") {
  Lang2DEnv env;
  Rng r(9);
  env.reset(registry().train[0], r);
  const auto s0 = env.state();

  auto res = env.step({0, 0, -1});
  CHECK(env.state().ax == s0.ax);
  CHECK(env.state().ay == s0.ay);
  CHECK(env.state().step == 1);
  CHECK(!res.done);

  const double ax = env.state().ax;
  env.step({1, 0, -1});
  CHECK(env.state().ax == doctest::Approx(ax + env.config().action_scale));
}

TEST_CASE("step after done throws") {
  Lang2DEnv env;
  Rng r(10);
  env.reset(registry().train[0], r);
  while (!env.done()) env.step(expert_action(env));
  CHECK_THROWS_AS(env.step({0, 0, 0}), invalid_input);
}

TEST_CASE("scripted expert succeeds on every registry task") {
  Lang2DEnv env;
  Rng rng(123);
  for (const auto* list : {&registry().train, &registry().unseen}) {
    for (const auto& task : *list) {
      for (int k = 0; k < 3; ++k) {
        auto ep = scripted_expert(env, task, rng);
        CHECK(ep.success);
        CHECK(ep.length() <= env.config().horizon);
        CHECK(ep.length() <= 60);
        CHECK(ep.length() >= 2);
      }
    }
  }
}

TEST_CASE("reach expert approaches monotonically") {
  Lang2DEnv env;
  Rng rng(31);
  env.reset(registry().train[0], rng);
  double prev = goal_dist_of(env);
  while (!env.done()) {
    env.step(expert_action(env));
    CHECK(env.goal_distance() <= prev + 1e-12);
    prev = env.goal_distance();
  }
}

TEST_CASE("push-left expert moves the object left") {
  Lang2DEnv env;
  Rng rng(32);
  const auto& task = registry().train[4];  // push red block left
  env.reset(task, rng);
  const double x0 = env.state().objects[env.target_object()].x;
  while (!env.done()) env.step(expert_action(env));
  const double x1 = env.state().objects[env.target_object()].x;
  CHECK(x1 < x0 - env.config().eps);
}

TEST_CASE("expert distance is non-increasing once grasped, per family") {
  Lang2DEnv env;
  Rng rng(33);
  for (const auto& task : registry().train) {
    env.reset(task, rng);
    bool grasped = false;
    double prev = 1e9;
    while (!env.done()) {
      env.step(expert_action(env));
      const bool held = env.state().objects[env.target_object()].held;
      if (held && !grasped) {
        grasped = true;
        prev = env.goal_distance();
      }
      if (grasped) {
        CHECK(env.goal_distance() <= prev + 1e-12);
        prev = env.goal_distance();
      }
    }
  }
}

TEST_CASE("pick-place expert holds the object over a contiguous middle segment") {
  Lang2DEnv env;
  Rng rng(34);
  const auto& task = registry().train[15];  // put red block in the left bin
  auto ep = scripted_expert(env, task, rng);
  // Recover held segment from the recorded observations' held channel.
  // Simpler: replay actions and inspect the state.
  Rng replay(0);
  // The recorder stored pre-action states; re-run to track held flags.
  // (Replay uses the same rng draw sequence as scripted_expert's reset.)
  Rng rng2(34);
  env.reset(task, rng2);
  std::vector<bool> held;
  for (int t = 0; t < ep.length(); ++t) {
    std::array<double, 3> a = {double(ep.actions.at(t, 0)),
                               double(ep.actions.at(t, 1)),
                               double(ep.actions.at(t, 2))};
    env.step(a);
    held.push_back(env.state().objects[env.target_object()].held);
  }
  int first = -1, last = -1;
  for (int t = 0; t < int(held.size()); ++t)
    if (held[t]) {
      if (first < 0) first = t;
      last = t;
    }
  REQUIRE(first > 0);
  CHECK(last < int(held.size()) - 1);
  for (int t = first; t <= last; ++t) CHECK(held[t]);
}

TEST_CASE("episode determinism: same seed, same actions, same episode") {
  Lang2DEnv env;
  Rng a(55), b(55);
  auto e1 = scripted_expert(env, registry().train[7], a);
  auto e2 = scripted_expert(env, registry().train[7], b);
  CHECK(e1.observations == e2.observations);
  CHECK(e1.actions == e2.actions);
}

namespace {

// Recomputes the final distance to goal for a stored episode from the exact
// scalar slots of its first and last observation frames.
double stored_final_distance(const Lang2DConfig& cfg, const data::TaskSpec& task,
                             const data::RawEpisode& ep) {
  const int color = color_index(task.color);
  const auto first = Lang2DEnv::decode_color_slot(cfg, ep.observations.row(0), color);
  const auto last =
      Lang2DEnv::decode_color_slot(cfg, ep.observations.row(ep.length() - 1), color);
  const auto agent =
      Lang2DEnv::decode_agent(cfg, ep.observations.row(ep.length() - 1));
  double gx = 0, gy = 0;
  switch (task.family) {
    case data::Family::reach:
      return std::hypot(agent[0] - last[0], agent[1] - last[1]);
    case data::Family::push:
    case data::Family::pull: {
      double dx = 0, dy = 0;
      if (task.direction == "left") dx = -1;
      if (task.direction == "right") dx = 1;
      if (task.direction == "up") dy = 1;
      if (task.direction == "down") dy = -1;
      gx = first[0] + 0.25 * dx;
      gy = first[1] + 0.25 * dy;
      break;
    }
    case data::Family::pick_place: {
      gx = task.direction == "left" ? 0.10 : task.direction == "right" ? 0.90 : 0.5;
      gy = task.direction == "up" ? 0.90 : task.direction == "down" ? 0.10 : 0.5;
      break;
    }
  }
  return std::hypot(last[0] - gx, last[1] - gy);
}

}  // namespace

TEST_CASE("rollout sets satisfy the category definitions") {
  Lang2DEnv env;
  Rng rng(66);
  const double eps = env.config().eps;
  for (const auto& task : registry().unseen) {
    auto sets = generate_rollout_sets(env, task, rng);
    REQUIRE(sets.failure.size() == 2);
    REQUIRE(sets.near_success.size() == 2);
    REQUIRE(sets.success.size() == 2);
    for (const auto& e : sets.success) CHECK(e.success);
    for (const auto& e : sets.failure) {
      CHECK(!e.success);
      CHECK(stored_final_distance(env.config(), task, e) > 3 * eps);
    }
    for (const auto& e : sets.near_success) {
      CHECK(!e.success);
      const double d = stored_final_distance(env.config(), task, e);
      CHECK(d > eps);
      CHECK(d <= 2 * eps);
    }
    // Categories are pairwise disjoint episodes.
    std::set<const data::RawEpisode*> all;
    for (const auto* v : {&sets.failure, &sets.near_success, &sets.success})
      for (const auto& e : *v) CHECK(all.insert(&e).second);
  }
}

TEST_CASE("proxy dataset: breadth and success") {
  const auto& reg = registry();
  Lang2DConfig cfg;
  data::EncoderSet enc(Lang2DEnv::obs_dim(cfg), 16, 8, 99);
  auto ds = build_openx_proxy(reg, cfg, enc, 1234);
  CHECK(ds.manifest.role == data::DatasetRole::openx_proxy);
  CHECK(ds.manifest.tasks.size() == 40);
  CHECK(ds.episodes.size() == 400);
  for (const auto& e : ds.episodes) CHECK(e.success);
}

TEST_CASE("no episode continues past its first success") {
  Lang2DEnv env;
  Rng rng(71);
  for (const auto& task : registry().train) {
    auto ep = scripted_expert(env, task, rng);
    // Replay: success may only hold at the final step.
    Rng rng2 = rng;  // fresh scene; just assert final step ended the episode
    CHECK(ep.length() >= 1);
  }
  // Direct check on the env contract: done is set the moment success fires.
  env.reset(registry().train[0], rng);
  bool succ = false;
  while (!env.done()) {
    auto res = env.step(expert_action(env));
    if (succ) FAIL("episode continued after success");
    succ = res.success;
  }
  CHECK(succ);
}
