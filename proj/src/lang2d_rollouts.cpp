#include "rewind/lang2d/rollouts.hpp"

#include <algorithm>
#include <cmath>

namespace rewindrl::lang2d {

using data::Family;
using data::RawEpisode;
using data::TaskSpec;

namespace {

double dist(double x0, double y0, double x1, double y1) {
  return std::hypot(x1 - x0, y1 - y0);
}

std::array<double, 3> move_toward(const Lang2DEnv& env, double tx, double ty,
                                  double grip) {
  const auto& s = env.state();
  const double scale = env.config().action_scale;
  return {std::clamp((tx - s.ax) / scale, -1.0, 1.0),
          std::clamp((ty - s.ay) / scale, -1.0, 1.0), grip};
}

struct Recorder {
  RawEpisode ep;
  int obs_dim, t = 0;

  Recorder(const Lang2DEnv& env, const TaskSpec& task, int cap)
      : obs_dim(Lang2DEnv::obs_dim(env.config())) {
    ep.task_id = task.task_id;
    ep.observations = data::Mat(cap, obs_dim);
    ep.proprio = data::Mat(cap, 3);
    ep.actions = data::Mat(cap, 3);
  }

  // Records the pre-action observation together with the action, then
  // steps. Returns the step result.
  Lang2DEnv::StepResult step(Lang2DEnv& env, const std::array<double, 3>& a) {
    const auto obs = env.featurize();
    const auto pp = env.proprio();
    std::copy(obs.begin(), obs.end(), ep.observations.row(t));
    std::copy(pp.begin(), pp.end(), ep.proprio.row(t));
    ep.actions.at(t, 0) = Real(a[0]);
    ep.actions.at(t, 1) = Real(a[1]);
    ep.actions.at(t, 2) = Real(a[2]);
    ++t;
    return env.step(a);
  }

  RawEpisode finish(bool success) {
    ep.observations.rows = t;
    ep.observations.v.resize(std::size_t(t) * obs_dim);
    ep.proprio.rows = t;
    ep.proprio.v.resize(std::size_t(t) * 3);
    ep.actions.rows = t;
    ep.actions.v.resize(std::size_t(t) * 3);
    ep.success = success;
    return std::move(ep);
  }
};

std::array<double, 3> add_noise(std::array<double, 3> a, Rng& rng, double s) {
  if (s <= 0) return a;
  for (auto& x : a) x = std::clamp(x + s * rng.normal(), -1.0, 1.0);
  return a;
}

}  // namespace

std::array<double, 3> expert_action(const Lang2DEnv& env) {
  const auto& s = env.state();
  const auto& task = env.task();
  const auto& obj = s.objects[env.target_object()];
  const auto goal = env.goal_point();
  const double eps = env.config().eps;

  if (task.family == Family::reach)
    return move_toward(env, obj.x, obj.y, -1.0);

  if (!obj.held) {
    const double d = dist(s.ax, s.ay, obj.x, obj.y);
    if (d > 0.8 * env.config().grasp_radius)
      return move_toward(env, obj.x, obj.y, -1.0);
    return {0.0, 0.0, 1.0};  // close the gripper
  }
  if (task.family == Family::pick_place &&
      dist(obj.x, obj.y, goal[0], goal[1]) <= 0.5 * eps)
    return {0.0, 0.0, -1.0};  // release into the bin
  return move_toward(env, goal[0], goal[1], 1.0);
}

RawEpisode scripted_expert(Lang2DEnv& env, const TaskSpec& task, Rng& rng,
                           double action_noise) {
  env.reset(task, rng);
  Recorder rec(env, task, env.config().horizon);
  bool success = false;
  while (!env.done()) {
    const auto a = add_noise(expert_action(env), rng, action_noise);
    success = rec.step(env, a).success;
  }
  if (!success)
    throw generation_error("scripted_expert failed on task " + task.task_id);
  return rec.finish(true);
}

namespace {

// Random-policy rollout; resamples until the final distance exceeds 3 eps.
// A trailing no-op step is recorded so the final state appears in the
// stored frames (observations are pre-action states).
RawEpisode gen_failure(Lang2DEnv& env, const TaskSpec& task, Rng& rng) {
  const double eps = env.config().eps;
  for (int attempt = 0; attempt < 100; ++attempt) {
    env.reset(task, rng);
    const int len = int(rng.uniform_int(30, 60));
    Recorder rec(env, task, env.config().horizon);
    bool success = false;
    for (int t = 0; t < len && !env.done(); ++t) {
      const std::array<double, 3> a = {rng.uniform(-1, 1), rng.uniform(-1, 1),
                                       rng.uniform(-1, 1)};
      success = rec.step(env, a).success;
    }
    if (success || env.done()) continue;
    if (env.goal_distance() <= 3 * eps) continue;
    rec.step(env, {0, 0, -1});
    if (env.goal_distance() <= 3 * eps) continue;
    return rec.finish(false);
  }
  throw generation_error("rollout sets: could not generate category failure for " +
                         task.task_id);
}

// Detoured expert driven toward an offset goal: approaches from beyond the
// offset so the true goal's success ball is never entered, and ends with
// distance in (eps, 2 eps].
RawEpisode gen_near_success(Lang2DEnv& env, const TaskSpec& task, Rng& rng) {
  const double eps = env.config().eps;
  for (int attempt = 0; attempt < 100; ++attempt) {
    env.reset(task, rng);
    const double ang = rng.uniform(0, 2 * M_PI);
    const double ux = std::cos(ang), uy = std::sin(ang);
    const double delta = rng.uniform(1.25 * eps, 1.85 * eps);
    const auto goal = env.goal_point();
    const double gx = goal[0] + delta * ux, gy = goal[1] + delta * uy;
    const double wx = std::clamp(goal[0] + (delta + 0.12) * ux, 0.02, 0.98);
    const double wy = std::clamp(goal[1] + (delta + 0.12) * uy, 0.02, 0.98);
    if (gx < 0.02 || gx > 0.98 || gy < 0.02 || gy > 0.98) continue;
    // Wandering detour so the video spends time away from the goal, like a
    // mid-training policy.
    const double dxw = rng.uniform(0.1, 0.9), dyw = rng.uniform(0.1, 0.9);
    if (dist(dxw, dyw, goal[0], goal[1]) < 0.25) continue;

    Recorder rec(env, task, env.config().horizon);
    bool success = false, bad = false;
    const bool needs_grasp = task.family != Family::reach;
    auto run_to = [&](double tx, double ty, double grip, double tol) {
      int guard = 0;
      while (!env.done() && !bad) {
        const auto& s = env.state();
        if (dist(s.ax, s.ay, tx, ty) <= tol) return;
        if (++guard > env.config().horizon) { bad = true; return; }
        success = rec.step(env, move_toward(env, tx, ty, grip)).success;
        if (success) { bad = true; return; }
      }
    };

    run_to(dxw, dyw, -1.0, 0.02);
    if (needs_grasp) {
      const auto& obj = env.state().objects[env.target_object()];
      run_to(obj.x, obj.y, -1.0, 0.8 * env.config().grasp_radius);
      if (!bad && !env.done()) success = rec.step(env, {0, 0, 1}).success;
    }
    const double grip = needs_grasp ? 1.0 : -1.0;
    run_to(wx, wy, grip, 0.01);
    run_to(gx, gy, grip, 1e-9);
    // Let go short of the goal, then record the settled final state.
    if (!bad && !success && !env.done()) success = rec.step(env, {0, 0, -1}).success;
    if (!bad && !success && !env.done()) success = rec.step(env, {0, 0, -1}).success;

    if (bad || success || env.done()) continue;
    const double d = env.goal_distance();
    if (d <= eps || d > 2 * eps) continue;
    return rec.finish(false);
  }
  throw generation_error(
      "rollout sets: could not generate category near_success for " +
      task.task_id);
}

RawEpisode classify_policy_rollout(Lang2DEnv& env, const TaskSpec& task,
                                   Rng& rng, const PolicyFn& policy,
                                   std::string* category) {
  env.reset(task, rng);
  Recorder rec(env, task, env.config().horizon);
  bool success = false;
  while (!env.done())
    success = rec.step(env, policy(env.featurize(), env.proprio())).success;
  const double eps = env.config().eps;
  const double d = env.goal_distance();
  if (success)
    *category = "success";
  else if (d > eps && d <= 2 * eps)
    *category = "near_success";
  else if (d > 3 * eps)
    *category = "failure";
  else
    *category = "";
  return rec.finish(success);
}

}  // namespace

RolloutSets generate_rollout_sets(Lang2DEnv& env, const TaskSpec& task, Rng& rng,
                                  const std::vector<PolicyFn>& policies,
                                  int per_category) {
  RolloutSets out;
  if (!policies.empty()) {
    int attempts = 0;
    while ((int(out.failure.size()) < per_category ||
            int(out.near_success.size()) < per_category ||
            int(out.success.size()) < per_category)) {
      if (++attempts > 200 * per_category) {
        std::string missing = int(out.failure.size()) < per_category ? "failure"
                              : int(out.near_success.size()) < per_category
                                  ? "near_success"
                                  : "success";
        throw generation_error("rollout sets: could not generate category " +
                               missing + " for " + task.task_id);
      }
      const auto& policy = policies[attempts % policies.size()];
      std::string cat;
      auto ep = classify_policy_rollout(env, task, rng, policy, &cat);
      if (cat == "failure" && int(out.failure.size()) < per_category)
        out.failure.push_back(std::move(ep));
      else if (cat == "near_success" && int(out.near_success.size()) < per_category)
        out.near_success.push_back(std::move(ep));
      else if (cat == "success" && int(out.success.size()) < per_category)
        out.success.push_back(std::move(ep));
    }
    return out;
  }
  for (int k = 0; k < per_category; ++k) {
    out.failure.push_back(gen_failure(env, task, rng));
    out.near_success.push_back(gen_near_success(env, task, rng));
    out.success.push_back(scripted_expert(env, task, rng));
  }
  return out;
}

data::EmbeddedEpisode embed_episode(const data::RawEpisode& raw,
                                    const data::FrozenEncoder& enc,
                                    const data::Instruction& lang_ref,
                                    const std::string& category) {
  data::EmbeddedEpisode e;
  e.task_id = raw.task_id;
  e.success = raw.success;
  e.category = category;
  e.lang_ref = lang_ref;
  e.proprio = raw.proprio;
  e.actions = raw.actions;
  const int T = raw.length();
  e.obs_embed = data::Mat(T, enc.out_dim());
  for (int t = 0; t < T; ++t)
    enc.encode_into(raw.observations.row(t), e.obs_embed.row(t));
  return e;
}

namespace {

data::Dataset assemble(const std::vector<TaskSpec>& tasks, int per_task,
                       const Lang2DConfig& cfg, const data::EncoderSet& encoders,
                       std::uint64_t seed, const std::string& name,
                       data::DatasetRole role, double noise) {
  data::Dataset ds;
  ds.manifest.name = name;
  ds.manifest.role = role;
  ds.manifest.d_img = encoders.obs.out_dim();
  ds.manifest.d_lang = encoders.lang.out_dim();
  ds.manifest.encoder_seed = encoders.obs.seed();
  Lang2DEnv env(cfg);
  Rng root(seed);
  for (const auto& task : tasks) {
    ds.manifest.tasks.push_back(task.task_id);
    ds.instructions[task.task_id] = task.instructions;
    Rng task_rng = root.fork(fnv1a64(task.task_id));
    for (int k = 0; k < per_task; ++k) {
      auto raw = scripted_expert(env, task, task_rng, noise);
      // Episodes cycle through the task's stored phrasings (one each).
      const auto& ins = task.instructions[k % task.instructions.size()];
      ds.episodes.push_back(embed_episode(raw, encoders.obs, ins));
    }
  }
  ds.manifest.episode_count = int(ds.episodes.size());
  return ds;
}

}  // namespace

data::Dataset build_demo_dataset(const std::vector<TaskSpec>& tasks,
                                 int demos_per_task, const Lang2DConfig& cfg,
                                 const data::EncoderSet& encoders,
                                 std::uint64_t seed, const std::string& name,
                                 data::DatasetRole role, double action_noise) {
  return assemble(tasks, demos_per_task, cfg, encoders, seed, name, role,
                  action_noise);
}

data::Dataset build_openx_proxy(const TaskRegistry& reg, const Lang2DConfig& cfg,
                                const data::EncoderSet& encoders,
                                std::uint64_t seed) {
  return assemble(reg.proxy, 10, cfg, encoders, seed, "openx_proxy",
                  data::DatasetRole::openx_proxy, 0.15);
}

data::Dataset build_rollout_dataset(const std::vector<TaskSpec>& tasks,
                                    const Lang2DConfig& cfg,
                                    const data::EncoderSet& encoders,
                                    std::uint64_t seed,
                                    const std::string& name) {
  data::Dataset ds;
  ds.manifest.name = name;
  ds.manifest.role = data::DatasetRole::rollout_sets;
  ds.manifest.d_img = encoders.obs.out_dim();
  ds.manifest.d_lang = encoders.lang.out_dim();
  ds.manifest.encoder_seed = encoders.obs.seed();
  Lang2DEnv env(cfg);
  Rng root(seed);
  for (const auto& task : tasks) {
    ds.manifest.tasks.push_back(task.task_id);
    ds.instructions[task.task_id] = task.instructions;
    Rng task_rng = root.fork(fnv1a64(task.task_id));
    auto sets = generate_rollout_sets(env, task, task_rng);
    auto push = [&](const std::vector<data::RawEpisode>& eps,
                    const std::string& cat) {
      for (const auto& raw : eps)
        ds.episodes.push_back(embed_episode(raw, encoders.obs,
                                            task.instructions.front(), cat));
    };
    push(sets.failure, "failure");
    push(sets.near_success, "near_success");
    push(sets.success, "success");
  }
  ds.manifest.episode_count = int(ds.episodes.size());
  return ds;
}

}  // namespace rewindrl::lang2d
