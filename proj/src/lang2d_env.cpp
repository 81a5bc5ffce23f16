#include "rewind/lang2d/env.hpp"

#include <algorithm>
#include <cmath>

namespace rewindrl::lang2d {

using data::Family;
using data::TaskSpec;

const std::vector<std::string> kColors = {"red",    "green", "blue", "yellow",
                                          "purple", "orange", "cyan", "pink"};
const std::vector<std::string> kShapes = {"block", "ball", "star", "ring"};

int color_index(const std::string& c) {
  for (int i = 0; i < int(kColors.size()); ++i)
    if (kColors[i] == c) return i;
  throw invalid_input("lang2d: unknown color " + c);
}

int shape_index(const std::string& s) {
  for (int i = 0; i < int(kShapes.size()); ++i)
    if (kShapes[i] == s) return i;
  throw invalid_input("lang2d: unknown shape " + s);
}

namespace {

double dist(double x0, double y0, double x1, double y1) {
  return std::hypot(x1 - x0, y1 - y0);
}

std::array<double, 2> direction_vector(const std::string& dir) {
  if (dir == "left") return {-1, 0};
  if (dir == "right") return {1, 0};
  if (dir == "up") return {0, 1};
  if (dir == "down") return {0, -1};
  throw invalid_input("lang2d: unknown direction " + dir);
}

std::array<double, 2> bin_location(const std::string& dir) {
  if (dir == "left") return {0.10, 0.5};
  if (dir == "right") return {0.90, 0.5};
  if (dir == "up") return {0.5, 0.90};
  if (dir == "down") return {0.5, 0.10};
  throw invalid_input("lang2d: unknown bin direction " + dir);
}

constexpr double kPushDist = 0.25;

}  // namespace

Lang2DEnv::Lang2DEnv(Lang2DConfig cfg) : cfg_(cfg) { cfg_.validate(); }

int Lang2DEnv::obs_dim(const Lang2DConfig& cfg) {
  const int channels = 2 + int(kColors.size()) + int(kShapes.size());
  return cfg.grid * cfg.grid * channels + 3 + 3 * int(kColors.size());
}

void Lang2DEnv::place_scene(Rng& rng) {
  const double eps = cfg_.eps;
  for (int attempt = 0; attempt < 200; ++attempt) {
    state_ = Lang2DState{};
    state_.ax = rng.uniform(0.15, 0.85);
    state_.ay = rng.uniform(0.15, 0.85);
    state_.gripper = 0;

    ObjectState target;
    target.color = color_index(task_.color);
    target.shape = shape_index(task_.shape);
    switch (task_.family) {
      case Family::reach: {
        target.x = rng.uniform(0.12, 0.88);
        target.y = rng.uniform(0.12, 0.88);
        goal_x_ = target.x;
        goal_y_ = target.y;
        // Demos degenerate to a couple of frames when the agent spawns next
        // to the target; keep reach starts at least 0.3 away.
        if (std::hypot(state_.ax - target.x, state_.ay - target.y) < 0.3)
          continue;
        break;
      }
      case Family::push:
      case Family::pull: {
        // Both families displace the object along the named direction; they
        // differ in phrasing, not goal geometry (attachment kinematics have
        // no contact sides to distinguish).
        const auto d = direction_vector(task_.direction);
        // Keep the displaced goal point inside the box.
        const double lo = 0.10, hi = 0.90;
        double xlo = lo, xhi = hi, ylo = lo, yhi = hi;
        if (d[0] > 0) xhi = hi - kPushDist;
        if (d[0] < 0) xlo = lo + kPushDist;
        if (d[1] > 0) yhi = hi - kPushDist;
        if (d[1] < 0) ylo = lo + kPushDist;
        target.x = rng.uniform(xlo, xhi);
        target.y = rng.uniform(ylo, yhi);
        goal_x_ = target.x + kPushDist * d[0];
        goal_y_ = target.y + kPushDist * d[1];
        break;
      }
      case Family::pick_place: {
        const auto bin = bin_location(task_.direction);
        goal_x_ = bin[0];
        goal_y_ = bin[1];
        target.x = rng.uniform(0.15, 0.85);
        target.y = rng.uniform(0.15, 0.85);
        if (dist(target.x, target.y, goal_x_, goal_y_) < 0.25) continue;
        break;
      }
    }
    state_.objects.clear();
    state_.objects.push_back(target);
    target_obj_ = 0;

    // Two distractor objects with distinct colors.
    std::vector<int> used_colors = {target.color};
    bool ok = true;
    for (int k = 0; k < 2 && ok; ++k) {
      ObjectState obj;
      for (int tries = 0;; ++tries) {
        if (tries >= 50) { ok = false; break; }
        obj.color = int(rng.uniform_int(std::uint64_t(kColors.size())));
        if (std::count(used_colors.begin(), used_colors.end(), obj.color)) continue;
        obj.shape = int(rng.uniform_int(std::uint64_t(kShapes.size())));
        obj.x = rng.uniform(0.08, 0.92);
        obj.y = rng.uniform(0.08, 0.92);
        bool clear = dist(obj.x, obj.y, goal_x_, goal_y_) > 3 * eps + 0.02;
        for (const auto& other : state_.objects)
          clear = clear && dist(obj.x, obj.y, other.x, other.y) > 0.12;
        if (clear) break;
      }
      if (!ok) break;
      used_colors.push_back(obj.color);
      state_.objects.push_back(obj);
    }
    if (!ok) continue;

    // Non-degenerate start: nothing begins anywhere near success.
    if (goal_distance() <= 3 * eps) continue;
    if (task_.family != Family::reach &&
        dist(state_.ax, state_.ay, state_.objects[0].x, state_.objects[0].y) <
            cfg_.grasp_radius)
      continue;
    return;
  }
  throw generation_error("lang2d: could not place scene for " + task_.task_id);
}

std::vector<Real> Lang2DEnv::reset(const TaskSpec& task, Rng& rng) {
  task_ = task;
  have_task_ = true;
  place_scene(rng);
  state_.step = 0;
  done_ = false;
  return featurize();
}

double Lang2DEnv::goal_distance() const {
  const auto& obj = state_.objects[target_obj_];
  switch (task_.family) {
    case Family::reach:
      return dist(state_.ax, state_.ay, obj.x, obj.y);
    case Family::push:
    case Family::pull:
      return dist(obj.x, obj.y, goal_x_, goal_y_);
    case Family::pick_place: {
      const double d = dist(obj.x, obj.y, goal_x_, goal_y_);
      return d;
    }
  }
  return 1.0;
}

bool Lang2DEnv::success_now() const {
  if (task_.family == Family::pick_place)
    return goal_distance() <= cfg_.eps && !state_.objects[target_obj_].held;
  return goal_distance() <= cfg_.eps;
}

Lang2DEnv::StepResult Lang2DEnv::step(const std::array<double, 3>& action) {
  if (!have_task_) throw invalid_input("lang2d: step before reset");
  if (done_) throw invalid_input("lang2d: step after episode done");

  const double dx = std::clamp(action[0], -1.0, 1.0);
  const double dy = std::clamp(action[1], -1.0, 1.0);
  const double g = std::clamp(action[2], -1.0, 1.0);

  state_.ax = std::clamp(state_.ax + cfg_.action_scale * dx, 0.0, 1.0);
  state_.ay = std::clamp(state_.ay + cfg_.action_scale * dy, 0.0, 1.0);
  state_.gripper = (g + 1.0) / 2.0;

  int held = -1;
  for (int i = 0; i < int(state_.objects.size()); ++i)
    if (state_.objects[i].held) held = i;

  if (held >= 0 && state_.gripper <= 0.4) {
    state_.objects[held].held = false;
    held = -1;
  }
  if (held < 0 && state_.gripper >= 0.6) {
    int best = -1;
    double best_d = cfg_.grasp_radius;
    for (int i = 0; i < int(state_.objects.size()); ++i) {
      const double d = dist(state_.ax, state_.ay, state_.objects[i].x,
                            state_.objects[i].y);
      if (d <= best_d) {
        best = i;
        best_d = d;
      }
    }
    if (best >= 0) {
      state_.objects[best].held = true;
      held = best;
    }
  }
  if (held >= 0) {
    state_.objects[held].x = state_.ax;
    state_.objects[held].y = state_.ay;
  }

  ++state_.step;
  const bool success = success_now();
  done_ = success || state_.step >= cfg_.horizon;
  return {featurize(), success, done_};
}

std::vector<Real> Lang2DEnv::featurize() const {
  const int G = cfg_.grid;
  const int n_colors = int(kColors.size());
  const int n_shapes = int(kShapes.size());
  const int channels = 2 + n_colors + n_shapes;
  std::vector<Real> f(std::size_t(obs_dim(cfg_)), Real(0));

  // Bilinear splat of a unit mass at (x, y) into channel c of the grid.
  auto splat = [&](double x, double y, int c) {
    const double u = std::clamp(x, 0.0, 1.0) * (G - 1);
    const double v = std::clamp(y, 0.0, 1.0) * (G - 1);
    const int u0 = std::min(int(u), G - 2);
    const int v0 = std::min(int(v), G - 2);
    const double fu = u - u0, fv = v - v0;
    auto put = [&](int ui, int vi, double w) {
      f[std::size_t(c) * G * G + std::size_t(vi) * G + ui] += Real(w);
    };
    put(u0, v0, (1 - fu) * (1 - fv));
    put(u0 + 1, v0, fu * (1 - fv));
    put(u0, v0 + 1, (1 - fu) * fv);
    put(u0 + 1, v0 + 1, fu * fv);
  };

  splat(state_.ax, state_.ay, 0);
  for (const auto& obj : state_.objects) {
    if (obj.held) splat(obj.x, obj.y, 1);
    splat(obj.x, obj.y, 2 + obj.color);
    splat(obj.x, obj.y, 2 + n_colors + obj.shape);
  }

  std::size_t off = std::size_t(channels) * G * G;
  f[off + 0] = Real(state_.ax);
  f[off + 1] = Real(state_.ay);
  f[off + 2] = Real(state_.gripper);
  off += 3;
  // Per-color object slot: (x, y, present). Scenes keep colors distinct.
  for (const auto& obj : state_.objects) {
    const std::size_t base = off + std::size_t(obj.color) * 3;
    f[base + 0] = Real(obj.x);
    f[base + 1] = Real(obj.y);
    f[base + 2] = Real(1);
  }
  return f;
}

std::vector<Real> Lang2DEnv::proprio() const {
  return {Real(state_.ax), Real(state_.ay), Real(state_.gripper)};
}

std::array<double, 3> Lang2DEnv::decode_agent(const Lang2DConfig& cfg,
                                              const Real* obs) {
  const int channels = 2 + int(kColors.size()) + int(kShapes.size());
  const std::size_t off = std::size_t(channels) * cfg.grid * cfg.grid;
  return {double(obs[off]), double(obs[off + 1]), double(obs[off + 2])};
}

std::array<double, 3> Lang2DEnv::decode_color_slot(const Lang2DConfig& cfg,
                                                   const Real* obs, int color) {
  const int channels = 2 + int(kColors.size()) + int(kShapes.size());
  const std::size_t off =
      std::size_t(channels) * cfg.grid * cfg.grid + 3 + std::size_t(color) * 3;
  return {double(obs[off]), double(obs[off + 1]), double(obs[off + 2])};
}

}  // namespace rewindrl::lang2d
