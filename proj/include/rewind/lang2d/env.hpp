#pragma once

#include <array>
#include <string>
#include <vector>

#include "rewind/data/types.hpp"
#include "rewind/rng.hpp"

namespace rewindrl::lang2d {

// Object palette shared by the target and proxy registries.
extern const std::vector<std::string> kColors;  // 8
extern const std::vector<std::string> kShapes;  // 4

int color_index(const std::string& color);
int shape_index(const std::string& shape);

struct Lang2DConfig {
  int horizon = 128;
  double eps = 0.03;          // success tolerance, box units
  double action_scale = 0.05;
  double grasp_radius = 0.06;
  int grid = 6;               // featurization grid resolution

  void validate() const {
    if (horizon < 2) throw invalid_input("lang2d: horizon must be >= 2");
    if (eps <= 0) throw invalid_input("lang2d: eps must be > 0");
  }
};

struct ObjectState {
  int color = 0;
  int shape = 0;
  double x = 0, y = 0;
  bool held = false;
};

struct Lang2DState {
  double ax = 0.5, ay = 0.5;  // agent position in the unit box
  double gripper = 0;         // [0, 1]
  std::vector<ObjectState> objects;
  int step = 0;
};

// Deterministic kinematic tabletop. Action = (dx, dy, gripper) in [-1,1]^3;
// the agent moves by action_scale * (dx, dy), a closed gripper grabs the
// nearest object within grasp_radius, and a held object follows the agent.
class Lang2DEnv {
 public:
  explicit Lang2DEnv(Lang2DConfig cfg = {});

  std::vector<Real> reset(const data::TaskSpec& task, Rng& rng);

  struct StepResult {
    std::vector<Real> obs;
    bool success = false;
    bool done = false;
  };
  StepResult step(const std::array<double, 3>& action);

  const Lang2DState& state() const { return state_; }
  const Lang2DConfig& config() const { return cfg_; }
  const data::TaskSpec& task() const { return task_; }
  bool done() const { return done_; }

  // Scalar distance-to-goal used by success (<= eps) and by the rollout-set
  // category definitions.
  double goal_distance() const;
  bool success_now() const;
  std::array<double, 2> goal_point() const { return {goal_x_, goal_y_}; }
  int target_object() const { return target_obj_; }

  std::vector<Real> featurize() const;
  std::vector<Real> proprio() const;

  static int obs_dim(const Lang2DConfig& cfg);

  // Readback of the exact scalar slots inside a featurized observation
  // (agent pose and per-color object slots); used by evaluation checks.
  static std::array<double, 3> decode_agent(const Lang2DConfig& cfg,
                                            const Real* obs);
  static std::array<double, 3> decode_color_slot(const Lang2DConfig& cfg,
                                                 const Real* obs, int color);

 private:
  void place_scene(Rng& rng);

  Lang2DConfig cfg_;
  data::TaskSpec task_;
  Lang2DState state_;
  double goal_x_ = 0.5, goal_y_ = 0.5;
  int target_obj_ = 0;
  bool done_ = true;
  bool have_task_ = false;
};

}  // namespace rewindrl::lang2d
