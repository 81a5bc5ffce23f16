#pragma once

#include <functional>
#include <vector>

#include "rewind/data/encoders.hpp"
#include "rewind/lang2d/env.hpp"
#include "rewind/lang2d/tasks.hpp"

namespace rewindrl::lang2d {

// Deterministic scripted controller for a registry task, a function of the
// current environment state only.
std::array<double, 3> expert_action(const Lang2DEnv& env);

// Runs the expert to success. action_noise > 0 perturbs each action
// (used by the proxy dataset for behavioral diversity). Throws
// generation_error if the expert fails, which does not happen on registry
// tasks.
data::RawEpisode scripted_expert(Lang2DEnv& env, const data::TaskSpec& task,
                                 Rng& rng, double action_noise = 0.0);

struct RolloutSets {
  std::vector<data::RawEpisode> failure;       // final distance > 3 eps
  std::vector<data::RawEpisode> near_success;  // final distance in (eps, 2 eps]
  std::vector<data::RawEpisode> success;       // success flag true
};

using PolicyFn = std::function<std::array<double, 3>(
    const std::vector<Real>& obs, const std::vector<Real>& proprio)>;

// Two episodes per category. With policies empty, scripted generators are
// used: random actions for failure, detoured offset-goal experts for
// near-success, clean experts for success. With policies given, greedy
// rollouts of each policy are classified by final distance until every
// category is filled.
RolloutSets generate_rollout_sets(Lang2DEnv& env, const data::TaskSpec& task,
                                  Rng& rng,
                                  const std::vector<PolicyFn>& policies = {},
                                  int per_category = 2);

// --- dataset assembly -------------------------------------------------------

data::EmbeddedEpisode embed_episode(const data::RawEpisode& raw,
                                    const data::FrozenEncoder& enc,
                                    const data::Instruction& lang_ref,
                                    const std::string& category = "");

data::Dataset build_demo_dataset(const std::vector<data::TaskSpec>& tasks,
                                 int demos_per_task, const Lang2DConfig& cfg,
                                 const data::EncoderSet& encoders,
                                 std::uint64_t seed, const std::string& name,
                                 data::DatasetRole role,
                                 double action_noise = 0.0);

// Broad 40-task, 10-episode proxy dataset standing in for the curated
// off-the-shelf corpus.
data::Dataset build_openx_proxy(const TaskRegistry& reg, const Lang2DConfig& cfg,
                                const data::EncoderSet& encoders,
                                std::uint64_t seed);

data::Dataset build_rollout_dataset(const std::vector<data::TaskSpec>& tasks,
                                    const Lang2DConfig& cfg,
                                    const data::EncoderSet& encoders,
                                    std::uint64_t seed,
                                    const std::string& name);

}  // namespace rewindrl::lang2d
