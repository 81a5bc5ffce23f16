#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rewind/lang2d/rollouts.hpp"
#include "rewind/rl/offline.hpp"

namespace rewindrl::rl {

struct OnlineConfig {
  int total_steps = 20000;
  int warm_start_steps = 1000;
  int n_critics = 10;
  int m_sample = 2;
  int utd = 4;  // critic updates per environment step
  double success_bonus = 200.0;
  double gamma = 0.99;
  double lr = 0.001;
  double polyak = 0.005;
  int batch_size = 128;
  // Buffer mixing; all zero means uniform over collected online data
  // (the simulation variant). The KL variant uses 0.5/0.25/0.25.
  double offline_frac = 0.0;
  double online_fail_frac = 0.0;
  double online_success_frac = 0.0;
  double kl_alpha = 0.0;  // 0 disables the pretrained-policy KL terms
  bool entropy_in_target = false;
  double init_log_alpha_ent = std::log(0.1);
  bool autotune_entropy = true;
  bool sparse_only = false;  // baseline: success bonus only, no reward model
  int eval_every = 1000;
  int eval_episodes = 10;
  int buffer_capacity = 100000;
  std::uint64_t seed = 0;

  bool mixing_enabled() const {
    return offline_frac > 0 || online_fail_frac > 0 || online_success_frac > 0;
  }
  void validate() const {
    if (m_sample > n_critics)
      throw invalid_input("online: subsample exceeds ensemble size");
    if (mixing_enabled()) {
      const double s = offline_frac + online_fail_frac + online_success_frac;
      if (std::abs(s - 1.0) > 1e-9)
        throw invalid_input("online: buffer fractions must sum to 1");
    }
  }
};

// Partitioned store: offline data plus online episodes routed by their
// success flag. Sampling honors the configured fractions in expectation,
// falling back to the first non-empty partition in fixed order.
class ReplayBuffer {
 public:
  enum Partition { kOffline = 0, kOnlineFailure = 1, kOnlineSuccess = 2 };

  explicit ReplayBuffer(int capacity_per_partition = 100000)
      : capacity_(capacity_per_partition) {}

  void push_offline(const std::vector<Transition>& ts) {
    for (const auto& t : ts) push(kOffline, t);
  }
  // Routes a completed episode by its success flag.
  void push_episode(const std::vector<Transition>& episode, bool success) {
    for (auto t : episode) {
      t.success = success;
      push(success ? kOnlineSuccess : kOnlineFailure, t);
    }
  }

  std::size_t size(Partition p) const { return store_[p].size(); }
  std::size_t total() const {
    return store_[0].size() + store_[1].size() + store_[2].size();
  }
  const Transition& at(Partition p, std::size_t i) const { return store_[p][i]; }

  // Draws one transition. With mixing: partition by the configured
  // fractions; otherwise uniform over the online partitions.
  const Transition& sample(const OnlineConfig& cfg, Rng& rng,
                           Partition* chosen = nullptr) const;

 private:
  void push(Partition p, const Transition& t) {
    auto& s = store_[p];
    if (int(s.size()) >= capacity_) s.pop_front();
    s.push_back(t);
  }
  int capacity_;
  std::deque<Transition> store_[3];
};

// Eq.-5 style online reward: progress of the frame prefix under the new
// instruction plus the success bonus; the sparse baseline drops the model
// term.
double online_reward(const reward::Aggregator<Real>* model,
                     const data::Mat& prefix_obs, const std::vector<Real>& lang,
                     bool success_at_t, double bonus);

// One SAC update pass (critic target assembly, ensemble regression, actor
// step with optional KL-to-pretrained regularization, entropy temperature
// autotuning). Public so the update math can be driven directly in tests.
class SacTrainer {
 public:
  SacTrainer(TanhGaussianPolicy& policy, CriticEnsemble& critics,
             const TanhGaussianPolicy* pretrained, const OnlineConfig& cfg);

  struct CriticDiag {
    std::vector<double> targets;
    double loss = 0;
    double mean_kl_next = 0;
  };
  struct ActorDiag {
    double loss = 0;
    double mean_log_prob = 0;
    double mean_kl = 0;
    double alpha_ent = 0;
  };

  CriticDiag critic_update(const std::vector<const Transition*>& batch, Rng& rng);
  ActorDiag actor_update(const std::vector<const Transition*>& batch, Rng& rng);

  double alpha_ent() const { return std::exp(log_alpha_ent_); }
  // Mean closed-form KL(pi || pi_pretrained) over a probe state set.
  double mean_kl_to_pretrained(const std::vector<std::vector<Real>>& states) const;

 private:
  TanhGaussianPolicy& policy_;
  CriticEnsemble& critics_;
  const TanhGaussianPolicy* pretrained_;
  OnlineConfig cfg_;
  nn::Adam<Real> pi_opt_, q_opt_;
  std::vector<nn::Param<Real>*> pi_params_, q_params_;
  double log_alpha_ent_;
  double target_entropy_;
};

struct CurvePoint {
  int step = 0;
  double success_rate = 0;
  double mean_return = 0;
};

struct OnlineResult {
  std::vector<CurvePoint> curve;
  double zero_shot_success = 0;
  double final_success = 0;
  int env_steps = 0;
};

using StepCallback = std::function<void(int step, double success_rate)>;

// Online SAC fine-tuning of a pretrained checkpoint on one task.
// - warm start: cfg.warm_start_steps of frozen-policy collection, no updates
// - critic targets: min over m of N target critics, entropy excluded unless
//   configured, KL-to-pretrained subtracted when kl_alpha > 0
// - cfg.utd critic updates then one actor update per environment step
// Serial and deterministic under cfg.seed.
OnlineResult run_online(lang2d::Lang2DEnv& env, const data::TaskSpec& task,
                        PolicyCheckpoint& ck,
                        const reward::Aggregator<Real>* reward_model,
                        const data::EncoderSet& encoders,
                        const std::vector<Transition>& offline_data,
                        const OnlineConfig& cfg,
                        std::vector<std::string>* log = nullptr);

// Greedy evaluation: fraction of successful episodes.
double evaluate_policy(lang2d::Lang2DEnv& env, const data::TaskSpec& task,
                       const TanhGaussianPolicy& policy,
                       const data::EncoderSet& encoders,
                       const std::vector<Real>& lang, int episodes, Rng& rng,
                       double* mean_return = nullptr,
                       const reward::Aggregator<Real>* reward_model = nullptr,
                       double success_bonus = 0.0);

}  // namespace rewindrl::rl
