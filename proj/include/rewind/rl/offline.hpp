#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rewind/augment/augment.hpp"
#include "rewind/data/encoders.hpp"
#include "rewind/reward/train.hpp"
#include "rewind/rl/policy.hpp"

namespace rewindrl::rl {

// One RL tuple with the flattened net input [obs_embed | proprio | lang].
struct Transition {
  std::vector<Real> state;
  std::vector<Real> next_state;
  std::array<Real, kActionDim> action{};
  double reward = 0;
  bool done = false;     // true terminal: no successor used in targets
  bool success = false;  // episode-level flag, used for buffer routing
};

struct IQLConfig {
  double expectile_tau = 0.7;
  double awr_beta = 3.0;
  double awr_cap = 100.0;
  double gamma = 0.99;
  double lr = 0.001;
  int steps = 20000;
  double success_bonus = 200.0;
  std::vector<int> widths = {256, 256};
  int batch_size = 128;
  int n_critics = 10;
  int m_sample = 2;
  double polyak = 0.005;
  bool layernorm = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(expectile_tau > 0 && expectile_tau < 1))
      throw invalid_input("iql: expectile tau must lie in (0,1)");
    if (awr_cap <= 0) throw invalid_input("iql: awr cap must be positive");
    if (!(gamma > 0 && gamma < 1)) throw invalid_input("iql: gamma in (0,1)");
    if (m_sample > n_critics)
      throw invalid_input("iql: subsample exceeds ensemble size");
  }
};

// |tau - 1[u<0]| * u^2
double expectile_loss(double u, double tau);

// min(exp(beta * (q - v)), cap)
double awr_weight(double q, double v, double beta, double cap);

// Labels successful demos with reward-model progress plus the terminal
// success bonus (per-episode instruction drawn once, via sampler when
// given). model == nullptr labels with the sparse bonus only.
std::vector<Transition> label_offline(
    const data::Dataset& demos, const reward::Aggregator<Real>* model,
    const data::FrozenLanguageEncoder& lang_enc,
    const augment::InstructionSampler* sampler, double r_success, Rng& rng);

struct PolicyCheckpoint {
  IQLConfig config;
  int state_dim = 0;
  std::int64_t step = 0;
  TanhGaussianPolicy policy;
  CriticEnsemble critics;
  nn::Mlp<Real> value;  // V network (offline only)
};

struct IQLResult {
  std::vector<double> v_loss, q_loss, pi_loss;
};

// Expectile-regressed V, Bellman-regressed Q ensemble (bootstrapping V, no
// policy actions in targets), advantage-weighted policy extraction.
// Deterministic under cfg.seed. Throws on divergence (loss > 1e6).
IQLResult iql_pretrain(const std::vector<Transition>& transitions,
                       const IQLConfig& cfg, PolicyCheckpoint& out);

void save_policy_checkpoint(const std::string& path, PolicyCheckpoint& ck);
PolicyCheckpoint load_policy_checkpoint(const std::string& path);

// State assembly helper shared by labeling and the online loop.
std::vector<Real> flatten_state(const Real* obs_embed, int d_img,
                                const Real* proprio, int d_p,
                                const std::vector<Real>& lang);

}  // namespace rewindrl::rl
