#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rewind/augment/augment.hpp"
#include "rewind/reward/aggregator.hpp"

namespace rewindrl::reward {

// Eq.-style losses. Sums of squared error over frames (no averaging).
// with_grad accumulates into the model's parameter gradients.

// Matched-progress term plus mismatched zero-progress term.
template <class T>
double progress_loss(Aggregator<T>& model, const T* frames, int t, const T* lang,
                     const T* other_frames, int other_t, bool with_grad = false) {
  std::vector<T> targets(t), zeros(other_t, T(0));
  for (int i = 1; i <= t; ++i) targets[i - 1] = T(double(i) / t);
  std::vector<typename Aggregator<T>::SeqRef> seqs;
  seqs.push_back({frames, t, lang, targets.data()});
  if (other_frames && other_t > 0)
    seqs.push_back({other_frames, other_t, lang, zeros.data()});
  return model.loss_batch(seqs, with_grad);
}

// Squared error against the rewound-target schedule of a RewindSample.
template <class T>
double rewind_loss(Aggregator<T>& model, const T* frames, int n_frames,
                   const T* targets, const T* lang, bool with_grad = false) {
  std::vector<typename Aggregator<T>::SeqRef> seqs;
  seqs.push_back({frames, n_frames, lang, targets});
  return model.loss_batch(seqs, with_grad);
}

inline double rewind_loss(Aggregator<Real>& model,
                          const augment::RewindSample& rs,
                          const std::vector<Real>& lang, bool with_grad = false) {
  return rewind_loss(model, rs.frames.v.data(), rs.frames.rows,
                     rs.targets.data(), lang.data(), with_grad);
}

struct RewardTrainConfig {
  int steps = 2000;
  int batch_size = 256;
  double lr = 0.001;
  std::uint64_t seed = 0;
  augment::BatchSpec batch;
  int checkpoint_every = 0;  // 0: only the final checkpoint is written
  int chunk = 128;           // elements per packed forward/backward

  void validate() const {
    if (steps < 0) throw invalid_input("train_reward: steps must be >= 0");
    if (batch_size < 1) throw invalid_input("train_reward: batch_size >= 1");
  }
};

struct TrainResult {
  std::vector<double> loss_curve;  // mean per-element loss per step
};

// Minimizes the expected progress + rewind objective over compose_batch
// draws. Deterministic under fixed seed. Throws on NaN loss with step and
// seed diagnostics.
TrainResult train_reward(Aggregator<Real>& model, const data::Dataset* target,
                         const data::Dataset* proxy,
                         const augment::InstructionSampler* sampler,
                         const data::FrozenLanguageEncoder& lang_enc,
                         const RewardTrainConfig& cfg,
                         const std::string& checkpoint_path = "");

// Per-timestep rewards for a full episode: input at step t is the 16-frame
// even subsampling of o_{1:t}, always containing o_t. Output length T.
std::vector<Real> label_rewards(const Aggregator<Real>& model,
                                const data::Mat& obs_embed,
                                const std::vector<Real>& lang);

// Mean per-frame reward of a video under an instruction (the scalar video
// score used by the evaluation suite).
double video_score_mean(const Aggregator<Real>& model, const data::Mat& obs_embed,
                        const std::vector<Real>& lang, int max_frames);

// ---- checkpoint io ---------------------------------------------------------

struct RewardCheckpoint {
  AggregatorConfig config;
  std::int64_t step = 0;
  std::string rng_state;
  std::uint64_t init_seed = 0;
};

void save_reward_checkpoint(const std::string& path, Aggregator<Real>& model,
                            const RewardCheckpoint& meta);
RewardCheckpoint load_reward_checkpoint(const std::string& path,
                                        Aggregator<Real>& model);

}  // namespace rewindrl::reward
