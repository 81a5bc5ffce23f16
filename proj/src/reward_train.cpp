#include "rewind/reward/train.hpp"

#include <cmath>
#include <fstream>

#include "rewind/nn/serialize.hpp"

namespace rewindrl::reward {

TrainResult train_reward(Aggregator<Real>& model, const data::Dataset* target,
                         const data::Dataset* proxy,
                         const augment::InstructionSampler* sampler,
                         const data::FrozenLanguageEncoder& lang_enc,
                         const RewardTrainConfig& cfg,
                         const std::string& checkpoint_path) {
  cfg.validate();
  augment::BatchSpec spec = cfg.batch;
  spec.batch_size = cfg.batch_size;
  spec.max_frames = model.config().max_frames;
  augment::BatchComposer composer(target, proxy, spec, &lang_enc, sampler);

  nn::Adam<Real> opt(cfg.lr);
  auto params = model.params();
  Rng rng(cfg.seed);
  TrainResult result;
  result.loss_curve.reserve(cfg.steps);

  for (int step = 0; step < cfg.steps; ++step) {
    const auto batch = composer.compose(rng);
    model.zero_grad();
    double loss = 0;
    std::vector<typename Aggregator<Real>::SeqRef> chunk;
    chunk.reserve(cfg.chunk);
    for (std::size_t b = 0; b < batch.size();) {
      chunk.clear();
      const std::size_t hi = std::min(batch.size(), b + std::size_t(cfg.chunk));
      for (; b < hi; ++b) {
        const auto& el = batch[b];
        chunk.push_back({el.frames.v.data(), el.frames.rows, el.lang.data(),
                         el.targets.data()});
      }
      loss += model.loss_batch(chunk, /*with_grad=*/true);
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("train_reward: non-finite loss at step " +
                               std::to_string(step) + " (seed " +
                               std::to_string(cfg.seed) + ")");
    opt.step(params, 1.0 / double(batch.size()));
    result.loss_curve.push_back(loss / double(batch.size()));

    if (!checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
        (step + 1) % cfg.checkpoint_every == 0) {
      RewardCheckpoint meta{model.config(), step + 1, rng.serialize(), cfg.seed};
      save_reward_checkpoint(checkpoint_path, model, meta);
    }
  }
  return result;
}

std::vector<Real> label_rewards(const Aggregator<Real>& model,
                                const data::Mat& obs_embed,
                                const std::vector<Real>& lang) {
  const int T = obs_embed.rows;
  const int n = model.config().max_frames;
  std::vector<Real> out(T);
  if (T <= n) {
    // One causal pass covers every prefix verbatim.
    const auto r = model.forward(obs_embed.v.data(), T, lang.data());
    for (int t = 0; t < T; ++t) out[t] = r[t];
    return out;
  }
  // Prefixes up to n frames come from a single causal pass; longer prefixes
  // are re-subsampled per step so the newest frame is always included.
  {
    data::Mat head = data::take_rows(obs_embed, data::subsample_indices(n, n));
    const auto r = model.forward(head.v.data(), n, lang.data());
    for (int t = 0; t < n; ++t) out[t] = r[t];
  }
  std::vector<data::Mat> subs;
  std::vector<typename Aggregator<Real>::SeqRef> refs;
  subs.reserve(T - n);
  for (int t = n + 1; t <= T; ++t) {
    subs.push_back(data::take_rows(obs_embed, data::subsample_indices(t, n)));
    refs.push_back({subs.back().v.data(), subs.back().rows, lang.data(), nullptr});
  }
  // Evaluate in bounded slices to keep the packed workspace small.
  const int slice = 64;
  for (std::size_t lo = 0; lo < refs.size(); lo += slice) {
    const std::size_t hi = std::min(refs.size(), lo + slice);
    std::vector<typename Aggregator<Real>::SeqRef> part(refs.begin() + lo,
                                                        refs.begin() + hi);
    const auto rs = model.forward_many(part);
    for (std::size_t i = 0; i < rs.size(); ++i)
      out[n + lo + i] = rs[i].back();
  }
  return out;
}

double video_score_mean(const Aggregator<Real>& model, const data::Mat& obs_embed,
                        const std::vector<Real>& lang, int max_frames) {
  const auto idx = data::subsample_indices(obs_embed.rows, max_frames);
  const auto sub = data::take_rows(obs_embed, idx);
  const auto r = model.forward(sub.v.data(), sub.rows, lang.data());
  double s = 0;
  for (const auto v : r) s += v;
  return s / double(r.size());
}

namespace {

constexpr std::uint32_t kRewardMagic = 0x4d525752;  // "RWRM"

std::map<std::string, std::string> config_kv(const AggregatorConfig& c) {
  return {
      {"d_img", std::to_string(c.d_img)},
      {"d_lang", std::to_string(c.d_lang)},
      {"hidden", std::to_string(c.hidden)},
      {"layers", std::to_string(c.layers)},
      {"heads", std::to_string(c.heads)},
      {"ff", std::to_string(c.ff)},
      {"max_frames", std::to_string(c.max_frames)},
      {"pos_mode", pos_mode_name(c.pos_mode)},
      {"squash", squash_name(c.squash)},
  };
}

AggregatorConfig config_from_kv(const std::map<std::string, std::string>& kv) {
  AggregatorConfig c;
  c.d_img = std::stoi(kv.at("d_img"));
  c.d_lang = std::stoi(kv.at("d_lang"));
  c.hidden = std::stoi(kv.at("hidden"));
  c.layers = std::stoi(kv.at("layers"));
  c.heads = std::stoi(kv.at("heads"));
  c.ff = std::stoi(kv.at("ff"));
  c.max_frames = std::stoi(kv.at("max_frames"));
  c.pos_mode = pos_mode_from_name(kv.at("pos_mode"));
  c.squash = squash_from_name(kv.at("squash"));
  return c;
}

}  // namespace

void save_reward_checkpoint(const std::string& path, Aggregator<Real>& model,
                            const RewardCheckpoint& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  nn::write_u32(f, kRewardMagic);
  nn::write_u32(f, 1);
  nn::write_kv(f, config_kv(model.config()));
  nn::write_u64(f, std::uint64_t(meta.step));
  nn::write_str(f, meta.rng_state);
  nn::write_u64(f, meta.init_seed);
  nn::write_params(f, model.params());
  if (!f) throw std::runtime_error("short write on checkpoint " + path);
}

RewardCheckpoint load_reward_checkpoint(const std::string& path,
                                        Aggregator<Real>& model) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw corruption_error("cannot open checkpoint " + path);
  if (nn::read_u32(f, "magic") != kRewardMagic)
    throw corruption_error("not a reward checkpoint: " + path);
  if (nn::read_u32(f, "version") != 1)
    throw corruption_error("unsupported checkpoint version in " + path);
  RewardCheckpoint meta;
  meta.config = config_from_kv(nn::read_kv(f));
  meta.step = std::int64_t(nn::read_u64(f, "step"));
  meta.rng_state = nn::read_str(f, "rng state");
  meta.init_seed = nn::read_u64(f, "init seed");
  model = Aggregator<Real>(meta.config, meta.init_seed);
  auto params = model.params();
  nn::read_params(f, params);
  return meta;
}

}  // namespace rewindrl::reward
