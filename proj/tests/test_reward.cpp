#include <doctest.h>

#include <cmath>

#include <filesystem>

#include "rewind/reward/train.hpp"

using namespace rewindrl;
using namespace rewindrl::reward;

namespace {

AggregatorConfig tiny_config() {
  AggregatorConfig c;
  c.d_img = 6;
  c.d_lang = 4;
  c.hidden = 8;
  c.layers = 2;
  c.heads = 2;
  c.ff = 16;
  c.max_frames = 8;
  return c;
}

template <class T>
std::vector<T> random_vec(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<T> v(n);
  for (auto& x : v) x = T(rng.uniform(-scale, scale));
  return v;
}

}  // namespace

TEST_CASE("zero head with logistic squashing outputs exactly 0.5") {
  Aggregator<float> model(tiny_config(), 1);
  Rng rng(2);
  auto frames = random_vec<float>(5 * 6, rng);
  auto lang = random_vec<float>(4, rng);
  for (float r : model.forward(frames.data(), 5, lang.data()))
    CHECK(r == 0.5f);
}

TEST_CASE("causality: later frames never change earlier rewards") {
  Aggregator<float> model(tiny_config(), 3);
  // Skew the head so outputs are non-trivial.
  {
    Rng wr(9);
    auto params = model.params();
    for (auto* p : params)
      if (p->name == "agg.wh2")
        for (auto& x : p->w) x = float(wr.uniform(-0.5, 0.5));
  }
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int T = 3 + int(rng.uniform_int(6));
    auto frames = random_vec<float>(std::size_t(T) * 6, rng);
    auto lang = random_vec<float>(4, rng);
    const auto base = model.forward(frames.data(), T, lang.data());
    const int t = 1 + int(rng.uniform_int(std::uint64_t(T - 1)));
    auto perturbed = frames;
    for (int r = t; r < T; ++r)
      for (int c = 0; c < 6; ++c)
        perturbed[std::size_t(r) * 6 + c] += float(rng.uniform(-2, 2));
    const auto after = model.forward(perturbed.data(), T, lang.data());
    for (int s = 0; s < t; ++s) CHECK(after[s] == base[s]);
  }
}

TEST_CASE("constant-output progress loss matches the closed form") {
  // Zero-initialized head outputs exactly 0.5; with T=2 and no mismatch term
  // the loss is (c - 1/2)^2 + (c - 1)^2 at c = 0.5.
  Aggregator<float> model(tiny_config(), 5);
  Rng rng(6);
  auto frames = random_vec<float>(2 * 6, rng);
  auto lang = random_vec<float>(4, rng);
  const double loss =
      progress_loss<float>(model, frames.data(), 2, lang.data(), nullptr, 0);
  CHECK(loss == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("progress and rewind losses match finite differences") {
  using T = double;
  Aggregator<T> model(tiny_config(), 7);
  // Give the head nonzero output weights so its gradient path is exercised.
  {
    Rng wr(8);
    for (auto* p : model.params())
      if (p->name == "agg.wh2" || p->name == "agg.bh2")
        for (auto& x : p->w) x = wr.uniform(-0.3, 0.3);
  }
  Rng rng(9);
  const int t = 5, other_t = 4;
  auto frames = random_vec<T>(std::size_t(t) * 6, rng);
  auto other = random_vec<T>(std::size_t(other_t) * 6, rng);
  auto lang = random_vec<T>(4, rng);

  // Rewound sample: i=4, k=2 over the 5-frame clip (T=5 denominators).
  const int ri = 4, rk = 2;
  std::vector<T> rframes;
  std::vector<T> rtargets;
  for (int f = 1; f <= ri; ++f) {
    rframes.insert(rframes.end(), frames.begin() + (f - 1) * 6,
                   frames.begin() + f * 6);
    rtargets.push_back(T(f) / t);
  }
  for (int j = 1; j <= rk; ++j) {
    const int src = ri - j;
    rframes.insert(rframes.end(), frames.begin() + (src - 1) * 6,
                   frames.begin() + src * 6);
    rtargets.push_back(T(ri - j) / t);
  }

  for (int which = 0; which < 2; ++which) {
    auto loss_fn = [&](bool with_grad) {
      return which == 0
                 ? progress_loss(model, frames.data(), t, lang.data(),
                                 other.data(), other_t, with_grad)
                 : rewind_loss(model, rframes.data(), ri + rk, rtargets.data(),
                               lang.data(), with_grad);
    };
    model.zero_grad();
    loss_fn(true);
    auto params = model.params();
    const T h = 1e-6;
    double max_rel = 0;
    for (auto* p : params) {
      for (std::size_t j = 0; j < p->size(); ++j) {
        const T w0 = p->w[j];
        p->w[j] = w0 + h;
        const double lp = loss_fn(false);
        p->w[j] = w0 - h;
        const double lm = loss_fn(false);
        p->w[j] = w0;
        const double fd = (lp - lm) / (2 * h);
        const double rel =
            std::abs(fd - double(p->g[j])) / std::max(1.0, std::abs(fd));
        max_rel = std::max(max_rel, rel);
      }
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("rewind loss equals the squared error against the target vector") {
  Aggregator<float> model(tiny_config(), 10);
  Rng rng(11);
  const int T = 7;
  data::Mat seq(T, 6);
  for (auto& x : seq.v) x = Real(rng.uniform(-1, 1));
  auto lang = random_vec<float>(4, rng);
  auto rs = augment::rewind_augment(seq, rng, augment::RewindMode::to_end);

  const double loss = rewind_loss(model, rs, lang, false);
  const auto out =
      model.forward(rs.frames.v.data(), rs.frames.rows, lang.data());
  double oracle = 0;
  for (int i = 0; i < rs.frames.rows; ++i) {
    const float d = out[i] - rs.targets[i];
    oracle += double(d) * double(d);
  }
  CHECK(loss == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("batch loss decomposes into per-element losses") {
  Aggregator<float> model(tiny_config(), 12);
  Rng rng(13);
  std::vector<std::vector<float>> frames, targets;
  std::vector<std::vector<float>> langs;
  std::vector<Aggregator<float>::SeqRef> seqs;
  for (int e = 0; e < 9; ++e) {
    const int t = 2 + int(rng.uniform_int(6));
    frames.push_back(random_vec<float>(std::size_t(t) * 6, rng));
    langs.push_back(random_vec<float>(4, rng));
    std::vector<float> tg(t);
    for (int i = 0; i < t; ++i) tg[i] = float(rng.uniform(0, 1));
    targets.push_back(tg);
    seqs.push_back({frames.back().data(), t, langs.back().data(),
                    targets.back().data()});
  }
  const double total = model.loss_batch(seqs, false);
  double sum = 0;
  for (const auto& s : seqs) sum += model.loss_batch({s}, false);
  CHECK(total == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("positional modes expose the expected parameter structure") {
  auto cfg = tiny_config();
  cfg.pos_mode = PosMode::first_frame;
  CHECK(Aggregator<float>(cfg, 1).n_positional_vectors() == 1);
  cfg.pos_mode = PosMode::full;
  CHECK(Aggregator<float>(cfg, 1).n_positional_vectors() == cfg.max_seq());
  cfg.pos_mode = PosMode::none;
  CHECK(Aggregator<float>(cfg, 1).n_positional_vectors() == 0);
}

TEST_CASE("sequence length cap is enforced") {
  auto cfg = tiny_config();
  Aggregator<float> model(cfg, 1);
  Rng rng(14);
  const int t = cfg.max_seq() + 1;
  auto frames = random_vec<float>(std::size_t(t) * 6, rng);
  auto lang = random_vec<float>(4, rng);
  CHECK_THROWS_AS(model.forward(frames.data(), t, lang.data()), invalid_input);
}

namespace {

data::Dataset toy_dataset(const std::string& name, data::DatasetRole role,
                          int n_tasks, int per_task, std::uint64_t seed) {
  data::Dataset ds;
  ds.manifest.name = name;
  ds.manifest.role = role;
  ds.manifest.d_img = 6;
  ds.manifest.d_lang = 4;
  ds.manifest.encoder_seed = seed;
  Rng rng(seed);
  for (int t = 0; t < n_tasks; ++t) {
    const std::string task = name + std::to_string(t);
    ds.manifest.tasks.push_back(task);
    data::Instruction ins{task, "move the thing " + std::to_string(t),
                          data::Origin::original};
    ds.instructions[task].push_back(ins);
    for (int e = 0; e < per_task; ++e) {
      data::EmbeddedEpisode ep;
      ep.task_id = task;
      ep.lang_ref = ins;
      ep.success = true;
      const int T = 8 + int(rng.uniform_int(10));
      ep.obs_embed = data::Mat(T, 6);
      ep.proprio = data::Mat(T, 3);
      ep.actions = data::Mat(T, 3);
      for (auto& x : ep.obs_embed.v) x = Real(rng.uniform(-1, 1));
      ds.episodes.push_back(std::move(ep));
    }
  }
  ds.manifest.episode_count = int(ds.episodes.size());
  return ds;
}

}  // namespace

TEST_CASE("train_reward: zero steps leaves parameters untouched") {
  auto cfg = tiny_config();
  Aggregator<float> model(cfg, 20);
  const auto before = model.params_hash();
  auto target = toy_dataset("t", data::DatasetRole::target_demos, 3, 2, 1);
  auto proxy = toy_dataset("p", data::DatasetRole::openx_proxy, 4, 2, 2);
  data::FrozenLanguageEncoder lang_enc(4, 3);
  RewardTrainConfig tc;
  tc.steps = 0;
  tc.batch_size = 8;
  train_reward(model, &target, &proxy, nullptr, lang_enc, tc);
  CHECK(model.params_hash() == before);
}

TEST_CASE("train_reward decreases the loss and is deterministic") {
  auto cfg = tiny_config();
  auto target = toy_dataset("t", data::DatasetRole::target_demos, 3, 2, 1);
  auto proxy = toy_dataset("p", data::DatasetRole::openx_proxy, 4, 2, 2);
  data::FrozenLanguageEncoder lang_enc(4, 3);
  RewardTrainConfig tc;
  tc.steps = 60;
  tc.batch_size = 16;
  tc.seed = 5;

  Aggregator<float> m1(cfg, 20), m2(cfg, 20);
  auto r1 = train_reward(m1, &target, &proxy, nullptr, lang_enc, tc);
  auto r2 = train_reward(m2, &target, &proxy, nullptr, lang_enc, tc);
  CHECK(m1.params_hash() == m2.params_hash());
  CHECK(r1.loss_curve == r2.loss_curve);
  CHECK(r1.loss_curve.back() < r1.loss_curve.front());

  // Thread-count invariance: a third run on one thread matches bitwise.
  const int saved = nn::max_threads();
  nn::set_threads(1);
  Aggregator<float> m3(cfg, 20);
  auto r3 = train_reward(m3, &target, &proxy, nullptr, lang_enc, tc);
  nn::set_threads(saved);
  CHECK(m3.params_hash() == m1.params_hash());
  CHECK(r3.loss_curve == r1.loss_curve);
}

TEST_CASE("label_rewards covers both the short and the long path") {
  auto cfg = tiny_config();
  Aggregator<float> model(cfg, 30);
  Rng rng(31);
  auto lang = random_vec<float>(4, rng);

  data::Mat shortep(6, 6);
  for (auto& x : shortep.v) x = Real(rng.uniform(-1, 1));
  const auto r = label_rewards(model, shortep, lang);
  REQUIRE(int(r.size()) == 6);
  const auto direct = model.forward(shortep.v.data(), 6, lang.data());
  for (int t = 0; t < 6; ++t) CHECK(r[t] == direct[t]);

  data::Mat longep(40, 6);
  for (auto& x : longep.v) x = Real(rng.uniform(-1, 1));
  const auto rl = label_rewards(model, longep, lang);
  REQUIRE(int(rl.size()) == 40);
  // Spot-check one long prefix: subsampled o_{1:t} including frame t.
  const int t = 25;
  const auto idx = data::subsample_indices(t, cfg.max_frames);
  CHECK(idx.back() == t - 1);
  const auto sub = data::take_rows(longep, idx);
  const auto direct_t = model.forward(sub.v.data(), sub.rows, lang.data());
  CHECK(rl[t - 1] == direct_t.back());
}

TEST_CASE("reward checkpoint round-trips parameters and config") {
  auto cfg = tiny_config();
  cfg.pos_mode = PosMode::full;
  Aggregator<float> model(cfg, 40);
  {  // perturb so the state differs from a fresh init
    Rng wr(41);
    for (auto* p : model.params())
      for (auto& x : p->w) x += float(wr.uniform(-0.01, 0.01));
  }
  const auto hash = model.params_hash();
  RewardCheckpoint meta{cfg, 123, Rng(7).serialize(), 40};
  save_reward_checkpoint("tmp_reward.ckpt", model, meta);

  Aggregator<float> loaded;
  const auto back = load_reward_checkpoint("tmp_reward.ckpt", loaded);
  CHECK(back.step == 123);
  CHECK(back.config.pos_mode == PosMode::full);
  CHECK(loaded.params_hash() == hash);
  std::filesystem::remove("tmp_reward.ckpt");
}
