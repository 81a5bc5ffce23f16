#include "rewind/rl/online.hpp"

#include <cmath>

namespace rewindrl::rl {

const Transition& ReplayBuffer::sample(const OnlineConfig& cfg, Rng& rng,
                                       Partition* chosen) const {
  Partition want;
  if (cfg.mixing_enabled()) {
    const double u = rng.uniform();
    want = u < cfg.offline_frac ? kOffline
           : u < cfg.offline_frac + cfg.online_fail_frac ? kOnlineFailure
                                                         : kOnlineSuccess;
  } else {
    // Uniform over collected online data.
    const std::size_t n = store_[kOnlineFailure].size() + store_[kOnlineSuccess].size();
    if (n == 0) throw invalid_input("replay buffer: no online data");
    const std::size_t i = rng.uniform_int(std::uint64_t(n));
    want = i < store_[kOnlineFailure].size() ? kOnlineFailure : kOnlineSuccess;
    const std::size_t j =
        want == kOnlineFailure ? i : i - store_[kOnlineFailure].size();
    if (chosen) *chosen = want;
    return store_[want][j];
  }
  if (store_[want].empty()) {
    // Fixed fallback order keeps sampling deterministic when a partition
    // has not filled yet.
    for (Partition p : {kOffline, kOnlineFailure, kOnlineSuccess})
      if (!store_[p].empty()) {
        want = p;
        break;
      }
    if (store_[want].empty())
      throw invalid_input("replay buffer: empty");
  }
  if (chosen) *chosen = want;
  return store_[want][rng.uniform_int(std::uint64_t(store_[want].size()))];
}

double online_reward(const reward::Aggregator<Real>* model,
                     const data::Mat& prefix_obs, const std::vector<Real>& lang,
                     bool success_at_t, double bonus) {
  double r = success_at_t ? bonus : 0.0;
  if (model) {
    const int n = model->config().max_frames;
    const auto idx = data::subsample_indices(prefix_obs.rows, n);
    const auto sub = data::take_rows(prefix_obs, idx);
    const auto out = model->forward(sub.v.data(), sub.rows, lang.data());
    r += double(out.back());
  }
  return r;
}

namespace {

std::vector<Real> pack_sa_rows(const std::vector<const Transition*>& batch,
                               const std::vector<std::array<double, kActionDim>>* actions) {
  const int D = int(batch[0]->state.size());
  std::vector<Real> out(batch.size() * std::size_t(D + kActionDim));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::copy(batch[i]->state.begin(), batch[i]->state.end(),
              out.begin() + i * (D + kActionDim));
    for (int a = 0; a < kActionDim; ++a)
      out[i * (D + kActionDim) + D + a] =
          actions ? Real((*actions)[i][a]) : batch[i]->action[a];
  }
  return out;
}

std::vector<Real> pack_state_rows(const std::vector<const Transition*>& batch,
                                  bool next) {
  const int D = int(batch[0]->state.size());
  std::vector<Real> out(batch.size() * std::size_t(D));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = next ? batch[i]->next_state : batch[i]->state;
    std::copy(s.begin(), s.end(), out.begin() + i * D);
  }
  return out;
}

std::vector<int> sample_critics(int n, int m, Rng& rng) {
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  std::vector<int> picks;
  for (int i = 0; i < m; ++i) {
    const int j = i + int(rng.uniform_int(std::uint64_t(n - i)));
    std::swap(pool[i], pool[j]);
    picks.push_back(pool[i]);
  }
  return picks;
}

}  // namespace

SacTrainer::SacTrainer(TanhGaussianPolicy& policy, CriticEnsemble& critics,
                       const TanhGaussianPolicy* pretrained,
                       const OnlineConfig& cfg)
    : policy_(policy),
      critics_(critics),
      pretrained_(pretrained),
      cfg_(cfg),
      pi_opt_(cfg.lr),
      q_opt_(cfg.lr),
      log_alpha_ent_(cfg.init_log_alpha_ent),
      target_entropy_(-double(kActionDim)) {
  cfg_.validate();
  if (cfg_.kl_alpha > 0 && !pretrained_)
    throw invalid_input("sac: KL variant needs the pretrained policy");
  policy_.visit(pi_params_);
  critics_.visit(q_params_);
}

SacTrainer::CriticDiag SacTrainer::critic_update(
    const std::vector<const Transition*>& batch, Rng& rng) {
  const int B = int(batch.size());
  const int D = int(batch[0]->state.size());
  CriticDiag diag;

  // Next-state actions from the current policy (no gradient flows back).
  const auto S2 = pack_state_rows(batch, true);
  const auto d2 = policy_.dist(S2.data(), B);
  std::vector<std::array<double, kActionDim>> a2(B);
  std::vector<double> logp2(B, 0.0);
  std::vector<double> kl2(B, 0.0);
  TanhGaussianPolicy::Dist pre2;
  if (cfg_.kl_alpha > 0) pre2 = pretrained_->dist(S2.data(), B);
  for (int i = 0; i < B; ++i) {
    for (int a = 0; a < kActionDim; ++a) {
      const std::size_t k = std::size_t(i) * kActionDim + a;
      const auto s = tanh_gaussian_sample(d2.mean[k], d2.log_std[k], rng.normal());
      a2[i][a] = s.action;
      logp2[i] += s.logp;
      if (cfg_.kl_alpha > 0)
        kl2[i] += gaussian_kl(d2.mean[k], d2.log_std[k], pre2.mean[k],
                              pre2.log_std[k]).kl;
    }
    diag.mean_kl_next += kl2[i] / B;
  }

  // Targets: min over m sampled target critics; the entropy term is
  // excluded unless explicitly enabled; the KL variant subtracts the
  // pretrained-policy divergence at the successor state.
  std::vector<Real> sa2(std::size_t(B) * (D + kActionDim));
  for (int i = 0; i < B; ++i) {
    std::copy(batch[i]->next_state.begin(), batch[i]->next_state.end(),
              sa2.begin() + std::size_t(i) * (D + kActionDim));
    for (int a = 0; a < kActionDim; ++a)
      sa2[std::size_t(i) * (D + kActionDim) + D + a] = Real(a2[i][a]);
  }
  std::vector<double> qmin(B, std::numeric_limits<double>::infinity());
  for (const int qi : sample_critics(critics_.size(), cfg_.m_sample, rng)) {
    const auto q = q_values(critics_.target(qi), sa2.data(), B);
    for (int i = 0; i < B; ++i) qmin[i] = std::min(qmin[i], q[i]);
  }
  diag.targets.resize(B);
  for (int i = 0; i < B; ++i) {
    double boot = qmin[i];
    if (cfg_.entropy_in_target) boot -= alpha_ent() * logp2[i];
    if (cfg_.kl_alpha > 0) boot -= cfg_.kl_alpha * kl2[i];
    diag.targets[i] =
        batch[i]->reward + cfg_.gamma * (batch[i]->done ? 0.0 : boot);
  }

  const auto SA = pack_sa_rows(batch, nullptr);
  for (auto* p : q_params_) p->zero_grad();
  for (int qi = 0; qi < critics_.size(); ++qi) {
    typename nn::Mlp<Real>::Cache cache;
    std::vector<Real> q(B);
    critics_.q(qi).forward(B, SA.data(), q.data(), &cache);
    std::vector<Real> dq(B);
    for (int i = 0; i < B; ++i) {
      const double diff = double(q[i]) - diag.targets[i];
      diag.loss += diff * diff;
      dq[i] = Real(2.0 * diff / B);
    }
    critics_.q(qi).backward(cache, dq.data());
  }
  diag.loss /= double(B) * critics_.size();
  if (!std::isfinite(diag.loss))
    throw std::runtime_error("sac: non-finite critic loss");
  q_opt_.step(q_params_);
  critics_.polyak_update(cfg_.polyak);
  return diag;
}

SacTrainer::ActorDiag SacTrainer::actor_update(
    const std::vector<const Transition*>& batch, Rng& rng) {
  const int B = int(batch.size());
  const int D = int(batch[0]->state.size());
  ActorDiag diag;

  const auto S = pack_state_rows(batch, false);
  typename nn::Mlp<Real>::Cache pi_cache;
  const auto dist = policy_.dist(S.data(), B, &pi_cache);

  // Reparameterized actions.
  std::vector<SampleGrad> samples(std::size_t(B) * kActionDim);
  std::vector<std::array<double, kActionDim>> actions(B);
  std::vector<double> logp(B, 0.0);
  for (int i = 0; i < B; ++i)
    for (int a = 0; a < kActionDim; ++a) {
      const std::size_t k = std::size_t(i) * kActionDim + a;
      samples[k] = tanh_gaussian_sample(dist.mean[k], dist.log_std[k], rng.normal());
      actions[i][a] = samples[k].action;
      logp[i] += samples[k].logp;
    }

  // Q(s, a~) through m sampled current critics, min per row; the input
  // gradient of the argmin critic drives the action gradient.
  const auto picks = sample_critics(critics_.size(), cfg_.m_sample, rng);
  const auto SA = pack_sa_rows(batch, &actions);
  std::vector<std::vector<double>> qs;
  std::vector<typename nn::Mlp<Real>::Cache> caches(picks.size());
  for (std::size_t pi = 0; pi < picks.size(); ++pi)
    qs.push_back(q_values(critics_.q(picks[pi]), SA.data(), B, &caches[pi]));
  std::vector<int> argmin(B, 0);
  for (int i = 0; i < B; ++i)
    for (std::size_t pi = 1; pi < picks.size(); ++pi)
      if (qs[pi][i] < qs[argmin[i]][i]) argmin[i] = int(pi);

  // d(-Q)/d(action) accumulated over the argmin critics.
  std::vector<double> dQ_da(std::size_t(B) * kActionDim, 0.0);
  for (std::size_t pi = 0; pi < picks.size(); ++pi) {
    std::vector<Real> dq(B, Real(0));
    bool any = false;
    for (int i = 0; i < B; ++i)
      if (argmin[i] == int(pi)) {
        dq[i] = Real(1.0 / B);
        any = true;
      }
    if (!any) continue;
    std::vector<Real> dsa(std::size_t(B) * (D + kActionDim));
    critics_.q(picks[pi]).backward(caches[pi], dq.data(), dsa.data());
    for (int i = 0; i < B; ++i)
      if (argmin[i] == int(pi))
        for (int a = 0; a < kActionDim; ++a)
          dQ_da[std::size_t(i) * kActionDim + a] =
              double(dsa[std::size_t(i) * (D + kActionDim) + D + a]);
  }
  // Actor updates must not leave gradients in the critics.
  for (auto* p : q_params_) p->zero_grad();

  TanhGaussianPolicy::Dist pre;
  if (cfg_.kl_alpha > 0) pre = pretrained_->dist(S.data(), B);

  const double a_ent = alpha_ent();
  std::vector<double> dmean(std::size_t(B) * kActionDim, 0.0);
  std::vector<double> dlog_std(std::size_t(B) * kActionDim, 0.0);
  for (int i = 0; i < B; ++i) {
    double qmin_i = qs[argmin[i]][i];
    diag.loss += (a_ent * logp[i] - qmin_i) / B;
    diag.mean_log_prob += logp[i] / B;
    for (int a = 0; a < kActionDim; ++a) {
      const std::size_t k = std::size_t(i) * kActionDim + a;
      const auto& s = samples[k];
      // alpha*logp/B pulls directly; dQ_da already carries the 1/B factor.
      dmean[k] = a_ent * s.dlogp_dmean / B - dQ_da[k] * s.da_dmean;
      dlog_std[k] = a_ent * s.dlogp_dlog_std / B - dQ_da[k] * s.da_dlog_std;
      if (cfg_.kl_alpha > 0) {
        const auto kg = gaussian_kl(dist.mean[k], dist.log_std[k], pre.mean[k],
                                    pre.log_std[k]);
        diag.mean_kl += kg.kl / (B * kActionDim);
        diag.loss += cfg_.kl_alpha * kg.kl / B;
        dmean[k] += cfg_.kl_alpha * kg.dmean1 / B;
        dlog_std[k] += cfg_.kl_alpha * kg.dlog_std1 / B;
      }
    }
  }
  if (!std::isfinite(diag.loss))
    throw std::runtime_error("sac: non-finite actor loss");
  for (auto* p : pi_params_) p->zero_grad();
  policy_.backward_dist(dist, pi_cache, dmean, dlog_std);
  pi_opt_.step(pi_params_);

  if (cfg_.autotune_entropy) {
    double grad = 0;  // d/dlog_alpha of -alpha*(logp + target_entropy)
    for (int i = 0; i < B; ++i) grad += logp[i] + target_entropy_;
    grad = -a_ent * grad / B;
    log_alpha_ent_ -= cfg_.lr * grad;
    log_alpha_ent_ = std::clamp(log_alpha_ent_, -20.0, 5.0);
  }
  diag.alpha_ent = alpha_ent();
  return diag;
}

double SacTrainer::mean_kl_to_pretrained(
    const std::vector<std::vector<Real>>& states) const {
  if (!pretrained_) return 0.0;
  double total = 0;
  for (const auto& s : states) {
    const auto d = policy_.dist(s.data(), 1);
    const auto p = pretrained_->dist(s.data(), 1);
    for (int a = 0; a < kActionDim; ++a)
      total += gaussian_kl(d.mean[a], d.log_std[a], p.mean[a], p.log_std[a]).kl;
  }
  return total / double(states.size());
}

double evaluate_policy(lang2d::Lang2DEnv& env, const data::TaskSpec& task,
                       const TanhGaussianPolicy& policy,
                       const data::EncoderSet& encoders,
                       const std::vector<Real>& lang, int episodes, Rng& rng,
                       double* mean_return,
                       const reward::Aggregator<Real>* reward_model,
                       double success_bonus) {
  int successes = 0;
  double ret = 0;
  for (int e = 0; e < episodes; ++e) {
    env.reset(task, rng);
    data::Mat prefix(0, encoders.obs.out_dim());
    bool success = false;
    while (!env.done()) {
      const auto feat = env.featurize();
      std::vector<Real> obs(encoders.obs.out_dim());
      encoders.obs.encode_into(feat.data(), obs.data());
      prefix.v.insert(prefix.v.end(), obs.begin(), obs.end());
      prefix.rows += 1;
      const auto pp = env.proprio();
      const auto state = flatten_state(obs.data(), int(obs.size()), pp.data(),
                                       int(pp.size()), lang);
      const auto a = policy.act(state, nullptr);  // greedy
      const auto res = env.step({a[0], a[1], a[2]});
      success = res.success;
      if (mean_return)
        ret += online_reward(reward_model, prefix, lang, success, success_bonus);
    }
    successes += success ? 1 : 0;
  }
  if (mean_return) *mean_return = ret / episodes;
  return double(successes) / episodes;
}

OnlineResult run_online(lang2d::Lang2DEnv& env, const data::TaskSpec& task,
                        PolicyCheckpoint& ck,
                        const reward::Aggregator<Real>* reward_model,
                        const data::EncoderSet& encoders,
                        const std::vector<Transition>& offline_data,
                        const OnlineConfig& cfg,
                        std::vector<std::string>* log) {
  cfg.validate();
  if (cfg.n_critics != ck.critics.size())
    throw invalid_input("run_online: checkpoint has " +
                        std::to_string(ck.critics.size()) + " critics, config wants " +
                        std::to_string(cfg.n_critics));
  const reward::Aggregator<Real>* model = cfg.sparse_only ? nullptr : reward_model;

  const auto lang = encoders.lang.encode(task.instructions.front().text);
  TanhGaussianPolicy pretrained = ck.policy;  // frozen copy
  SacTrainer trainer(ck.policy, ck.critics, &pretrained, cfg);

  ReplayBuffer buffer(cfg.buffer_capacity);
  if (cfg.offline_frac > 0) {
    if (offline_data.empty())
      throw invalid_input("run_online: offline fraction set but no offline data");
    buffer.push_offline(offline_data);
  }

  Rng rng(cfg.seed);
  Rng env_rng = rng.fork(0x1a27);
  OnlineResult result;

  lang2d::Lang2DEnv eval_env(env.config());
  auto eval_point = [&](int step) {
    Rng eval_rng(cfg.seed ^ (0x5eedull + std::uint64_t(step) * 7919));
    double ret = 0;
    const double sr = evaluate_policy(eval_env, task, ck.policy, encoders, lang,
                                      cfg.eval_episodes, eval_rng, &ret, model,
                                      cfg.success_bonus);
    result.curve.push_back({step, sr, ret});
    if (log)
      log->push_back("step " + std::to_string(step) + " success " +
                     std::to_string(sr));
    return sr;
  };

  result.zero_shot_success = eval_point(0);

  env.reset(task, env_rng);
  data::Mat prefix(0, encoders.obs.out_dim());
  std::vector<Transition> episode;
  std::vector<Real> cur_obs(encoders.obs.out_dim());
  {
    const auto feat = env.featurize();
    encoders.obs.encode_into(feat.data(), cur_obs.data());
  }

  const int D = encoders.obs.out_dim() + 3 + encoders.lang.out_dim();
  (void)D;
  std::vector<const Transition*> batch(cfg.batch_size);

  for (int step = 1; step <= cfg.total_steps; ++step) {
    const bool warm = step <= cfg.warm_start_steps;
    const auto pp = env.proprio();
    const auto state = flatten_state(cur_obs.data(), int(cur_obs.size()),
                                     pp.data(), int(pp.size()), lang);
    const auto a = warm ? pretrained.act(state, &rng) : ck.policy.act(state, &rng);

    prefix.v.insert(prefix.v.end(), cur_obs.begin(), cur_obs.end());
    prefix.rows += 1;
    const auto res = env.step({a[0], a[1], a[2]});
    const double r = online_reward(model, prefix, lang, res.success,
                                   cfg.success_bonus);

    Transition tr;
    tr.state = state;
    std::vector<Real> next_obs(encoders.obs.out_dim());
    encoders.obs.encode_into(res.obs.data(), next_obs.data());
    const auto pp2 = env.proprio();
    tr.next_state = flatten_state(next_obs.data(), int(next_obs.size()),
                                  pp2.data(), int(pp2.size()), lang);
    for (int i = 0; i < kActionDim; ++i) tr.action[i] = Real(a[i]);
    tr.reward = r;
    tr.done = res.success;  // horizon truncation still bootstraps
    episode.push_back(std::move(tr));

    if (res.done) {
      buffer.push_episode(episode, res.success);
      episode.clear();
      env.reset(task, env_rng);
      prefix = data::Mat(0, encoders.obs.out_dim());
      const auto feat = env.featurize();
      encoders.obs.encode_into(feat.data(), cur_obs.data());
    } else {
      cur_obs = next_obs;
    }

    if (!warm && buffer.total() >= std::size_t(cfg.batch_size)) {
      for (int k = 0; k < cfg.utd; ++k) {
        for (int i = 0; i < cfg.batch_size; ++i)
          batch[i] = &buffer.sample(cfg, rng);
        trainer.critic_update(batch, rng);
      }
      for (int i = 0; i < cfg.batch_size; ++i) batch[i] = &buffer.sample(cfg, rng);
      trainer.actor_update(batch, rng);
    }

    if (step % cfg.eval_every == 0) eval_point(step);
    result.env_steps = step;
  }
  if (result.curve.back().step != cfg.total_steps) eval_point(cfg.total_steps);
  result.final_success = result.curve.back().success_rate;
  return result;
}

}  // namespace rewindrl::rl
