#include "rewind/rl/offline.hpp"

#include <cmath>
#include <fstream>

#include "rewind/nn/serialize.hpp"

namespace rewindrl::rl {

double expectile_loss(double u, double tau) {
  const double w = std::abs(tau - (u < 0 ? 1.0 : 0.0));
  return w * u * u;
}

double awr_weight(double q, double v, double beta, double cap) {
  return std::min(std::exp(beta * (q - v)), cap);
}

std::vector<Real> flatten_state(const Real* obs_embed, int d_img,
                                const Real* proprio, int d_p,
                                const std::vector<Real>& lang) {
  std::vector<Real> s;
  s.reserve(std::size_t(d_img) + d_p + lang.size());
  s.insert(s.end(), obs_embed, obs_embed + d_img);
  s.insert(s.end(), proprio, proprio + d_p);
  s.insert(s.end(), lang.begin(), lang.end());
  return s;
}

std::vector<Transition> label_offline(
    const data::Dataset& demos, const reward::Aggregator<Real>* model,
    const data::FrozenLanguageEncoder& lang_enc,
    const augment::InstructionSampler* sampler, double r_success, Rng& rng) {
  std::vector<Transition> out;
  const int d_img = demos.manifest.d_img;
  for (const auto& ep : demos.episodes) {
    if (!ep.success)
      throw invalid_input("label_offline: episode of " + ep.task_id +
                          " is not a successful demo");
    // One instruction per episode, fixed at labeling time.
    const data::Instruction& ins = sampler && sampler->has(ep.task_id)
                                       ? sampler->sample(ep.task_id, rng)
                                       : ep.lang_ref;
    const auto lang = lang_enc.encode(ins.text);
    const int T = ep.length();
    std::vector<Real> rhat(T, Real(0));
    if (model) rhat = reward::label_rewards(*model, ep.obs_embed, lang);
    for (int t = 0; t < T; ++t) {
      Transition tr;
      tr.state = flatten_state(ep.obs_embed.row(t), d_img, ep.proprio.row(t),
                               ep.proprio.cols, lang);
      const bool last = t == T - 1;
      const int nxt = last ? t : t + 1;
      tr.next_state = flatten_state(ep.obs_embed.row(nxt), d_img,
                                    ep.proprio.row(nxt), ep.proprio.cols, lang);
      for (int a = 0; a < kActionDim; ++a) tr.action[a] = ep.actions.at(t, a);
      tr.reward = double(rhat[t]) + (last ? r_success : 0.0);
      tr.done = last;
      tr.success = true;
      out.push_back(std::move(tr));
    }
  }
  return out;
}

namespace {

std::vector<Real> pack_states(const std::vector<Transition>& ts,
                              const std::vector<int>& idx, bool next) {
  const int D = int(ts[idx[0]].state.size());
  std::vector<Real> out(std::size_t(idx.size()) * D);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& s = next ? ts[idx[i]].next_state : ts[idx[i]].state;
    std::copy(s.begin(), s.end(), out.begin() + i * D);
  }
  return out;
}

std::vector<Real> pack_sa(const std::vector<Transition>& ts,
                          const std::vector<int>& idx) {
  const int D = int(ts[idx[0]].state.size());
  std::vector<Real> out(std::size_t(idx.size()) * (D + kActionDim));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& t = ts[idx[i]];
    std::copy(t.state.begin(), t.state.end(),
              out.begin() + i * (D + kActionDim));
    for (int a = 0; a < kActionDim; ++a)
      out[i * (D + kActionDim) + D + a] = t.action[a];
  }
  return out;
}

// min over m target critics sampled without replacement.
std::vector<double> min_target_q(CriticEnsemble& critics, const Real* sa, int M,
                                 int m_sample, Rng& rng) {
  std::vector<int> picks;
  {
    std::vector<int> pool(critics.size());
    for (int i = 0; i < critics.size(); ++i) pool[i] = i;
    for (int i = 0; i < m_sample; ++i) {
      const int j = i + int(rng.uniform_int(std::uint64_t(pool.size() - i)));
      std::swap(pool[i], pool[j]);
      picks.push_back(pool[i]);
    }
  }
  std::vector<double> best(M, std::numeric_limits<double>::infinity());
  for (const int qi : picks) {
    const auto q = q_values(critics.target(qi), sa, M);
    for (int i = 0; i < M; ++i) best[i] = std::min(best[i], q[i]);
  }
  return best;
}

}  // namespace

IQLResult iql_pretrain(const std::vector<Transition>& transitions,
                       const IQLConfig& cfg, PolicyCheckpoint& out) {
  cfg.validate();
  if (transitions.empty()) throw invalid_input("iql_pretrain: no transitions");
  const int D = int(transitions.front().state.size());

  Rng rng(cfg.seed);
  out.config = cfg;
  out.state_dim = D;
  out.policy = TanhGaussianPolicy("pi", D, cfg.widths, cfg.layernorm);
  out.critics = CriticEnsemble("critic", D, cfg.widths, cfg.n_critics,
                               cfg.layernorm);
  {
    std::vector<int> vdims = {D};
    for (int wdt : cfg.widths) vdims.push_back(wdt);
    vdims.push_back(1);
    out.value = nn::Mlp<Real>("vf", vdims, cfg.layernorm);
  }
  out.policy.init(rng);
  out.critics.init(rng);
  out.value.init(rng);

  std::vector<nn::Param<Real>*> pi_params, q_params, v_params;
  out.policy.visit(pi_params);
  out.critics.visit(q_params);
  out.value.visit(v_params);
  nn::Adam<Real> pi_opt(cfg.lr), q_opt(cfg.lr), v_opt(cfg.lr);

  IQLResult result;
  const int B = cfg.batch_size;
  std::vector<int> idx(B);

  for (int step = 0; step < cfg.steps; ++step) {
    for (int i = 0; i < B; ++i)
      idx[i] = int(rng.uniform_int(std::uint64_t(transitions.size())));

    const auto S = pack_states(transitions, idx, false);
    const auto SA = pack_sa(transitions, idx);
    const auto qbar = min_target_q(out.critics, SA.data(), B, cfg.m_sample, rng);

    // V update: expectile regression on Q - V.
    double v_loss = 0;
    {
      typename nn::Mlp<Real>::Cache cache;
      std::vector<Real> v(B);
      out.value.forward(B, S.data(), v.data(), &cache);
      std::vector<Real> dv(B);
      for (int i = 0; i < B; ++i) {
        const double u = qbar[i] - double(v[i]);
        v_loss += expectile_loss(u, cfg.expectile_tau);
        const double w = std::abs(cfg.expectile_tau - (u < 0 ? 1.0 : 0.0));
        dv[i] = Real(-2.0 * w * u / B);
      }
      v_loss /= B;
      for (auto* p : v_params) p->zero_grad();
      out.value.backward(cache, dv.data());
      v_opt.step(v_params);
    }

    // Q update: Bellman target bootstraps V only (never policy actions).
    double q_loss = 0;
    {
      const auto S2 = pack_states(transitions, idx, true);
      std::vector<Real> v2(B);
      out.value.forward(B, S2.data(), v2.data());
      std::vector<double> y(B);
      for (int i = 0; i < B; ++i) {
        const auto& tr = transitions[idx[i]];
        y[i] = tr.reward + cfg.gamma * (tr.done ? 0.0 : double(v2[i]));
      }
      for (auto* p : q_params) p->zero_grad();
      for (int qi = 0; qi < out.critics.size(); ++qi) {
        typename nn::Mlp<Real>::Cache cache;
        std::vector<Real> q(B);
        out.critics.q(qi).forward(B, SA.data(), q.data(), &cache);
        std::vector<Real> dq(B);
        for (int i = 0; i < B; ++i) {
          const double diff = double(q[i]) - y[i];
          q_loss += diff * diff;
          dq[i] = Real(2.0 * diff / B);
        }
        out.critics.q(qi).backward(cache, dq.data());
      }
      q_loss /= B * out.critics.size();
      q_opt.step(q_params);
      out.critics.polyak_update(cfg.polyak);
    }

    // Policy update: advantage-weighted log-likelihood of dataset actions.
    double pi_loss = 0;
    {
      typename nn::Mlp<Real>::Cache cache;
      const auto dist = out.policy.dist(S.data(), B, &cache);
      std::vector<Real> v(B);
      out.value.forward(B, S.data(), v.data());
      std::vector<double> dmean(std::size_t(B) * kActionDim, 0.0);
      std::vector<double> dlog_std(std::size_t(B) * kActionDim, 0.0);
      for (int i = 0; i < B; ++i) {
        const auto& tr = transitions[idx[i]];
        const double w =
            awr_weight(qbar[i], double(v[i]), cfg.awr_beta, cfg.awr_cap);
        for (int a = 0; a < kActionDim; ++a) {
          const auto g = tanh_gaussian_log_prob(
              dist.mean[std::size_t(i) * kActionDim + a],
              dist.log_std[std::size_t(i) * kActionDim + a],
              double(tr.action[a]));
          pi_loss -= w * g.logp;
          dmean[std::size_t(i) * kActionDim + a] = -w * g.dmean / B;
          dlog_std[std::size_t(i) * kActionDim + a] = -w * g.dlog_std / B;
        }
      }
      pi_loss /= B;
      for (auto* p : pi_params) p->zero_grad();
      out.policy.backward_dist(dist, cache, dmean, dlog_std);
      pi_opt.step(pi_params);
    }

    if (!std::isfinite(v_loss) || !std::isfinite(q_loss) ||
        !std::isfinite(pi_loss) || q_loss > 1e6)
      throw std::runtime_error("iql_pretrain: divergence at step " +
                               std::to_string(step) + " (v=" +
                               std::to_string(v_loss) + ", q=" +
                               std::to_string(q_loss) + ")");
    result.v_loss.push_back(v_loss);
    result.q_loss.push_back(q_loss);
    result.pi_loss.push_back(pi_loss);
    out.step = step + 1;
  }
  return result;
}

namespace {
constexpr std::uint32_t kPolicyMagic = 0x43505752;  // "RWPC"

std::map<std::string, std::string> iql_kv(const IQLConfig& c, int state_dim,
                                          std::int64_t step) {
  std::map<std::string, std::string> kv;
  kv["expectile_tau"] = std::to_string(c.expectile_tau);
  kv["awr_beta"] = std::to_string(c.awr_beta);
  kv["awr_cap"] = std::to_string(c.awr_cap);
  kv["gamma"] = std::to_string(c.gamma);
  kv["lr"] = std::to_string(c.lr);
  kv["steps"] = std::to_string(c.steps);
  kv["success_bonus"] = std::to_string(c.success_bonus);
  kv["batch_size"] = std::to_string(c.batch_size);
  kv["n_critics"] = std::to_string(c.n_critics);
  kv["m_sample"] = std::to_string(c.m_sample);
  kv["polyak"] = std::to_string(c.polyak);
  kv["layernorm"] = c.layernorm ? "1" : "0";
  kv["seed"] = std::to_string(c.seed);
  kv["state_dim"] = std::to_string(state_dim);
  kv["step"] = std::to_string(step);
  std::string w;
  for (int x : c.widths) w += (w.empty() ? "" : ",") + std::to_string(x);
  kv["widths"] = w;
  return kv;
}

IQLConfig iql_from_kv(const std::map<std::string, std::string>& kv,
                      int* state_dim, std::int64_t* step) {
  IQLConfig c;
  c.expectile_tau = std::stod(kv.at("expectile_tau"));
  c.awr_beta = std::stod(kv.at("awr_beta"));
  c.awr_cap = std::stod(kv.at("awr_cap"));
  c.gamma = std::stod(kv.at("gamma"));
  c.lr = std::stod(kv.at("lr"));
  c.steps = std::stoi(kv.at("steps"));
  c.success_bonus = std::stod(kv.at("success_bonus"));
  c.batch_size = std::stoi(kv.at("batch_size"));
  c.n_critics = std::stoi(kv.at("n_critics"));
  c.m_sample = std::stoi(kv.at("m_sample"));
  c.polyak = std::stod(kv.at("polyak"));
  c.layernorm = kv.at("layernorm") == "1";
  c.seed = std::stoull(kv.at("seed"));
  *state_dim = std::stoi(kv.at("state_dim"));
  *step = std::stoll(kv.at("step"));
  c.widths.clear();
  std::string w = kv.at("widths");
  std::size_t pos = 0;
  while (pos < w.size()) {
    auto comma = w.find(',', pos);
    if (comma == std::string::npos) comma = w.size();
    c.widths.push_back(std::stoi(w.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return c;
}

}  // namespace

void save_policy_checkpoint(const std::string& path, PolicyCheckpoint& ck) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  nn::write_u32(f, kPolicyMagic);
  nn::write_u32(f, 1);
  nn::write_kv(f, iql_kv(ck.config, ck.state_dim, ck.step));
  std::vector<nn::Param<Real>*> params;
  ck.policy.visit(params);
  ck.critics.visit(params);
  ck.critics.visit_targets(params);
  ck.value.visit(params);
  nn::write_params(f, params);
  if (!f) throw std::runtime_error("short write on checkpoint " + path);
}

PolicyCheckpoint load_policy_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw corruption_error("cannot open checkpoint " + path);
  if (nn::read_u32(f, "magic") != kPolicyMagic)
    throw corruption_error("not a policy checkpoint: " + path);
  if (nn::read_u32(f, "version") != 1)
    throw corruption_error("unsupported policy checkpoint version");
  PolicyCheckpoint ck;
  int state_dim = 0;
  std::int64_t step = 0;
  ck.config = iql_from_kv(nn::read_kv(f), &state_dim, &step);
  ck.state_dim = state_dim;
  ck.step = step;
  ck.policy = TanhGaussianPolicy("pi", state_dim, ck.config.widths,
                                 ck.config.layernorm);
  ck.critics = CriticEnsemble("critic", state_dim, ck.config.widths,
                              ck.config.n_critics, ck.config.layernorm);
  std::vector<int> vdims = {state_dim};
  for (int wdt : ck.config.widths) vdims.push_back(wdt);
  vdims.push_back(1);
  ck.value = nn::Mlp<Real>("vf", vdims, ck.config.layernorm);
  std::vector<nn::Param<Real>*> params;
  ck.policy.visit(params);
  ck.critics.visit(params);
  ck.critics.visit_targets(params);
  ck.value.visit(params);
  nn::read_params(f, params);
  return ck;
}

}  // namespace rewindrl::rl
