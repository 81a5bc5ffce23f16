#pragma once

#include <array>
#include <string>
#include <vector>

#include "rewind/nn/mlp.hpp"
#include "rewind/rl/gaussian.hpp"
#include "rewind/rng.hpp"

namespace rewindrl::rl {

constexpr int kActionDim = 3;

// Language-conditioned tanh-Gaussian policy: MLP trunk over the flattened
// state [obs_embed | proprio | lang_embed], heads for mean and raw log-std.
class TanhGaussianPolicy {
 public:
  TanhGaussianPolicy() = default;
  TanhGaussianPolicy(const std::string& name, int state_dim,
                     const std::vector<int>& widths, bool layernorm)
      : state_dim_(state_dim) {
    std::vector<int> dims = {state_dim};
    for (int wdt : widths) dims.push_back(wdt);
    dims.push_back(2 * kActionDim);
    net_ = nn::Mlp<Real>(name, dims, layernorm);
  }

  void init(Rng& rng) { net_.init(rng); }
  int state_dim() const { return state_dim_; }
  nn::Mlp<Real>& net() { return net_; }
  const nn::Mlp<Real>& net() const { return net_; }

  struct Dist {
    std::vector<Real> raw;       // M x 2A network output
    std::vector<double> mean;    // M x A
    std::vector<double> log_std; // M x A (squashed)
    int M = 0;
  };

  Dist dist(const Real* states, int M,
            typename nn::Mlp<Real>::Cache* cache = nullptr) const {
    Dist d;
    d.M = M;
    d.raw.resize(std::size_t(M) * 2 * kActionDim);
    net_.forward(M, states, d.raw.data(), cache);
    d.mean.resize(std::size_t(M) * kActionDim);
    d.log_std.resize(std::size_t(M) * kActionDim);
    for (int m = 0; m < M; ++m)
      for (int a = 0; a < kActionDim; ++a) {
        d.mean[std::size_t(m) * kActionDim + a] =
            double(d.raw[std::size_t(m) * 2 * kActionDim + a]);
        d.log_std[std::size_t(m) * kActionDim + a] = squash_log_std(
            double(d.raw[std::size_t(m) * 2 * kActionDim + kActionDim + a]));
      }
    return d;
  }

  // Chains per-dimension gradients w.r.t. mean and (squashed) log_std back
  // through the raw head and the trunk, accumulating parameter grads.
  void backward_dist(const Dist& d, const typename nn::Mlp<Real>::Cache& cache,
                     const std::vector<double>& dmean,
                     const std::vector<double>& dlog_std) {
    std::vector<Real> draw(std::size_t(d.M) * 2 * kActionDim);
    for (int m = 0; m < d.M; ++m)
      for (int a = 0; a < kActionDim; ++a) {
        draw[std::size_t(m) * 2 * kActionDim + a] =
            Real(dmean[std::size_t(m) * kActionDim + a]);
        const double raw =
            double(d.raw[std::size_t(m) * 2 * kActionDim + kActionDim + a]);
        draw[std::size_t(m) * 2 * kActionDim + kActionDim + a] =
            Real(dlog_std[std::size_t(m) * kActionDim + a] *
                 squash_log_std_grad(raw));
      }
    net_.backward(cache, draw.data());
  }

  std::array<double, kActionDim> act(const std::vector<Real>& state, Rng* rng) const {
    auto d = dist(state.data(), 1);
    std::array<double, kActionDim> a{};
    for (int i = 0; i < kActionDim; ++i) {
      if (rng) {
        a[i] = tanh_gaussian_sample(d.mean[i], d.log_std[i], rng->normal()).action;
      } else {
        a[i] = std::tanh(d.mean[i]);  // greedy
      }
    }
    return a;
  }

  void visit(std::vector<nn::Param<Real>*>& out) { net_.visit(out); }

 private:
  int state_dim_ = 0;
  nn::Mlp<Real> net_;
};

// Q ensemble over [state | action] inputs, with polyak-averaged target
// copies.
class CriticEnsemble {
 public:
  CriticEnsemble() = default;
  CriticEnsemble(const std::string& name, int state_dim,
                 const std::vector<int>& widths, int n, bool layernorm) {
    std::vector<int> dims = {state_dim + kActionDim};
    for (int wdt : widths) dims.push_back(wdt);
    dims.push_back(1);
    for (int i = 0; i < n; ++i) {
      qs_.emplace_back(name + ".q" + std::to_string(i), dims, layernorm);
      targets_.emplace_back(name + ".tq" + std::to_string(i), dims, layernorm);
    }
  }

  void init(Rng& rng) {
    for (auto& q : qs_) q.init(rng);
    sync_targets();
  }

  int size() const { return int(qs_.size()); }
  nn::Mlp<Real>& q(int i) { return qs_[i]; }
  const nn::Mlp<Real>& q(int i) const { return qs_[i]; }
  const nn::Mlp<Real>& target(int i) const { return targets_[i]; }

  void sync_targets() {
    std::vector<nn::Param<Real>*> src, dst;
    for (auto& q : qs_) q.visit(src);
    for (auto& t : targets_) t.visit(dst);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->w = src[i]->w;
  }

  void polyak_update(double rho) {
    std::vector<nn::Param<Real>*> src, dst;
    for (auto& q : qs_) q.visit(src);
    for (auto& t : targets_) t.visit(dst);
    for (std::size_t i = 0; i < src.size(); ++i)
      for (std::size_t j = 0; j < src[i]->w.size(); ++j)
        dst[i]->w[j] = Real((1.0 - rho) * double(dst[i]->w[j]) +
                            rho * double(src[i]->w[j]));
  }

  // Trainable parameters only; targets are never optimized.
  void visit(std::vector<nn::Param<Real>*>& out) {
    for (auto& q : qs_) q.visit(out);
  }
  void visit_targets(std::vector<nn::Param<Real>*>& out) {
    for (auto& t : targets_) t.visit(out);
  }

 private:
  std::vector<nn::Mlp<Real>> qs_;
  std::vector<nn::Mlp<Real>> targets_;
};

// Q values of one network over a batch of [state|action] rows.
inline std::vector<double> q_values(const nn::Mlp<Real>& q, const Real* sa,
                                    int M, typename nn::Mlp<Real>::Cache* cache = nullptr) {
  std::vector<Real> out(M);
  q.forward(M, sa, out.data(), cache);
  return std::vector<double>(out.begin(), out.end());
}

}  // namespace rewindrl::rl
