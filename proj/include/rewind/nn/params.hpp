#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rewind/common.hpp"
#include "rewind/rng.hpp"

namespace rewindrl::nn {

// One named trainable array plus its gradient accumulator.
template <class T>
struct Param {
  std::string name;
  int rows = 0, cols = 0;  // cols==1 for vectors
  std::vector<T> w;
  std::vector<T> g;

  void init_sized(const std::string& n, int r, int c) {
    name = n;
    rows = r;
    cols = c;
    w.assign(std::size_t(r) * c, T(0));
    g.assign(std::size_t(r) * c, T(0));
  }
  std::size_t size() const { return w.size(); }
  void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }
};

template <class T>
using ParamVisitor = std::function<void(Param<T>&)>;

template <class T>
void uniform_init(Param<T>& p, Rng& rng, double scale) {
  for (auto& x : p.w) x = T(rng.uniform(-scale, scale));
}

// Fan-based uniform init used for all linear layers.
template <class T>
void xavier_init(Param<T>& p, Rng& rng) {
  double s = std::sqrt(6.0 / double(p.rows + p.cols));
  uniform_init(p, rng, s);
}

template <class T>
std::uint64_t params_hash(const std::vector<Param<T>*>& ps) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto* p : ps) {
    h = fnv1a64(p->name.data(), p->name.size(), h);
    h = fnv1a64(p->w.data(), p->w.size() * sizeof(T), h);
  }
  return h;
}

// Adam with per-parameter state, keyed by visit order (fixed per module).
template <class T>
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // grad_scale multiplies every gradient before the moment update (used to
  // average summed batch gradients).
  void step(const std::vector<Param<T>*>& params, double grad_scale = 1.0) {
    if (state_.empty()) {
      state_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        state_[i].m.assign(params[i]->size(), 0.0);
        state_[i].v.assign(params[i]->size(), 0.0);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      auto& st = state_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double g = double(p.g[j]) * grad_scale;
        st.m[j] = beta1_ * st.m[j] + (1.0 - beta1_) * g;
        st.v[j] = beta2_ * st.v[j] + (1.0 - beta2_) * g * g;
        const double mhat = st.m[j] / bc1;
        const double vhat = st.v[j] / bc2;
        p.w[j] = T(double(p.w[j]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  std::int64_t steps_taken() const { return t_; }
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  struct State {
    std::vector<double> m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<State> state_;
};

}  // namespace rewindrl::nn
