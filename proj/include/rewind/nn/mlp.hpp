#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rewind/nn/kernels.hpp"
#include "rewind/nn/params.hpp"

namespace rewindrl::nn {

// Plain MLP: per hidden layer Linear -> optional LayerNorm -> ReLU, then a
// final Linear. Batched row-major forward/backward with explicit caches.
template <class T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, std::vector<int> dims, bool layernorm)
      : name_(name), dims_(std::move(dims)), layernorm_(layernorm) {
    const int L = n_layers();
    W_.resize(L);
    b_.resize(L);
    if (layernorm_) {
      ln_g_.resize(L - 1);
      ln_b_.resize(L - 1);
    }
    for (int l = 0; l < L; ++l) {
      W_[l].init_sized(name_ + ".W" + std::to_string(l), dims_[l], dims_[l + 1]);
      b_[l].init_sized(name_ + ".b" + std::to_string(l), dims_[l + 1], 1);
      if (layernorm_ && l < L - 1) {
        ln_g_[l].init_sized(name_ + ".lng" + std::to_string(l), dims_[l + 1], 1);
        ln_b_[l].init_sized(name_ + ".lnb" + std::to_string(l), dims_[l + 1], 1);
      }
    }
  }

  int n_layers() const { return int(dims_.size()) - 1; }
  int in_dim() const { return dims_.front(); }
  int out_dim() const { return dims_.back(); }

  void init(Rng& rng) {
    for (int l = 0; l < n_layers(); ++l) {
      xavier_init(W_[l], rng);
      std::fill(b_[l].w.begin(), b_[l].w.end(), T(0));
      if (layernorm_ && l < n_layers() - 1) {
        std::fill(ln_g_[l].w.begin(), ln_g_[l].w.end(), T(1));
        std::fill(ln_b_[l].w.begin(), ln_b_[l].w.end(), T(0));
      }
    }
  }

  void zero_final_layer() {
    auto& W = W_.back();
    std::fill(W.w.begin(), W.w.end(), T(0));
    std::fill(b_.back().w.begin(), b_.back().w.end(), T(0));
  }

  struct Cache {
    int M = 0;
    std::vector<std::vector<T>> x;       // layer inputs, x[0] = network input
    std::vector<std::vector<T>> pre_ln;  // linear output before LN (if LN)
    std::vector<std::vector<T>> mean, rstd;
    std::vector<std::vector<T>> act_in;  // input of ReLU
  };

  // X is M x in_dim; writes M x out_dim into Y.
  void forward(int M, const T* X, T* Y, Cache* cache = nullptr) const {
    const int L = n_layers();
    std::vector<T> cur(X, X + std::size_t(M) * dims_[0]);
    if (cache) {
      cache->M = M;
      cache->x.assign(L, {});
      cache->pre_ln.assign(L, {});
      cache->mean.assign(L, {});
      cache->rstd.assign(L, {});
      cache->act_in.assign(L, {});
    }
    for (int l = 0; l < L; ++l) {
      const int din = dims_[l], dout = dims_[l + 1];
      if (cache) cache->x[l] = cur;
      std::vector<T> out(std::size_t(M) * dout);
      gemm_nn(M, dout, din, cur.data(), W_[l].w.data(), out.data());
      add_row_bias(M, dout, b_[l].w.data(), out.data());
      const bool hidden = l < L - 1;
      if (hidden && layernorm_) {
        if (cache) cache->pre_ln[l] = out;
        std::vector<T> mean(M), rstd(M);
        layernorm_forward(M, dout, out.data(), ln_g_[l].w.data(),
                          ln_b_[l].w.data(), mean.data(), rstd.data());
        if (cache) {
          cache->mean[l] = mean;
          cache->rstd[l] = rstd;
        }
      }
      if (hidden) {
        if (cache) cache->act_in[l] = out;
        relu_inplace(M, dout, out.data());
      }
      cur.swap(out);
    }
    std::copy(cur.begin(), cur.end(), Y);
  }

  // dY is M x out_dim. Accumulates parameter gradients; if dX != nullptr
  // writes the input gradient (M x in_dim).
  void backward(const Cache& cache, const T* dY, T* dX = nullptr) {
    const int L = n_layers();
    const int M = cache.M;
    std::vector<T> dcur(dY, dY + std::size_t(M) * dims_[L]);
    for (int l = L - 1; l >= 0; --l) {
      const int din = dims_[l], dout = dims_[l + 1];
      const bool hidden = l < L - 1;
      if (hidden) {
        relu_backward(M, dout, cache.act_in[l].data(), dcur.data());
        if (layernorm_) {
          std::vector<T> dpre(std::size_t(M) * dout);
          layernorm_backward(M, dout, cache.pre_ln[l].data(),
                             cache.mean[l].data(), cache.rstd[l].data(),
                             ln_g_[l].w.data(), dcur.data(), dpre.data(),
                             ln_g_[l].g.data(), ln_b_[l].g.data());
          dcur.swap(dpre);
        }
      }
      gemm_tn(din, dout, M, cache.x[l].data(), dcur.data(), W_[l].g.data());
      bias_grad(M, dout, dcur.data(), b_[l].g.data());
      const bool need_dx = l > 0 || dX != nullptr;
      if (need_dx) {
        std::vector<T> WT(std::size_t(din) * dout);
        transpose(din, dout, W_[l].w.data(), WT.data());
        std::vector<T> dprev(std::size_t(M) * din);
        gemm_nn(M, din, dout, dcur.data(), WT.data(), dprev.data());
        dcur.swap(dprev);
      }
    }
    if (dX) std::copy(dcur.begin(), dcur.end(), dX);
  }

  void visit(std::vector<Param<T>*>& out) {
    for (auto& p : W_) out.push_back(&p);
    for (auto& p : b_) out.push_back(&p);
    for (auto& p : ln_g_) out.push_back(&p);
    for (auto& p : ln_b_) out.push_back(&p);
  }

  static void relu_copy(int M, int N, const T* X, T* Y) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
      const T* x = X + std::size_t(i) * N;
      T* y = Y + std::size_t(i) * N;
#pragma omp simd
      for (int j = 0; j < N; ++j) y[j] = x[j] > T(0) ? x[j] : T(0);
    }
  }

  static void relu_inplace(int M, int N, T* Y) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
      T* y = Y + std::size_t(i) * N;
      for (int j = 0; j < N; ++j) y[j] = y[j] > T(0) ? y[j] : T(0);
    }
  }

  static void relu_backward(int M, int N, const T* pre, T* d) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < N; ++j) {
        const std::size_t k = std::size_t(i) * N + j;
        if (pre[k] <= T(0)) d[k] = T(0);
      }
  }

  static void layernorm_forward(int M, int N, T* X, const T* g, const T* b,
                                T* mean, T* rstd) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
      T* x = X + std::size_t(i) * N;
      T mu = 0;
      for (int j = 0; j < N; ++j) mu += x[j];
      mu /= T(N);
      T var = 0;
      for (int j = 0; j < N; ++j) var += (x[j] - mu) * (x[j] - mu);
      var /= T(N);
      const T rs = T(1) / std::sqrt(var + T(1e-5));
      mean[i] = mu;
      rstd[i] = rs;
      for (int j = 0; j < N; ++j) x[j] = (x[j] - mu) * rs * g[j] + b[j];
    }
  }

  static void layernorm_backward(int M, int N, const T* pre, const T* mean,
                                 const T* rstd, const T* g, const T* dY,
                                 T* dX, T* dg, T* db) {
    // Parameter gradients: row-major scan over a fixed block grid, block
    // partials reduced in ascending order (thread-count independent).
    constexpr int kBlocks = 16;
    const int rows_per = (M + kBlocks - 1) / kBlocks;
    std::vector<T> partials(std::size_t(2 * kBlocks) * N, T(0));
#pragma omp parallel for schedule(static)
    for (int b = 0; b < kBlocks; ++b) {
      T* pg = partials.data() + std::size_t(2 * b) * N;
      T* pb = pg + N;
      const int lo = b * rows_per, hi = std::min(M, lo + rows_per);
      for (int i = lo; i < hi; ++i) {
        const T* x = pre + std::size_t(i) * N;
        const T* dy = dY + std::size_t(i) * N;
        const T mu = mean[i], rs = rstd[i];
#pragma omp simd
        for (int j = 0; j < N; ++j) {
          pg[j] += dy[j] * (x[j] - mu) * rs;
          pb[j] += dy[j];
        }
      }
    }
    for (int b = 0; b < kBlocks; ++b) {
      const T* pg = partials.data() + std::size_t(2 * b) * N;
      const T* pb = pg + N;
      for (int j = 0; j < N; ++j) {
        dg[j] += pg[j];
        db[j] += pb[j];
      }
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < M; ++i) {
      const T* x = pre + std::size_t(i) * N;
      const T* dy = dY + std::size_t(i) * N;
      T* dx = dX + std::size_t(i) * N;
      T sum_dxhat = 0, sum_dxhat_xhat = 0;
      for (int j = 0; j < N; ++j) {
        const T xhat = (x[j] - mean[i]) * rstd[i];
        const T dxhat = dy[j] * g[j];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
      }
      for (int j = 0; j < N; ++j) {
        const T xhat = (x[j] - mean[i]) * rstd[i];
        const T dxhat = dy[j] * g[j];
        dx[j] = rstd[i] * (dxhat - sum_dxhat / T(N) - xhat * sum_dxhat_xhat / T(N));
      }
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<int>& dims() const { return dims_; }
  bool has_layernorm() const { return layernorm_; }

 private:
  std::string name_;
  std::vector<int> dims_;
  bool layernorm_ = false;
  std::vector<Param<T>> W_, b_, ln_g_, ln_b_;
};

}  // namespace rewindrl::nn
