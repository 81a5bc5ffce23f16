#include "rewind/reward/aggregator.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace rewindrl::reward {

// Phase accounting for the packed pass, enabled by REWIND_PROFILE=1.
// Printed by profile_report() (the benchmark tool calls it).
namespace {

struct PhaseClock {
  static bool enabled() {
    static const bool on = [] {
      const char* e = std::getenv("REWIND_PROFILE");
      return e && e[0] == '1';
    }();
    return on;
  }
  static double* slot(int i) {
    static double acc[16] = {};
    return &acc[i];
  }
  static const char* name(int i) {
    static const char* names[16] = {"pack+proj", "qkv gemm",  "attn fwd",
                                    "wo+ff gemm", "ln+copies", "head+loss",
                                    "bwd head",   "bwd ln+ff", "bwd attn",
                                    "bwd qkv",    "bwd input", "", "", "", "",
                                    ""};
    return names[i];
  }
  double t0 = 0;
  int phase = -1;
  void start(int p) {
    if (!enabled()) return;
    flush();
    phase = p;
    t0 = std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
             .count();
  }
  void flush() {
    if (!enabled() || phase < 0) return;
    *slot(phase) += std::chrono::duration<double>(
                        std::chrono::steady_clock::now().time_since_epoch())
                        .count() -
                    t0;
    phase = -1;
  }
};

}  // namespace

void profile_report() {
  if (!PhaseClock::enabled()) {
    std::printf("profiling disabled; set REWIND_PROFILE=1\n");
    return;
  }
  for (int i = 0; i < 16; ++i)
    if (*PhaseClock::slot(i) > 0)
      std::printf("%-11s %8.3f s\n", PhaseClock::name(i), *PhaseClock::slot(i));
}

const char* pos_mode_name(PosMode m) {
  switch (m) {
    case PosMode::first_frame: return "first_frame";
    case PosMode::full: return "full";
    case PosMode::none: return "none";
  }
  return "?";
}

PosMode pos_mode_from_name(const std::string& s) {
  if (s == "first_frame") return PosMode::first_frame;
  if (s == "full") return PosMode::full;
  if (s == "none") return PosMode::none;
  throw invalid_input("unknown positional mode: " + s);
}

const char* squash_name(Squash s) {
  return s == Squash::logistic ? "logistic" : "linear";
}

Squash squash_from_name(const std::string& s) {
  if (s == "logistic") return Squash::logistic;
  if (s == "linear") return Squash::linear;
  throw invalid_input("unknown squash mode: " + s);
}

namespace {

// Grow-only sizing: callers compute their own offsets, so a longer buffer
// is always safe and steady-state steps never refill.
template <class T>
void ensure(std::vector<T>& v, std::size_t n) {
  if (v.size() < n) v.resize(n);
}

template <class T>
void zero(std::vector<T>& v, std::size_t n) {
  v.assign(n, T(0));
}

template <class T, int DK>
T dot_dk(const T* a, const T* b, int dk) {
  T s = 0;
  if constexpr (DK > 0) {
#pragma omp simd reduction(+ : s)
    for (int i = 0; i < DK; ++i) s += a[i] * b[i];
    (void)dk;
  } else {
#pragma omp simd reduction(+ : s)
    for (int i = 0; i < dk; ++i) s += a[i] * b[i];
  }
  return s;
}

}  // namespace

// Q, K, V live in one packed R x 3H buffer (columns [0,H) = Q, [H,2H) = K,
// [2H,3H) = V) so the input projection and its backward each run as a
// single GEMM.
template <class T>
template <int DK>
void Aggregator<T>::attention_forward_t(typename Work::LayerCache& c,
                                        const Work& w) {
  const int H = cfg_.hidden, nh = cfg_.heads, dk = H / nh;
  const int W3 = 3 * H;
  const T inv = T(1) / std::sqrt(T(dk));
  zero(c.ctx, std::size_t(w.R) * H);

#pragma omp parallel for schedule(static)
  for (int sh = 0; sh < w.S * nh; ++sh) {
    const int s = sh / nh, h = sh % nh;
    const int len = w.len[s], off = w.off[s];
    T* probs = c.probs.data() + c.pbase[s] + std::size_t(h) * len * len;
    T sc[64];
    for (int q = 0; q < len; ++q) {
      const T* qp = c.qkv.data() + std::size_t(off + q) * W3 + h * dk;
      T mx = -std::numeric_limits<T>::infinity();
      const T* krow = c.qkv.data() + std::size_t(off) * W3 + H + h * dk;
      for (int j = 0; j <= q; ++j) {
        sc[j] = dot_dk<T, DK>(qp, krow + std::size_t(j) * W3, dk) * inv;
        mx = std::max(mx, sc[j]);
      }
      T denom = 0;
      for (int j = 0; j <= q; ++j) {
        sc[j] = std::exp(sc[j] - mx);
        denom += sc[j];
      }
      T* prow = probs + std::size_t(q) * len;
      for (int j = 0; j <= q; ++j) prow[j] = sc[j] / denom;
      T* ctx = c.ctx.data() + std::size_t(off + q) * H + h * dk;
      const T* vrow = c.qkv.data() + std::size_t(off) * W3 + 2 * H + h * dk;
      for (int j = 0; j <= q; ++j) {
        const T p = prow[j];
        const T* v = vrow + std::size_t(j) * W3;
        if constexpr (DK > 0) {
#pragma omp simd
          for (int d = 0; d < DK; ++d) ctx[d] += p * v[d];
        } else {
#pragma omp simd
          for (int d = 0; d < dk; ++d) ctx[d] += p * v[d];
        }
      }
    }
  }
}

template <class T>
template <int DK>
void Aggregator<T>::attention_backward_t(typename Work::LayerCache& c, Work& w) {
  const int H = cfg_.hidden, nh = cfg_.heads, dk = H / nh;
  const int W3 = 3 * H;
  const T inv = T(1) / std::sqrt(T(dk));
  zero(w.dqkv, std::size_t(w.R) * W3);

#pragma omp parallel for schedule(static)
  for (int sh = 0; sh < w.S * nh; ++sh) {
    const int s = sh / nh, h = sh % nh;
    const int len = w.len[s], off = w.off[s];
    const T* probs = c.probs.data() + c.pbase[s] + std::size_t(h) * len * len;
    const T* vrow = c.qkv.data() + std::size_t(off) * W3 + 2 * H + h * dk;
    const T* krow = c.qkv.data() + std::size_t(off) * W3 + H + h * dk;
    T* dkrow = w.dqkv.data() + std::size_t(off) * W3 + H + h * dk;
    T* dvrow = w.dqkv.data() + std::size_t(off) * W3 + 2 * H + h * dk;
    T dp[64], ds[64];
    for (int q = 0; q < len; ++q) {
      const T* dctx = w.dctx.data() + std::size_t(off + q) * H + h * dk;
      const T* prow = probs + std::size_t(q) * len;
      T sum = 0;
      for (int j = 0; j <= q; ++j) {
        dp[j] = dot_dk<T, DK>(dctx, vrow + std::size_t(j) * W3, dk);
        sum += prow[j] * dp[j];
      }
      for (int j = 0; j <= q; ++j) ds[j] = prow[j] * (dp[j] - sum);
      T* dqp = w.dqkv.data() + std::size_t(off + q) * W3 + h * dk;
      const T* qp = c.qkv.data() + std::size_t(off + q) * W3 + h * dk;
      for (int j = 0; j <= q; ++j) {
        const T* kp = krow + std::size_t(j) * W3;
        T* dkp = dkrow + std::size_t(j) * W3;
        T* dvp = dvrow + std::size_t(j) * W3;
        const T dsj = ds[j] * inv;
        const T pj = prow[j];
        if constexpr (DK > 0) {
#pragma omp simd
          for (int d = 0; d < DK; ++d) {
            dqp[d] += dsj * kp[d];
            dkp[d] += dsj * qp[d];
            dvp[d] += pj * dctx[d];
          }
        } else {
#pragma omp simd
          for (int d = 0; d < dk; ++d) {
            dqp[d] += dsj * kp[d];
            dkp[d] += dsj * qp[d];
            dvp[d] += pj * dctx[d];
          }
        }
      }
    }
  }
}

template <class T>
void Aggregator<T>::attention_forward(typename Work::LayerCache& c,
                                      const Work& w) {
  const int dk = cfg_.hidden / cfg_.heads;
  if (dk == 16)
    attention_forward_t<16>(c, w);
  else if (dk == 8)
    attention_forward_t<8>(c, w);
  else
    attention_forward_t<0>(c, w);
}

template <class T>
void Aggregator<T>::attention_backward(typename Work::LayerCache& c, Work& w) {
  const int dk = cfg_.hidden / cfg_.heads;
  if (dk == 16)
    attention_backward_t<16>(c, w);
  else if (dk == 8)
    attention_backward_t<8>(c, w);
  else
    attention_backward_t<0>(c, w);
}

template <class T>
void Aggregator<T>::run(const SeqRef* seqs, int S, bool with_grad,
                        std::vector<std::vector<T>>* outputs, double* loss_out) {
  const int H = cfg_.hidden, FF = cfg_.ff, L = cfg_.layers;
  const int W3 = 3 * H;
  auto& w = work_;

  w.S = S;
  w.off.assign(S + 1, 0);
  w.len.assign(S, 0);
  for (int s = 0; s < S; ++s) {
    if (seqs[s].t < 1) throw invalid_input("aggregator: empty frame sequence");
    if (seqs[s].t > cfg_.max_seq())
      throw invalid_input("aggregator: sequence of " + std::to_string(seqs[s].t) +
                          " frames exceeds the frame cap " +
                          std::to_string(cfg_.max_seq()) +
                          "; subsample before calling");
    w.len[s] = seqs[s].t + 1;
    w.off[s + 1] = w.off[s] + w.len[s];
  }
  const int R = w.off[S];
  w.R = R;
  const int F = R - S;  // frame rows
  PhaseClock pc;
  pc.start(0);

  w.frame_of.assign(R, 0);
  w.seq_of.assign(R, 0);
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < w.len[s]; ++j) {
      w.frame_of[w.off[s] + j] = j;  // 0 marks the language token
      w.seq_of[w.off[s] + j] = s;
    }

  // Pack inputs, project, scatter into token rows.
  ensure(w.packed_frames, std::size_t(F) * cfg_.d_img);
  ensure(w.packed_lang, std::size_t(S) * cfg_.d_lang);
  {
    std::size_t fr = 0;
    for (int s = 0; s < S; ++s) {
      std::memcpy(w.packed_frames.data() + fr * cfg_.d_img, seqs[s].frames,
                  sizeof(T) * std::size_t(seqs[s].t) * cfg_.d_img);
      fr += seqs[s].t;
      std::memcpy(w.packed_lang.data() + std::size_t(s) * cfg_.d_lang,
                  seqs[s].lang, sizeof(T) * cfg_.d_lang);
    }
  }
  ensure(w.proj_f, std::size_t(F) * H);
  ensure(w.proj_l, std::size_t(S) * H);
  nn::gemm_nn(F, H, cfg_.d_img, w.packed_frames.data(), w_img_.w.data(),
              w.proj_f.data());
  nn::add_row_bias(F, H, b_img_.w.data(), w.proj_f.data());
  nn::gemm_nn(S, H, cfg_.d_lang, w.packed_lang.data(), w_lang_.w.data(),
              w.proj_l.data());
  nn::add_row_bias(S, H, b_lang_.w.data(), w.proj_l.data());

  if (int(w.x_in.size()) != L + 1) w.x_in.assign(L + 1, {});
  ensure(w.x_in[0], std::size_t(R) * H);
  {
    std::size_t fr = 0;
    for (int s = 0; s < S; ++s) {
      std::memcpy(w.x_in[0].data() + std::size_t(w.off[s]) * H,
                  w.proj_l.data() + std::size_t(s) * H, sizeof(T) * H);
      for (int f = 1; f < w.len[s]; ++f, ++fr) {
        T* row = w.x_in[0].data() + std::size_t(w.off[s] + f) * H;
        std::memcpy(row, w.proj_f.data() + fr * H, sizeof(T) * H);
        if (cfg_.pos_mode == PosMode::first_frame && f == 1)
          for (int d = 0; d < H; ++d) row[d] += pos_.w[d];
        else if (cfg_.pos_mode == PosMode::full)
          for (int d = 0; d < H; ++d) row[d] += pos_.w[std::size_t(f - 1) * H + d];
      }
    }
  }

  // Fused per-layer QKV weights (H x 3H) and bias (3H).
  ensure(w.wqkv, std::size_t(L) * H * W3);
  ensure(w.bqkv, std::size_t(L) * W3);
  for (int l = 0; l < L; ++l) {
    auto& ly = layers_[l];
    T* dst = w.wqkv.data() + std::size_t(l) * H * W3;
    for (int i = 0; i < H; ++i) {
      std::memcpy(dst + std::size_t(i) * W3, ly.wq.w.data() + std::size_t(i) * H,
                  sizeof(T) * H);
      std::memcpy(dst + std::size_t(i) * W3 + H,
                  ly.wk.w.data() + std::size_t(i) * H, sizeof(T) * H);
      std::memcpy(dst + std::size_t(i) * W3 + 2 * H,
                  ly.wv.w.data() + std::size_t(i) * H, sizeof(T) * H);
    }
    T* bdst = w.bqkv.data() + std::size_t(l) * W3;
    std::memcpy(bdst, ly.bq.w.data(), sizeof(T) * H);
    std::memcpy(bdst + H, ly.bk.w.data(), sizeof(T) * H);
    std::memcpy(bdst + 2 * H, ly.bv.w.data(), sizeof(T) * H);
  }

  if (int(w.lc.size()) != L) w.lc.assign(L, {});
  for (int l = 0; l < L; ++l) {
    auto& c = w.lc[l];
    auto& ly = layers_[l];
    const auto& X = w.x_in[l];

    c.pbase.assign(S, 0);
    std::size_t tot = 0;
    for (int s = 0; s < S; ++s) {
      c.pbase[s] = tot;
      tot += std::size_t(cfg_.heads) * w.len[s] * w.len[s];
    }
    ensure(c.probs, tot);

    pc.start(1);
    ensure(c.qkv, std::size_t(R) * W3);
    nn::gemm_nn(R, W3, H, X.data(), w.wqkv.data() + std::size_t(l) * H * W3,
                c.qkv.data());
    nn::add_row_bias(R, W3, w.bqkv.data() + std::size_t(l) * W3, c.qkv.data());

    pc.start(2);
    attention_forward(c, w);

    pc.start(3);
    ensure(c.add1, std::size_t(R) * H);
    nn::gemm_nn(R, H, H, c.ctx.data(), ly.wo.w.data(), c.add1.data());
    nn::add_row_bias(R, H, ly.bo.w.data(), c.add1.data());
#pragma omp parallel for schedule(static)
    for (int r = 0; r < R; ++r)
      for (int d = 0; d < H; ++d)
        c.add1[std::size_t(r) * H + d] += X[std::size_t(r) * H + d];

    pc.start(4);
    c.ln1_out = c.add1;
    c.ln1_mean.assign(R, T(0));
    c.ln1_rstd.assign(R, T(0));
    nn::Mlp<T>::layernorm_forward(R, H, c.ln1_out.data(), ly.ln1g.w.data(),
                                  ly.ln1b.w.data(), c.ln1_mean.data(),
                                  c.ln1_rstd.data());

    pc.start(3);
    ensure(c.ff_pre, std::size_t(R) * FF);
    nn::gemm_nn(R, FF, H, c.ln1_out.data(), ly.w1.w.data(), c.ff_pre.data());
    nn::add_row_bias(R, FF, ly.b1.w.data(), c.ff_pre.data());
    pc.start(4);
    ensure(c.ff_act, std::size_t(R) * FF);
    nn::Mlp<T>::relu_copy(R, FF, c.ff_pre.data(), c.ff_act.data());

    pc.start(3);
    ensure(c.add2, std::size_t(R) * H);
    nn::gemm_nn(R, H, FF, c.ff_act.data(), ly.w2.w.data(), c.add2.data());
    nn::add_row_bias(R, H, ly.b2.w.data(), c.add2.data());
#pragma omp parallel for schedule(static)
    for (int r = 0; r < R; ++r)
      for (int d = 0; d < H; ++d)
        c.add2[std::size_t(r) * H + d] += c.ln1_out[std::size_t(r) * H + d];

    pc.start(4);
    w.x_in[l + 1] = c.add2;
    c.ln2_mean.assign(R, T(0));
    c.ln2_rstd.assign(R, T(0));
    nn::Mlp<T>::layernorm_forward(R, H, w.x_in[l + 1].data(), ly.ln2g.w.data(),
                                  ly.ln2b.w.data(), c.ln2_mean.data(),
                                  c.ln2_rstd.data());
  }

  // Scalar head over every token row; only frame rows feed outputs/loss.
  pc.start(5);
  const auto& Y = w.x_in[L];
  ensure(w.head_pre, std::size_t(R) * H);
  nn::gemm_nn(R, H, H, Y.data(), wh1_.w.data(), w.head_pre.data());
  nn::add_row_bias(R, H, bh1_.w.data(), w.head_pre.data());
  w.head_act = w.head_pre;
  nn::Mlp<T>::relu_inplace(R, H, w.head_act.data());
  ensure(w.z, std::size_t(R));
  nn::gemm_nn(R, 1, H, w.head_act.data(), wh2_.w.data(), w.z.data());
  for (int r = 0; r < R; ++r) w.z[r] += bh2_.w[0];

  std::vector<T>& dz = w.dz;
  if (with_grad) zero(dz, R);
  if (outputs) {
    outputs->assign(S, {});
    for (int s = 0; s < S; ++s) (*outputs)[s].assign(seqs[s].t, T(0));
  }
  double loss = 0;
  for (int r = 0; r < R; ++r) {
    const int f = w.frame_of[r];
    if (f == 0) continue;
    const int s = w.seq_of[r];
    T reward, dreward_dz;
    if (cfg_.squash == Squash::logistic) {
      reward = T(1) / (T(1) + std::exp(-w.z[r]));
      dreward_dz = reward * (T(1) - reward);
    } else {
      // Linear mode: the loss runs on the raw score so gradients never die
      // at the clamp; reported rewards are clamped to [0, 1].
      reward = std::clamp(w.z[r], T(0), T(1));
      dreward_dz = T(1);
    }
    if (outputs) (*outputs)[s][f - 1] = reward;
    if (loss_out && seqs[s].targets) {
      const T pred = cfg_.squash == Squash::logistic ? reward : w.z[r];
      const T diff = pred - seqs[s].targets[f - 1];
      loss += double(diff) * double(diff);
      if (with_grad) dz[r] = T(2) * diff * dreward_dz;
    }
  }
  if (loss_out) *loss_out += loss;
  if (!with_grad) {
    pc.flush();
    return;
  }

  // ---- backward ----
  // Weight gradients dW = X^T dY run as gemm_nn over the transposed
  // activation (identical ascending reduction order, faster inner loop).
  // Row-blocking keeps each dY slab L2-resident; blocks accumulate in
  // ascending order, so sums match the unblocked form exactly.
  auto grad_weight = [&](int in_dim, int out_dim, int rows, const T* X,
                         const T* dY, T* dW) {
    const int kb = 512;
    for (int k0 = 0; k0 < rows; k0 += kb) {
      const int kn = std::min(kb, rows - k0);
      ensure(w.at, std::size_t(in_dim) * kb);
      nn::transpose(kn, in_dim, X + std::size_t(k0) * in_dim, w.at.data());
      nn::gemm_nn(in_dim, out_dim, kn, w.at.data(),
                  dY + std::size_t(k0) * out_dim, dW, /*accumulate=*/true);
    }
  };

  pc.start(6);
  auto& dx = w.dx;
  zero(dx, std::size_t(R) * H);
  {
    ensure(w.dact, std::size_t(R) * H);
    nn::bias_grad(R, 1, dz.data(), bh2_.g.data());
    grad_weight(H, 1, R, w.head_act.data(), dz.data(), wh2_.g.data());
#pragma omp parallel for schedule(static)
    for (int r = 0; r < R; ++r)
      for (int d = 0; d < H; ++d)
        w.dact[std::size_t(r) * H + d] = dz[r] * wh2_.w[d];
    nn::Mlp<T>::relu_backward(R, H, w.head_pre.data(), w.dact.data());
    grad_weight(H, H, R, Y.data(), w.dact.data(), wh1_.g.data());
    nn::bias_grad(R, H, w.dact.data(), bh1_.g.data());
    ensure(w.wt, std::size_t(H) * H);
    nn::transpose(H, H, wh1_.w.data(), w.wt.data());
    nn::gemm_nn(R, H, H, w.dact.data(), w.wt.data(), dx.data());
  }

  for (int l = L - 1; l >= 0; --l) {
    auto& c = w.lc[l];
    auto& ly = layers_[l];
    const auto& X = w.x_in[l];

    // LN2 backward: dx currently holds d(ln2_out); produce d(add2).
    pc.start(7);
    ensure(w.dadd2, std::size_t(R) * H);
    nn::Mlp<T>::layernorm_backward(R, H, c.add2.data(), c.ln2_mean.data(),
                                   c.ln2_rstd.data(), ly.ln2g.w.data(),
                                   dx.data(), w.dadd2.data(), ly.ln2g.g.data(),
                                   ly.ln2b.g.data());

    // FF branch.
    ensure(w.dff, std::size_t(R) * FF);
    grad_weight(FF, H, R, c.ff_act.data(), w.dadd2.data(), ly.w2.g.data());
    nn::bias_grad(R, H, w.dadd2.data(), ly.b2.g.data());
    ensure(w.wt, std::size_t(FF) * H);
    nn::transpose(FF, H, ly.w2.w.data(), w.wt.data());
    nn::gemm_nn(R, FF, H, w.dadd2.data(), w.wt.data(), w.dff.data());
    nn::Mlp<T>::relu_backward(R, FF, c.ff_pre.data(), w.dff.data());
    grad_weight(H, FF, R, c.ln1_out.data(), w.dff.data(), ly.w1.g.data());
    nn::bias_grad(R, FF, w.dff.data(), ly.b1.g.data());
    ensure(w.dln1, std::size_t(R) * H);
    ensure(w.wt, std::size_t(H) * FF);
    nn::transpose(H, FF, ly.w1.w.data(), w.wt.data());
    nn::gemm_nn(R, H, FF, w.dff.data(), w.wt.data(), w.dln1.data());
    // Residual path from add2 into ln1_out.
#pragma omp parallel for schedule(static)
    for (int r = 0; r < R; ++r)
      for (int d = 0; d < H; ++d)
        w.dln1[std::size_t(r) * H + d] += w.dadd2[std::size_t(r) * H + d];

    // LN1 backward to d(add1).
    ensure(w.dadd1, std::size_t(R) * H);
    nn::Mlp<T>::layernorm_backward(R, H, c.add1.data(), c.ln1_mean.data(),
                                   c.ln1_rstd.data(), ly.ln1g.w.data(),
                                   w.dln1.data(), w.dadd1.data(),
                                   ly.ln1g.g.data(), ly.ln1b.g.data());

    // Attention output projection.
    ensure(w.dctx, std::size_t(R) * H);
    grad_weight(H, H, R, c.ctx.data(), w.dadd1.data(), ly.wo.g.data());
    nn::bias_grad(R, H, w.dadd1.data(), ly.bo.g.data());
    ensure(w.wt, std::size_t(H) * H);
    nn::transpose(H, H, ly.wo.w.data(), w.wt.data());
    nn::gemm_nn(R, H, H, w.dadd1.data(), w.wt.data(), w.dctx.data());

    pc.start(8);
    attention_backward(c, w);

    pc.start(9);
    // Fused QKV backward: one weight-grad GEMM into a scratch block that is
    // sliced into the per-projection grads, one data-grad GEMM.
    {
      ensure(w.at, std::size_t(H) * R);
      nn::transpose(R, H, X.data(), w.at.data());
      ensure(w.dwqkv, std::size_t(H) * W3);
      nn::gemm_nn(H, W3, R, w.at.data(), w.dqkv.data(), w.dwqkv.data());
      for (int i = 0; i < H; ++i) {
        const T* src = w.dwqkv.data() + std::size_t(i) * W3;
        for (int d = 0; d < H; ++d) {
          ly.wq.g[std::size_t(i) * H + d] += src[d];
          ly.wk.g[std::size_t(i) * H + d] += src[H + d];
          ly.wv.g[std::size_t(i) * H + d] += src[2 * H + d];
        }
      }
      ensure(w.dbqkv, std::size_t(W3));
      std::fill(w.dbqkv.begin(), w.dbqkv.end(), T(0));
      nn::bias_grad(R, W3, w.dqkv.data(), w.dbqkv.data());
      for (int d = 0; d < H; ++d) {
        ly.bq.g[d] += w.dbqkv[d];
        ly.bk.g[d] += w.dbqkv[H + d];
        ly.bv.g[d] += w.dbqkv[2 * H + d];
      }
    }

    dx = w.dadd1;
    ensure(w.wt, std::size_t(W3) * H);
    nn::transpose(H, W3, w.wqkv.data() + std::size_t(l) * H * W3, w.wt.data());
    nn::gemm_nn(R, H, W3, w.dqkv.data(), w.wt.data(), dx.data(), true);
  }

  // Input projections and positional vectors.
  pc.start(10);
  {
    ensure(w.dproj_f, std::size_t(F) * H);
    ensure(w.dproj_l, std::size_t(S) * H);
    std::size_t fr = 0;
    for (int s = 0; s < S; ++s) {
      std::memcpy(w.dproj_l.data() + std::size_t(s) * H,
                  dx.data() + std::size_t(w.off[s]) * H, sizeof(T) * H);
      for (int f = 1; f < w.len[s]; ++f, ++fr) {
        const T* row = dx.data() + std::size_t(w.off[s] + f) * H;
        std::memcpy(w.dproj_f.data() + fr * H, row, sizeof(T) * H);
        if (cfg_.pos_mode == PosMode::first_frame && f == 1)
          for (int d = 0; d < H; ++d) pos_.g[d] += row[d];
        else if (cfg_.pos_mode == PosMode::full)
          for (int d = 0; d < H; ++d) pos_.g[std::size_t(f - 1) * H + d] += row[d];
      }
    }
    grad_weight(cfg_.d_img, H, F, w.packed_frames.data(), w.dproj_f.data(),
                w_img_.g.data());
    nn::bias_grad(F, H, w.dproj_f.data(), b_img_.g.data());
    grad_weight(cfg_.d_lang, H, S, w.packed_lang.data(), w.dproj_l.data(),
                w_lang_.g.data());
    nn::bias_grad(S, H, w.dproj_l.data(), b_lang_.g.data());
  }
  pc.flush();
}

template class Aggregator<float>;
template class Aggregator<double>;

}  // namespace rewindrl::reward
