#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rewind/nn/kernels.hpp"
#include "rewind/nn/mlp.hpp"
#include "rewind/nn/params.hpp"

namespace rewindrl::reward {

enum class PosMode { first_frame, full, none };
enum class Squash { logistic, linear };

const char* pos_mode_name(PosMode m);
PosMode pos_mode_from_name(const std::string& s);
const char* squash_name(Squash s);
Squash squash_from_name(const std::string& s);

// Prints accumulated phase times when REWIND_PROFILE=1.
void profile_report();

struct AggregatorConfig {
  int d_img = 64;
  int d_lang = 32;
  int hidden = 128;
  int layers = 4;
  int heads = 8;
  int ff = 512;
  int max_frames = 16;  // subsample length; rewound inputs may run 3 over
  PosMode pos_mode = PosMode::first_frame;
  Squash squash = Squash::logistic;

  // The last3 rewind appends up to 3 mirrored frames past max_frames.
  int max_seq() const { return max_frames + 3; }

  void validate() const {
    if (hidden % heads != 0)
      throw invalid_input("aggregator: hidden must be divisible by heads");
    if (max_frames < 2) throw invalid_input("aggregator: max_frames must be >= 2");
    if (layers < 1 || heads < 1 || ff < 1 || hidden < 1)
      throw invalid_input("aggregator: bad dimensions");
  }
};

// Cross-modal sequential aggregator: the language token at position 0
// followed by frame tokens, causally masked self-attention (post-norm), and
// a per-frame scalar head. Frame s output depends only on (o_{1:s}, z).
template <class T>
class Aggregator {
 public:
  struct SeqRef {
    const T* frames = nullptr;   // t x d_img row-major
    int t = 0;
    const T* lang = nullptr;     // d_lang
    const T* targets = nullptr;  // t, optional (loss/backward only)
  };

  Aggregator() = default;
  Aggregator(const AggregatorConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    const int H = cfg_.hidden;
    w_img_.init_sized("agg.w_img", cfg_.d_img, H);
    b_img_.init_sized("agg.b_img", H, 1);
    w_lang_.init_sized("agg.w_lang", cfg_.d_lang, H);
    b_lang_.init_sized("agg.b_lang", H, 1);
    const int n_pos = cfg_.pos_mode == PosMode::first_frame ? 1
                      : cfg_.pos_mode == PosMode::full      ? cfg_.max_seq()
                                                            : 0;
    pos_.init_sized("agg.pos", n_pos, H);
    layers_.resize(cfg_.layers);
    for (int l = 0; l < cfg_.layers; ++l) {
      auto& ly = layers_[l];
      const std::string p = "agg.l" + std::to_string(l) + ".";
      ly.wq.init_sized(p + "wq", H, H);
      ly.bq.init_sized(p + "bq", H, 1);
      ly.wk.init_sized(p + "wk", H, H);
      ly.bk.init_sized(p + "bk", H, 1);
      ly.wv.init_sized(p + "wv", H, H);
      ly.bv.init_sized(p + "bv", H, 1);
      ly.wo.init_sized(p + "wo", H, H);
      ly.bo.init_sized(p + "bo", H, 1);
      ly.ln1g.init_sized(p + "ln1g", H, 1);
      ly.ln1b.init_sized(p + "ln1b", H, 1);
      ly.w1.init_sized(p + "w1", H, cfg_.ff);
      ly.b1.init_sized(p + "b1", cfg_.ff, 1);
      ly.w2.init_sized(p + "w2", cfg_.ff, H);
      ly.b2.init_sized(p + "b2", H, 1);
      ly.ln2g.init_sized(p + "ln2g", H, 1);
      ly.ln2b.init_sized(p + "ln2b", H, 1);
    }
    wh1_.init_sized("agg.wh1", H, H);
    bh1_.init_sized("agg.bh1", H, 1);
    wh2_.init_sized("agg.wh2", H, 1);
    bh2_.init_sized("agg.bh2", 1, 1);
    init_weights(init_seed);
  }

  const AggregatorConfig& config() const { return cfg_; }
  int n_positional_vectors() const { return pos_.rows; }

  void visit(std::vector<nn::Param<T>*>& out) {
    out.push_back(&w_img_);
    out.push_back(&b_img_);
    out.push_back(&w_lang_);
    out.push_back(&b_lang_);
    if (pos_.rows > 0) out.push_back(&pos_);
    for (auto& ly : layers_)
      for (auto* p : {&ly.wq, &ly.bq, &ly.wk, &ly.bk, &ly.wv, &ly.bv, &ly.wo,
                      &ly.bo, &ly.ln1g, &ly.ln1b, &ly.w1, &ly.b1, &ly.w2,
                      &ly.b2, &ly.ln2g, &ly.ln2b})
        out.push_back(p);
    out.push_back(&wh1_);
    out.push_back(&bh1_);
    out.push_back(&wh2_);
    out.push_back(&bh2_);
  }

  std::vector<nn::Param<T>*> params() {
    std::vector<nn::Param<T>*> out;
    visit(out);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  std::uint64_t params_hash() {
    return nn::params_hash(params());
  }

  // Per-frame rewards for one sequence.
  std::vector<T> forward(const T* frames, int t, const T* lang) const {
    SeqRef ref{frames, t, lang, nullptr};
    std::vector<std::vector<T>> outs;
    const_cast<Aggregator*>(this)->run(&ref, 1, false, &outs, nullptr);
    return outs[0];
  }

  std::vector<std::vector<T>> forward_many(const std::vector<SeqRef>& seqs) const {
    std::vector<std::vector<T>> outs;
    if (seqs.empty()) return outs;
    const_cast<Aggregator*>(this)->run(seqs.data(), int(seqs.size()), false,
                                       &outs, nullptr);
    return outs;
  }

  // Sum over sequences of per-frame squared error against targets.
  // with_grad accumulates parameter gradients.
  double loss_batch(const std::vector<SeqRef>& seqs, bool with_grad,
                    std::vector<std::vector<T>>* outputs = nullptr) {
    if (seqs.empty()) return 0.0;
    double loss = 0;
    run(seqs.data(), int(seqs.size()), with_grad, outputs, &loss);
    return loss;
  }

 private:
  struct Layer {
    nn::Param<T> wq, bq, wk, bk, wv, bv, wo, bo;
    nn::Param<T> ln1g, ln1b, w1, b1, w2, b2, ln2g, ln2b;
  };

  void init_weights(std::uint64_t seed) {
    Rng rng(seed);
    nn::xavier_init(w_img_, rng);
    nn::xavier_init(w_lang_, rng);
    for (auto& x : pos_.w) x = T(rng.normal() * 0.02);
    for (auto& ly : layers_) {
      nn::xavier_init(ly.wq, rng);
      nn::xavier_init(ly.wk, rng);
      nn::xavier_init(ly.wv, rng);
      nn::xavier_init(ly.wo, rng);
      std::fill(ly.ln1g.w.begin(), ly.ln1g.w.end(), T(1));
      std::fill(ly.ln2g.w.begin(), ly.ln2g.w.end(), T(1));
      nn::xavier_init(ly.w1, rng);
      nn::xavier_init(ly.w2, rng);
    }
    nn::xavier_init(wh1_, rng);
    // Zero head output layer: initial reward is exactly squash(0).
    std::fill(wh2_.w.begin(), wh2_.w.end(), T(0));
  }

  struct Work {
    int R = 0, S = 0;
    std::vector<int> off, len;              // token offsets per sequence
    std::vector<int> frame_of;              // local frame index per row, 0=lang
    std::vector<int> seq_of;                // sequence index per row
    std::vector<T> packed_frames, packed_lang, proj_f, proj_l;
    std::vector<T> wqkv, bqkv;              // fused per-layer QKV weights
    std::vector<std::vector<T>> x_in;       // per layer input, R x H
    struct LayerCache {
      std::vector<T> qkv, probs, ctx, add1, ln1_mean, ln1_rstd, ln1_out,
          ff_pre, ff_act, add2, ln2_mean, ln2_rstd;
      std::vector<std::size_t> pbase;
    };
    std::vector<LayerCache> lc;
    std::vector<T> head_pre, head_act, z, dz;  // head caches
    // backward scratch
    std::vector<T> dx, dqkv, dwqkv, dbqkv, dctx, dff, wt, at;
    std::vector<T> dadd1, dadd2, dln1, dact, dproj_f, dproj_l;
  };

  void run(const SeqRef* seqs, int S, bool with_grad,
           std::vector<std::vector<T>>* outputs, double* loss_out);

  void attention_forward(typename Work::LayerCache& c, const Work& w);
  void attention_backward(typename Work::LayerCache& c, Work& w);
  template <int DK>
  void attention_forward_t(typename Work::LayerCache& c, const Work& w);
  template <int DK>
  void attention_backward_t(typename Work::LayerCache& c, Work& w);

  AggregatorConfig cfg_;
  nn::Param<T> w_img_, b_img_, w_lang_, b_lang_, pos_;
  std::vector<Layer> layers_;
  nn::Param<T> wh1_, bh1_, wh2_, bh2_;
  Work work_;
};

extern template class Aggregator<float>;
extern template class Aggregator<double>;

}  // namespace rewindrl::reward
