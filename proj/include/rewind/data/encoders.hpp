#pragma once

#include <string>
#include <vector>

#include "rewind/data/types.hpp"
#include "rewind/rng.hpp"

namespace rewindrl::data {

// Frozen observation encoder: a seeded random linear projection standing in
// for a pretrained vision backbone. Pure function of (seed, input); nothing
// in the pipeline ever updates it.
class FrozenEncoder {
 public:
  FrozenEncoder(int in_dim, int out_dim, std::uint64_t seed);

  std::vector<Real> encode(const std::vector<Real>& obs) const;
  void encode_into(const Real* obs, Real* out) const;

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t params_hash() const;

 private:
  int in_dim_, out_dim_;
  std::uint64_t seed_;
  Mat W_;  // out_dim x in_dim
};

// Frozen language encoder: hashed bag-of-tokens counts through a seeded
// random linear projection.
class FrozenLanguageEncoder {
 public:
  static constexpr int kBuckets = 256;

  FrozenLanguageEncoder(int out_dim, std::uint64_t seed);

  std::vector<Real> encode(const std::string& text) const;

  static std::vector<std::string> tokenize(const std::string& text);

  int out_dim() const { return out_dim_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t params_hash() const;

 private:
  int out_dim_;
  std::uint64_t seed_;
  Mat W_;  // out_dim x kBuckets
};

// The pair of frozen encoders a dataset was embedded with, derived from the
// single recorded seed.
struct EncoderSet {
  FrozenEncoder obs;
  FrozenLanguageEncoder lang;

  EncoderSet(int obs_in_dim, int d_img, int d_lang, std::uint64_t seed)
      : obs(obs_in_dim, d_img, seed), lang(d_lang, seed + 1) {}
};

double cosine_similarity(const std::vector<Real>& a, const std::vector<Real>& b);

}  // namespace rewindrl::data
