#include "rewind/data/encoders.hpp"

#include <cctype>
#include <cmath>

namespace rewindrl::data {

const char* family_name(Family f) {
  switch (f) {
    case Family::reach: return "reach";
    case Family::push: return "push";
    case Family::pull: return "pull";
    case Family::pick_place: return "pick-place";
  }
  return "?";
}

Family family_from_name(const std::string& s) {
  if (s == "reach") return Family::reach;
  if (s == "push") return Family::push;
  if (s == "pull") return Family::pull;
  if (s == "pick-place") return Family::pick_place;
  throw invalid_input("unknown task family: " + s);
}

const char* role_name(DatasetRole r) {
  switch (r) {
    case DatasetRole::target_demos: return "target_demos";
    case DatasetRole::openx_proxy: return "openx_proxy";
    case DatasetRole::rollout_sets: return "rollout_sets";
  }
  return "?";
}

DatasetRole role_from_name(const std::string& s) {
  if (s == "target_demos") return DatasetRole::target_demos;
  if (s == "openx_proxy") return DatasetRole::openx_proxy;
  if (s == "rollout_sets") return DatasetRole::rollout_sets;
  throw corruption_error("manifest: unknown role '" + s + "'");
}

FrozenEncoder::FrozenEncoder(int in_dim, int out_dim, std::uint64_t seed)
    : in_dim_(in_dim), out_dim_(out_dim), seed_(seed), W_(out_dim, in_dim) {
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(double(in_dim));
  for (auto& w : W_.v) w = Real(rng.normal() * scale);
}

void FrozenEncoder::encode_into(const Real* obs, Real* out) const {
  for (int o = 0; o < out_dim_; ++o) {
    const Real* w = W_.row(o);
    Real s = 0;
    for (int i = 0; i < in_dim_; ++i) s += w[i] * obs[i];
    out[o] = s;
  }
}

std::vector<Real> FrozenEncoder::encode(const std::vector<Real>& obs) const {
  if (int(obs.size()) != in_dim_)
    throw invalid_input("encode_observation: expected dim " +
                        std::to_string(in_dim_) + ", got " +
                        std::to_string(obs.size()));
  std::vector<Real> out(out_dim_);
  encode_into(obs.data(), out.data());
  return out;
}

std::uint64_t FrozenEncoder::params_hash() const { return hash_values(W_.v); }

FrozenLanguageEncoder::FrozenLanguageEncoder(int out_dim, std::uint64_t seed)
    : out_dim_(out_dim), seed_(seed), W_(out_dim, kBuckets) {
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(double(kBuckets));
  for (auto& w : W_.v) w = Real(rng.normal() * scale);
}

std::vector<std::string> FrozenLanguageEncoder::tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

std::vector<Real> FrozenLanguageEncoder::encode(const std::string& text) const {
  const auto tokens = tokenize(text);
  if (tokens.empty())
    throw invalid_input("encode_instruction: empty instruction text");
  std::vector<Real> counts(kBuckets, Real(0));
  for (const auto& t : tokens) counts[fnv1a64(t) % kBuckets] += Real(1);
  std::vector<Real> out(out_dim_, Real(0));
  for (int o = 0; o < out_dim_; ++o) {
    const Real* w = W_.row(o);
    Real s = 0;
    for (int i = 0; i < kBuckets; ++i) s += w[i] * counts[i];
    out[o] = s;
  }
  return out;
}

std::uint64_t FrozenLanguageEncoder::params_hash() const {
  return hash_values(W_.v);
}

double cosine_similarity(const std::vector<Real>& a, const std::vector<Real>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace rewindrl::data
