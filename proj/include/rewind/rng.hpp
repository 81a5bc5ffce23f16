#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "rewind/common.hpp"

namespace rewindrl {

// Deterministic RNG wrapper. All distributions are derived from the raw
// mt19937_64 stream by fixed arithmetic, so results are identical across
// compilers and standard libraries (std:: distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return double(raw() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw invalid_input("uniform_int: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = raw();
    } while (x >= limit);
    return x % n;
  }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + std::int64_t(uniform_int(std::uint64_t(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller without caching; draw order stays a pure function of the
  // engine state.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    u1 = std::max(u1, 0x1.0p-60);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Derive an independent child stream. Consumes one draw from this stream.
  Rng fork(std::uint64_t salt) {
    return Rng(raw() ^ (salt * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull));
  }

  std::string serialize() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }

  static Rng deserialize(const std::string& s) {
    Rng r(0);
    std::istringstream is(s);
    is >> r.eng_;
    if (!is) throw corruption_error("rng state: unparsable");
    return r;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace rewindrl
