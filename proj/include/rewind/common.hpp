#pragma once

#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rewindrl {

// Default scalar type for model parameters and activations. Tests
// instantiate the templated math on double where tighter precision is
// needed (finite-difference gradient oracles).
using Real = float;

// Thrown when an operation's preconditions are violated by the caller.
struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when stored data contradicts its manifest or is unreadable.
struct corruption_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown by correlation routines on degenerate (zero-variance) input.
struct undefined_correlation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown by sample_mismatched when the dataset has a single task.
struct no_mismatch_available : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a rollout-set generator exhausts its attempt budget.
struct generation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

template <class T>
std::uint64_t hash_values(const std::vector<T>& v,
                          std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(v.data(), v.size() * sizeof(T), h);
}

}  // namespace rewindrl
