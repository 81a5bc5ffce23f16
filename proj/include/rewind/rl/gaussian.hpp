#pragma once

#include <array>
#include <cmath>

namespace rewindrl::rl {

// Tanh-squashed diagonal Gaussian head math, shared by IQL's AWR extraction
// and the SAC updates. All functions also produce the exact derivatives the
// update rules need; the unit tests check them against finite differences.

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;
constexpr double kAtanhClip = 0.999999;
constexpr double kLogHalf2Pi = 0.9189385332046727;  // 0.5*log(2*pi)
constexpr double kTanhEps = 1e-6;

// Smooth clamp of the raw log-std output: min + 0.5*(max-min)*(tanh(x)+1).
inline double squash_log_std(double raw) {
  return kLogStdMin + 0.5 * (kLogStdMax - kLogStdMin) * (std::tanh(raw) + 1.0);
}
inline double squash_log_std_grad(double raw) {
  const double t = std::tanh(raw);
  return 0.5 * (kLogStdMax - kLogStdMin) * (1.0 - t * t);
}

// log pi(a) for a fixed (dataset) action, one dimension. Returns the log
// density and the gradients w.r.t. mean and log_std.
struct LogProbGrad {
  double logp = 0;
  double dmean = 0;
  double dlog_std = 0;
};

inline LogProbGrad tanh_gaussian_log_prob(double mean, double log_std,
                                          double action) {
  const double a = std::clamp(action, -kAtanhClip, kAtanhClip);
  const double u = std::atanh(a);
  const double sigma = std::exp(log_std);
  const double z = (u - mean) / sigma;
  LogProbGrad g;
  g.logp = -0.5 * z * z - log_std - kLogHalf2Pi - std::log(1.0 - a * a + kTanhEps);
  g.dmean = z / sigma;
  g.dlog_std = z * z - 1.0;
  return g;
}

// Reparameterized sample u = mean + sigma*xi, a = tanh(u), with the
// gradients of both the action and its log density w.r.t. mean and log_std.
struct SampleGrad {
  double action = 0;
  double pre_tanh = 0;
  double logp = 0;
  double da_dmean = 0, da_dlog_std = 0;
  double dlogp_dmean = 0, dlogp_dlog_std = 0;
};

inline SampleGrad tanh_gaussian_sample(double mean, double log_std, double xi) {
  const double sigma = std::exp(log_std);
  const double u = mean + sigma * xi;
  const double a = std::tanh(u);
  SampleGrad s;
  s.pre_tanh = u;
  s.action = a;
  s.logp = -0.5 * xi * xi - log_std - kLogHalf2Pi - std::log(1.0 - a * a + kTanhEps);
  const double da_du = 1.0 - a * a;
  s.da_dmean = da_du;
  s.da_dlog_std = da_du * sigma * xi;
  const double dlogp_du = 2.0 * a * da_du / (1.0 - a * a + kTanhEps);
  s.dlogp_dmean = dlogp_du;
  s.dlogp_dlog_std = -1.0 + dlogp_du * sigma * xi;
  return s;
}

// KL(N1 || N2) for one diagonal dimension; tanh squashing leaves the KL of
// the underlying Gaussians unchanged. Gradients are w.r.t. the first
// (trainable) distribution.
struct KlGrad {
  double kl = 0;
  double dmean1 = 0;
  double dlog_std1 = 0;
};

inline KlGrad gaussian_kl(double mean1, double log_std1, double mean2,
                          double log_std2) {
  const double s1 = std::exp(log_std1), s2 = std::exp(log_std2);
  const double dm = mean1 - mean2;
  KlGrad k;
  k.kl = log_std2 - log_std1 + (s1 * s1 + dm * dm) / (2.0 * s2 * s2) - 0.5;
  k.dmean1 = dm / (s2 * s2);
  k.dlog_std1 = -1.0 + s1 * s1 / (s2 * s2);
  return k;
}

}  // namespace rewindrl::rl
