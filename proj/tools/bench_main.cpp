// Benchmark comparing the OpenMP kernels against the serial references, and
// the packed aggregator forward/backward at 1 vs N threads.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "rewind/nn/kernels.hpp"
#include "rewind/reward/train.hpp"
#include "rewind/rng.hpp"

using namespace rewindrl;

namespace {

double now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <class F>
double time_loop(F&& f, int iters) {
  f();  // warmup
  const double t0 = now();
  for (int i = 0; i < iters; ++i) f();
  return (now() - t0) / iters;
}

void bench_gemm(int M, int N, int K, int iters) {
  Rng rng(1);
  std::vector<float> A(std::size_t(M) * K), B(std::size_t(K) * N),
      C(std::size_t(M) * N);
  for (auto& x : A) x = float(rng.uniform(-1, 1));
  for (auto& x : B) x = float(rng.uniform(-1, 1));
  const double flops = 2.0 * M * N * K;

  const double t_ref = time_loop(
      [&] { nn::ref::gemm_nn(M, N, K, A.data(), B.data(), C.data()); }, iters);
  nn::set_threads(1);
  const double t_one = time_loop(
      [&] { nn::gemm_nn(M, N, K, A.data(), B.data(), C.data()); }, iters);
#ifdef _OPENMP
  nn::set_threads(omp_get_num_procs());
#endif
  const double t_omp = time_loop(
      [&] { nn::gemm_nn(M, N, K, A.data(), B.data(), C.data()); }, iters);

  std::printf("gemm %4dx%4dx%4d  ref %7.2f GF/s  tiled(1t) %7.2f GF/s  tiled(%dt) %7.2f GF/s\n",
              M, N, K, flops / t_ref / 1e9, flops / t_one / 1e9,
              nn::max_threads(), flops / t_omp / 1e9);
}

}  // namespace

// Aggregator training step at the default configuration, serial vs OpenMP.
void bench_aggregator(int steps) {
  using namespace rewindrl::reward;
  AggregatorConfig cfg;
  Aggregator<float> model(cfg, 1);
  Rng rng(2);
  std::vector<std::vector<float>> frames, langs, targets;
  std::vector<Aggregator<float>::SeqRef> refs;
  for (int e = 0; e < 256; ++e) {
    const int t = 10 + int(rng.uniform_int(7));
    frames.emplace_back(std::size_t(t) * cfg.d_img);
    for (auto& x : frames.back()) x = float(rng.uniform(-1, 1));
    langs.emplace_back(cfg.d_lang);
    for (auto& x : langs.back()) x = float(rng.uniform(-1, 1));
    targets.emplace_back(t);
    for (auto& x : targets.back()) x = float(rng.uniform(0, 1));
    refs.push_back({frames.back().data(), t, langs.back().data(),
                    targets.back().data()});
  }
  nn::Adam<float> opt(1e-3);
  auto params = model.params();
  auto run_steps = [&] {
    for (int s = 0; s < steps; ++s) {
      model.zero_grad();
      for (std::size_t lo = 0; lo < refs.size(); lo += 128) {
        std::vector<Aggregator<float>::SeqRef> chunk(
            refs.begin() + lo, refs.begin() + std::min(refs.size(), lo + 128));
        model.loss_batch(chunk, true);
      }
      opt.step(params, 1.0 / 256);
    }
  };
  run_steps();  // warmup
  nn::set_threads(1);
  double t0 = now();
  run_steps();
  const double serial = (now() - t0) / steps;
#ifdef _OPENMP
  nn::set_threads(omp_get_num_procs());
#endif
  t0 = now();
  run_steps();
  const double par = (now() - t0) / steps;
  std::printf(
      "aggregator train step (batch 256): serial %.3f s, %d threads %.3f s "
      "(%.2fx)\n",
      serial, nn::max_threads(), par, serial / par);
  rewindrl::reward::profile_report();
}

int main(int argc, char** argv) {
  int iters = 20;
  if (argc > 1) iters = std::stoi(argv[1]);
  bench_gemm(256 * 14, 128, 128, iters);
  bench_gemm(256 * 14, 512, 128, iters);
  bench_gemm(256 * 14, 128, 512, iters);
  bench_gemm(128, 256, 102, iters * 10);
  bench_gemm(64, 256, 256, iters * 10);
  bench_aggregator(std::max(1, iters / 4));
  return 0;
}
