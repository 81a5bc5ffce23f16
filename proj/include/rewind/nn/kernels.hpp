#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rewindrl::nn {

// Dense kernels used by the aggregator and the RL networks. Parallelism is
// always over independent output elements with serial inner reductions, so
// results are bit-identical for any thread count, including one. The naive
// serial forms live in rewindrl::nn::ref and back the kernel tests and the
// benchmark tool.

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace detail {

// One row-block of C = A * B. Full 32-column tiles run with constant loop
// bounds; the column remainder uses runtime bounds. Accumulation over k is
// ascending on every path, matching the serial reference bit for bit.
template <class T, bool ACC, int IT>
inline void gemm_nn_rows(int i0, int ilim, int N, int K, const T* A, const T* B,
                         T* C) {
  constexpr int JT = 32;
  const int Nf = N - N % JT;
  for (int j0 = 0; j0 < Nf; j0 += JT) {
    T acc[IT][JT] = {};
    for (int k = 0; k < K; ++k) {
      const T* b = B + std::size_t(k) * N + j0;
      for (int ii = 0; ii < ilim; ++ii) {
        const T ak = A[std::size_t(i0 + ii) * K + k];
#pragma omp simd
        for (int jj = 0; jj < JT; ++jj) acc[ii][jj] += ak * b[jj];
      }
    }
    for (int ii = 0; ii < ilim; ++ii) {
      T* c = C + std::size_t(i0 + ii) * N + j0;
      for (int jj = 0; jj < JT; ++jj)
        c[jj] = ACC ? c[jj] + acc[ii][jj] : acc[ii][jj];
    }
  }
  if (Nf < N) {
    const int jlim = N - Nf;
    T acc[IT][JT] = {};
    for (int k = 0; k < K; ++k) {
      const T* b = B + std::size_t(k) * N + Nf;
      for (int ii = 0; ii < ilim; ++ii) {
        const T ak = A[std::size_t(i0 + ii) * K + k];
        for (int jj = 0; jj < jlim; ++jj) acc[ii][jj] += ak * b[jj];
      }
    }
    for (int ii = 0; ii < ilim; ++ii) {
      T* c = C + std::size_t(i0 + ii) * N + Nf;
      for (int jj = 0; jj < jlim; ++jj)
        c[jj] = ACC ? c[jj] + acc[ii][jj] : acc[ii][jj];
    }
  }
}

template <class T, bool ACC>
void gemm_nn_impl(int M, int N, int K, const T* A, const T* B, T* C) {
  constexpr int IT = 8;
#pragma omp parallel for schedule(static)
  for (int i0 = 0; i0 < M; i0 += IT) {
    const int ilim = std::min(IT, M - i0);
    if (ilim == IT)
      gemm_nn_rows<T, ACC, IT>(i0, IT, N, K, A, B, C);
    else
      gemm_nn_rows<T, ACC, IT>(i0, ilim, N, K, A, B, C);
  }
}

template <class T, bool ACC, int IT>
inline void gemm_tn_rows(int i0, int ilim, int J, int M, int I, const T* A,
                         const T* B, T* C) {
  constexpr int JT = 16;
  const int Jf = J - J % JT;
  for (int j0 = 0; j0 < Jf; j0 += JT) {
    T acc[IT][JT] = {};
    if (ilim == IT) {
      for (int m = 0; m < M; ++m) {
        const T* b = B + std::size_t(m) * J + j0;
        const T* a = A + std::size_t(m) * I + i0;
        for (int ii = 0; ii < IT; ++ii) {
          const T am = a[ii];
#pragma omp simd
          for (int jj = 0; jj < JT; ++jj) acc[ii][jj] += am * b[jj];
        }
      }
    } else {
      for (int m = 0; m < M; ++m) {
        const T* b = B + std::size_t(m) * J + j0;
        const T* a = A + std::size_t(m) * I + i0;
        for (int ii = 0; ii < ilim; ++ii) {
          const T am = a[ii];
#pragma omp simd
          for (int jj = 0; jj < JT; ++jj) acc[ii][jj] += am * b[jj];
        }
      }
    }
    for (int ii = 0; ii < ilim; ++ii) {
      T* c = C + std::size_t(i0 + ii) * J + j0;
      for (int jj = 0; jj < JT; ++jj)
        c[jj] = ACC ? c[jj] + acc[ii][jj] : acc[ii][jj];
    }
  }
  if (Jf < J) {
    const int jlim = J - Jf;
    T acc[IT][JT] = {};
    for (int m = 0; m < M; ++m) {
      const T* b = B + std::size_t(m) * J + Jf;
      const T* a = A + std::size_t(m) * I + i0;
      for (int ii = 0; ii < ilim; ++ii) {
        const T am = a[ii];
        for (int jj = 0; jj < jlim; ++jj) acc[ii][jj] += am * b[jj];
      }
    }
    for (int ii = 0; ii < ilim; ++ii) {
      T* c = C + std::size_t(i0 + ii) * J + Jf;
      for (int jj = 0; jj < jlim; ++jj)
        c[jj] = ACC ? c[jj] + acc[ii][jj] : acc[ii][jj];
    }
  }
}

template <class T, bool ACC>
void gemm_tn_impl(int I, int J, int M, const T* A, const T* B, T* C) {
  constexpr int IT = 16;
#pragma omp parallel for schedule(static)
  for (int i0 = 0; i0 < I; i0 += IT) {
    const int ilim = std::min(IT, I - i0);
    gemm_tn_rows<T, ACC, IT>(i0, ilim, J, M, I, A, B, C);
  }
}

}  // namespace detail

// C[M x N] = A[M x K] * B[K x N], row-major. accumulate=true adds into C.
template <class T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C,
             bool accumulate = false) {
  if (accumulate)
    detail::gemm_nn_impl<T, true>(M, N, K, A, B, C);
  else
    detail::gemm_nn_impl<T, false>(M, N, K, A, B, C);
}

// C[I x J] (+)= A[M x I]^T * B[M x J]; used for weight gradients.
template <class T>
void gemm_tn(int I, int J, int M, const T* A, const T* B, T* C,
             bool accumulate = true) {
  if (accumulate)
    detail::gemm_tn_impl<T, true>(I, J, M, A, B, C);
  else
    detail::gemm_tn_impl<T, false>(I, J, M, A, B, C);
}

template <class T>
void transpose(int M, int N, const T* A, T* AT) {
#pragma omp parallel for schedule(static)
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < M; ++i) AT[std::size_t(j) * M + i] = A[std::size_t(i) * N + j];
}

// db[j] (+)= sum_m dY[m][j]. Rows are scanned in row-major order within a
// fixed number of row blocks; block partials reduce in ascending order, so
// the result is independent of the thread count.
template <class T>
void bias_grad(int M, int N, const T* dY, T* db) {
  constexpr int kBlocks = 16;
  const int rows_per = (M + kBlocks - 1) / kBlocks;
  std::vector<T> partials(std::size_t(kBlocks) * N, T(0));
#pragma omp parallel for schedule(static)
  for (int b = 0; b < kBlocks; ++b) {
    T* p = partials.data() + std::size_t(b) * N;
    const int lo = b * rows_per, hi = std::min(M, lo + rows_per);
    for (int m = lo; m < hi; ++m) {
      const T* row = dY + std::size_t(m) * N;
#pragma omp simd
      for (int j = 0; j < N; ++j) p[j] += row[j];
    }
  }
  for (int b = 0; b < kBlocks; ++b) {
    const T* p = partials.data() + std::size_t(b) * N;
    for (int j = 0; j < N; ++j) db[j] += p[j];
  }
}

template <class T>
void add_row_bias(int M, int N, const T* b, T* Y) {
#pragma omp parallel for schedule(static)
  for (int m = 0; m < M; ++m) {
    T* y = Y + std::size_t(m) * N;
#pragma omp simd
    for (int j = 0; j < N; ++j) y[j] += b[j];
  }
}

namespace ref {

// Naive serial references. Same accumulation order as the tiled kernels
// (inner reduction in ascending index), so outputs match bit for bit.
template <class T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C,
             bool accumulate = false) {
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) {
      T s = 0;
      for (int k = 0; k < K; ++k)
        s += A[std::size_t(i) * K + k] * B[std::size_t(k) * N + j];
      if (accumulate)
        C[std::size_t(i) * N + j] += s;
      else
        C[std::size_t(i) * N + j] = s;
    }
}

template <class T>
void gemm_tn(int I, int J, int M, const T* A, const T* B, T* C,
             bool accumulate = true) {
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j) {
      T s = 0;
      for (int m = 0; m < M; ++m)
        s += A[std::size_t(m) * I + i] * B[std::size_t(m) * J + j];
      if (accumulate)
        C[std::size_t(i) * J + j] += s;
      else
        C[std::size_t(i) * J + j] = s;
    }
}

}  // namespace ref

}  // namespace rewindrl::nn
