#pragma once

#include <cstddef>

namespace nspeech {

// C[M,N] += A[M,K] * B[K,N]. ikj ordering keeps the inner loop contiguous in
// B and C, which the compiler vectorizes.
inline void gemm_acc(size_t M, size_t K, size_t N, const double* A, const double* B, double* C) {
  for (size_t i = 0; i < M; ++i) {
    const double* a = A + i * K;
    double* c = C + i * N;
    for (size_t k = 0; k < K; ++k) {
      const double av = a[k];
      const double* b = B + k * N;
      for (size_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[M,N] += A^T[M,K] * B[K,N] with A stored as [K,M].
inline void gemm_at_b_acc(size_t M, size_t K, size_t N, const double* A, const double* B, double* C) {
  for (size_t k = 0; k < K; ++k) {
    const double* a = A + k * M;
    const double* b = B + k * N;
    for (size_t i = 0; i < M; ++i) {
      const double av = a[i];
      double* c = C + i * N;
      for (size_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

}  // namespace nspeech
