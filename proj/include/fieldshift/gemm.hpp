#pragma once

#include <vector>

#include "fieldshift/threads.hpp"

namespace fieldshift {

/// C(m,n) += A(m,k) * B(k,n), all row-major. Parallelised over rows of C;
/// every output element accumulates in a fixed k order, so results are
/// bit-identical for any thread count.
template <typename T>
void gemm_add(const T* a, const T* b, T* c, int m, int k, int n) {
  parallel_for(m, [=](long i0, long i1) {
    for (long i = i0; i < i1; ++i) {
      T* crow = c + i * n;
      const T* arow = a + i * k;
      for (int kk = 0; kk < k; ++kk) {
        const T av = arow[kk];
        if (av == T(0)) continue;
        const T* brow = b + static_cast<size_t>(kk) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

/// Row-major transpose copy: a(rows, cols) -> (cols, rows).
template <typename T>
std::vector<T> transposed(const T* a, int rows, int cols) {
  std::vector<T> out(static_cast<size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      out[static_cast<size_t>(j) * rows + i] = a[static_cast<size_t>(i) * cols + j];
  return out;
}

}  // namespace fieldshift
