#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace arr::detail {

// C[m x n] (+)= A[m x k] B[k x n], all row-major. Every output element is an
// fma chain over k in increasing order starting from zero, independent of m
// and of the row's position in the block, so a row's result never depends on
// which other rows are in the product.
template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  constexpr std::size_t RT = 4;
  constexpr std::size_t JT = 32;
  T acc[RT][JT];
  for (std::size_t j0 = 0; j0 < n; j0 += JT) {
    const std::size_t jn = std::min(JT, n - j0);
    std::size_t i = 0;
    for (; i + RT <= m; i += RT) {
      for (std::size_t r = 0; r < RT; ++r)
        for (std::size_t jj = 0; jj < JT; ++jj) acc[r][jj] = T{0};
      if (jn == JT) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          const T* brow = b + kk * n + j0;
          for (std::size_t r = 0; r < RT; ++r) {
            const T av = a[(i + r) * k + kk];
            for (std::size_t jj = 0; jj < JT; ++jj) acc[r][jj] = std::fma(av, brow[jj], acc[r][jj]);
          }
        }
      } else {
        for (std::size_t kk = 0; kk < k; ++kk) {
          const T* brow = b + kk * n + j0;
          for (std::size_t r = 0; r < RT; ++r) {
            const T av = a[(i + r) * k + kk];
            for (std::size_t jj = 0; jj < jn; ++jj) acc[r][jj] = std::fma(av, brow[jj], acc[r][jj]);
          }
        }
      }
      for (std::size_t r = 0; r < RT; ++r) {
        T* crow = c + (i + r) * n + j0;
        if (accumulate) {
          for (std::size_t jj = 0; jj < jn; ++jj) crow[jj] += acc[r][jj];
        } else {
          for (std::size_t jj = 0; jj < jn; ++jj) crow[jj] = acc[r][jj];
        }
      }
    }
    for (; i < m; ++i) {
      for (std::size_t jj = 0; jj < JT; ++jj) acc[0][jj] = T{0};
      for (std::size_t kk = 0; kk < k; ++kk) {
        const T* brow = b + kk * n + j0;
        const T av = a[i * k + kk];
        for (std::size_t jj = 0; jj < jn; ++jj) acc[0][jj] = std::fma(av, brow[jj], acc[0][jj]);
      }
      T* crow = c + i * n + j0;
      if (accumulate) {
        for (std::size_t jj = 0; jj < jn; ++jj) crow[jj] += acc[0][jj];
      } else {
        for (std::size_t jj = 0; jj < jn; ++jj) crow[jj] = acc[0][jj];
      }
    }
  }
}

template <class T>
std::vector<T> transpose(const T* a, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = a[r * cols + c];
  return out;
}

}  // namespace arr::detail
