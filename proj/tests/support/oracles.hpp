#pragma once

// Plain-loop reference implementations used to cross-check the op library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace baomi::oracle {

// a: m x k, b: k x n, row-major
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  return c;
}

// x: cin x len, w: cout x cin x 3, zero padding of one on each side
inline std::vector<double> conv1d(const std::vector<double>& x, const std::vector<double>& w,
                                  const std::vector<double>& bias, std::size_t cin,
                                  std::size_t cout, std::size_t len) {
  std::vector<double> y(cout * len, 0.0);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t t = 0; t < len; ++t) {
      double s = bias[o];
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t j = 0; j < 3; ++j) {
          const long pos = static_cast<long>(t) + static_cast<long>(j) - 1;
          if (pos < 0 || pos >= static_cast<long>(len)) continue;
          s += w[(o * cin + c) * 3 + j] * x[c * len + static_cast<std::size_t>(pos)];
        }
      y[o * len + t] = s;
    }
  return y;
}

inline std::vector<double> maxpool(const std::vector<double>& x, std::size_t rows,
                                   std::size_t len) {
  const std::size_t out = len / 2;
  std::vector<double> y(rows * out);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < out; ++i)
      y[r * out + i] = std::max(x[r * len + 2 * i], x[r * len + 2 * i + 1]);
  return y;
}

// Direct exp / sum without max subtraction; callers keep inputs moderate.
inline std::vector<double> softmax(const std::vector<double>& x, std::size_t rows,
                                   std::size_t n) {
  std::vector<double> y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::exp(x[r * n + j]);
    for (std::size_t j = 0; j < n; ++j) y[r * n + j] = std::exp(x[r * n + j]) / total;
  }
  return y;
}

inline double cross_entropy(const std::vector<double>& logits, const std::vector<std::size_t>& labels,
                            std::size_t classes) {
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) z += std::exp(logits[r * classes + j]);
    total += std::log(z) - logits[r * classes + labels[r]];
  }
  return total / static_cast<double>(labels.size());
}

}  // namespace baomi::oracle
