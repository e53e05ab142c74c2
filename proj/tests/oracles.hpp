// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Test-only oracles, kept independent of the implementation paths they
// certify.

#pragma once

#include <cmath>
#include <vector>

#include "sru/lstm.hpp"
#include "sru/tensor.hpp"

namespace sru::testing {

// Plain O(mkn) triple loop, strictly ascending k.
inline Tensor<double> naive_gemm(const Tensor<double>& a, const Tensor<double>& b) {
  const int64_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor<double> c({m, n});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (int64_t p = 0; p < k; ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  }
  return c;
}

// Scalar transcription of the 4-gate LSTM equations, one value at a time.
inline std::pair<Tensor<double>, Tensor<double>> scalar_lstm(
    const LstmParams& p, const Tensor<double>& x, const Tensor<double>& h0,
    const Tensor<double>& c0) {
  const int64_t L = x.extent(0), B = x.extent(1), di = p.d_in, d = p.d;
  Tensor<double> h({L, B, d}), c({L, B, d});
  const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int64_t b = 0; b < B; ++b) {
    std::vector<double> hv(static_cast<size_t>(d)), cv(static_cast<size_t>(d));
    for (int64_t j = 0; j < d; ++j) {
      hv[static_cast<size_t>(j)] = h0(b, j);
      cv[static_cast<size_t>(j)] = c0(b, j);
    }
    for (int64_t l = 0; l < L; ++l) {
      std::vector<double> z(static_cast<size_t>(4 * d));
      for (int64_t g = 0; g < 4 * d; ++g) {
        double s = p.b(g);
        for (int64_t kk = 0; kk < di; ++kk) s += p.w_x(g, kk) * x(l, b, kk);
        for (int64_t kk = 0; kk < d; ++kk) s += p.w_h(g, kk) * hv[static_cast<size_t>(kk)];
        z[static_cast<size_t>(g)] = s;
      }
      for (int64_t j = 0; j < d; ++j) {
        const double gi = sig(z[static_cast<size_t>(j)]);
        const double gf = sig(z[static_cast<size_t>(d + j)]);
        const double gg = std::tanh(z[static_cast<size_t>(2 * d + j)]);
        const double go = sig(z[static_cast<size_t>(3 * d + j)]);
        cv[static_cast<size_t>(j)] = gf * cv[static_cast<size_t>(j)] + gi * gg;
        hv[static_cast<size_t>(j)] = go * std::tanh(cv[static_cast<size_t>(j)]);
        c(l, b, j) = cv[static_cast<size_t>(j)];
        h(l, b, j) = hv[static_cast<size_t>(j)];
      }
    }
  }
  return {std::move(h), std::move(c)};
}

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline double max_abs(const Tensor<double>& a) {
  double m = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i]));
  return m;
}

// |a - b|_inf <= tol * max(1, |b|_inf)
inline bool close_rel(const Tensor<double>& a, const Tensor<double>& b, double tol) {
  return max_abs_diff(a, b) <= tol * std::max(1.0, max_abs(b));
}

}  // namespace sru::testing
