// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Serial reference implementation of the layer: one time step and one
// vector op at a time, no batching across time, no fusion. Kept as the
// correctness oracle for the fused path and as the baseline the benchmark
// compares against.

#include <vector>

#include "sru/sru_layer.hpp"

namespace sru {

template <typename T>
std::pair<Tensor<T>, Tensor<T>> naive_reference_forward(
    const SruLayerConfig& cfg, const SruLayerParamsT<T>& params,
    const Tensor<T>& x, const Tensor<T>& c0) {
  check_forward_shapes(cfg, params, x, c0);
  const int64_t L = x.extent(0), B = x.extent(1);
  const int64_t d = cfg.d_out, d_in = cfg.d_in;
  const int dirs = cfg.dirs(), G = cfg.gate_blocks();
  const bool state_gates = cfg.use_state_in_gates;
  const bool highway = cfg.use_highway;
  const T alpha = cfg.use_scaling_correction ? params.alpha : T(1);

  Tensor<T> h({L, B, dirs * d});
  Tensor<T> c_last({B, dirs * d});

  // Factorized parameters: materialize P*Q with plain loops so this path
  // stays independent of the chained-gemm route.
  std::vector<T> stacked;
  if (params.factorized()) {
    const int64_t dp = params.proj_dim;
    stacked.assign(static_cast<size_t>(dirs * 3 * d * d_in), T(0));
    for (int dir = 0; dir < dirs; ++dir) {
      for (int64_t i = 0; i < 3 * d; ++i) {
        for (int64_t j = 0; j < d_in; ++j) {
          T s = T(0);
          for (int64_t k = 0; k < dp; ++k) {
            s += params.p(dir * 3 * d + i, k) * params.q(dir * dp + k, j);
          }
          stacked[static_cast<size_t>((dir * 3 * d + i) * d_in + j)] = s;
        }
      }
    }
  }
  const auto stacked_at = [&](int dir, int64_t i, int64_t j) -> T {
    if (params.factorized()) {
      return stacked[static_cast<size_t>((dir * 3 * d + i) * d_in + j)];
    }
    return params.w_all(dir * G * d + i, j);
  };
  const auto skip_row_at = [&](int dir, int64_t i, int64_t j) -> T {
    if (params.factorized()) return params.skip_w(dir * d + i, j);
    return params.w_all((dir * G + 3) * d + i, j);
  };

  std::vector<T> cvec(static_cast<size_t>(d));
  std::vector<T> u0(static_cast<size_t>(d)), u1(static_cast<size_t>(d)),
      u2(static_cast<size_t>(d)), sk(static_cast<size_t>(d));
  for (int dir = 0; dir < dirs; ++dir) {
    const bool rev = dir == 1;
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t j = 0; j < d; ++j) cvec[static_cast<size_t>(j)] = c0(b, dir * d + j);
      for (int64_t s = 0; s < L; ++s) {
        const int64_t l = rev ? L - 1 - s : s;
        // W x_t, W_f x_t, W_r x_t (and W_h x_t when the skip is learned).
        for (int64_t j = 0; j < d; ++j) {
          T a0 = T(0), a1 = T(0), a2 = T(0);
          for (int64_t k = 0; k < d_in; ++k) {
            const T xv = x(l, b, k);
            a0 += stacked_at(dir, j, k) * xv;
            a1 += stacked_at(dir, d + j, k) * xv;
            a2 += stacked_at(dir, 2 * d + j, k) * xv;
          }
          u0[static_cast<size_t>(j)] = a0;
          u1[static_cast<size_t>(j)] = a1;
          u2[static_cast<size_t>(j)] = a2;
        }
        if (highway) {
          for (int64_t j = 0; j < d; ++j) {
            if (G == 4) {
              T a = T(0);
              for (int64_t k = 0; k < d_in; ++k) a += skip_row_at(dir, j, k) * x(l, b, k);
              sk[static_cast<size_t>(j)] = a;
            } else {
              sk[static_cast<size_t>(j)] = x(l, b, j);
            }
          }
        }
        for (int64_t j = 0; j < d; ++j) {
          T c = cvec[static_cast<size_t>(j)];
          const T f = stable_sigmoid(
              u1[static_cast<size_t>(j)] +
              (state_gates ? params.v_f(dir, j) * c : T(0)) + params.b_f(dir, j));
          c = f * c + (T(1) - f) * u0[static_cast<size_t>(j)];
          const T r = stable_sigmoid(
              u2[static_cast<size_t>(j)] +
              (state_gates ? params.v_r(dir, j) * c : T(0)) + params.b_r(dir, j));
          h(l, b, dir * d + j) =
              highway ? r * c + (T(1) - r) * sk[static_cast<size_t>(j)] * alpha : c;
          cvec[static_cast<size_t>(j)] = c;
        }
      }
      for (int64_t j = 0; j < d; ++j) c_last(b, dir * d + j) = cvec[static_cast<size_t>(j)];
    }
  }
  return {std::move(h), std::move(c_last)};
}

template std::pair<Tensor<double>, Tensor<double>> naive_reference_forward<double>(
    const SruLayerConfig&, const SruLayerParamsT<double>&, const Tensor<double>&,
    const Tensor<double>&);
template std::pair<Tensor<float>, Tensor<float>> naive_reference_forward<float>(
    const SruLayerConfig&, const SruLayerParamsT<float>&, const Tensor<float>&,
    const Tensor<float>&);

}  // namespace sru
