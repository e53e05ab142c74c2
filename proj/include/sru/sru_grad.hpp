// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Reverse-mode gradients for the SRU layer. The elementwise backward walks
// each lane in reverse step order carrying one running dL/dc scalar (the
// mirror of the forward's running c), including the v_f (.) c_{t-1} and
// v_r (.) c_t gate dependencies and the alpha-scaled skip. The dU
// accumulation then folds into one gemm per parameter block.

#pragma once

#include <functional>
#include <vector>

#include "sru/sru_layer.hpp"

namespace sru {

template <typename T>
struct SruGradientsT {
  Tensor<T> g_w_all;   // mirrors SruLayerParamsT::w_all
  Tensor<T> g_p, g_q;  // factorized path
  Tensor<T> g_skip_w;
  Tensor<T> g_v_f, g_v_r, g_b_f, g_b_r;  // [dirs, d_out]
  Tensor<T> g_x;                         // [L, B, d_in]
  Tensor<T> g_c0;                        // [B, dirs * d_out]
};

using SruGradients = SruGradientsT<double>;

// Gradients of sum(grad_h (.) h) + sum(grad_c_last (.) c_L) with respect to
// every parameter, the inputs x, and c0. tape must come from a forward pass
// with identical cfg/params.
template <typename T>
SruGradientsT<T> backward_fused(const SruLayerConfig& cfg,
                                const SruLayerParamsT<T>& params,
                                const SruTapeT<T>& tape,
                                const Tensor<T>& grad_h,
                                const Tensor<T>& grad_c_last);

// Central differences (loss(theta+eps*e_i) - loss(theta-eps*e_i)) / (2 eps)
// per coordinate. Certification oracle; lives here so the gradcheck command
// and the tests share one implementation.
std::vector<double> fd_gradient_oracle(
    const std::function<double(const std::vector<double>&)>& loss_fn,
    std::vector<double> theta, double eps);

}  // namespace sru
