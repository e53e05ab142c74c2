// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Reference 4-gate LSTM used for timing and quality baselines. The input
// projections of all steps are batched into one gemm like the SRU path, but
// every step still multiplies the previous hidden state by the recurrent
// matrix, so the per-step cost is O(B d^2) and steps cannot overlap:
//
//   z = Wx x_t + Wh h_{t-1} + b          -- blocks [i, f, g, o]
//   i, f, o = sigmoid(z_i, z_f, z_o); g = tanh(z_g)
//   c_t = f (.) c_{t-1} + i (.) g
//   h_t = o (.) tanh(c_t)

#pragma once

#include "sru/rng.hpp"
#include "sru/tensor.hpp"

namespace sru {

template <typename T>
struct LstmParamsT {
  int64_t d_in = 0;
  int64_t d = 0;
  Tensor<T> w_x;  // [4d, d_in], gate block order i, f, g, o
  Tensor<T> w_h;  // [4d, d]
  Tensor<T> b;    // [4d]

  template <typename U>
  LstmParamsT<U> cast() const {
    LstmParamsT<U> o;
    o.d_in = d_in;
    o.d = d;
    o.w_x = w_x.template cast<U>();
    o.w_h = w_h.template cast<U>();
    o.b = b.template cast<U>();
    return o;
  }
};

using LstmParams = LstmParamsT<double>;

template <typename T>
struct LstmTapeT {
  Tensor<T> x;       // [L, B, d_in]
  Tensor<T> gates;   // [L, B, 4d], post-activation i, f, g, o
  Tensor<T> c;       // [L, B, d]
  Tensor<T> h;       // [L, B, d]
  Tensor<T> h_prev;  // [L, B, d]: h0 then h_0..h_{L-2}
  Tensor<T> c0;      // [B, d]
};

using LstmTape = LstmTapeT<double>;

template <typename T>
struct LstmGradientsT {
  Tensor<T> g_w_x, g_w_h, g_b;
  Tensor<T> g_x;         // [L, B, d_in]
  Tensor<T> g_h0, g_c0;  // [B, d]
};

using LstmGradients = LstmGradientsT<double>;

LstmParams make_lstm_params(int64_t d_in, int64_t d);

// Uniform [-sqrt(3/fan_in), sqrt(3/fan_in)] weights, zero biases.
LstmParams init_lstm_layer(int64_t d_in, int64_t d, const SeededRng& rng);

// Returns the tape; tape.h is the output sequence and (tape.h, tape.c) rows
// at the last step are the carried state.
template <typename T>
LstmTapeT<T> lstm_forward(const LstmParamsT<T>& params, const Tensor<T>& x,
                          const Tensor<T>& h0, const Tensor<T>& c0);

template <typename T>
LstmGradientsT<T> lstm_backward(const LstmParamsT<T>& params,
                                const LstmTapeT<T>& tape,
                                const Tensor<T>& grad_h,
                                const Tensor<T>& grad_h_last,
                                const Tensor<T>& grad_c_last);

// 4 (d*d_in + d*d + d) learnable scalars.
int64_t lstm_layer_param_count(int64_t d_in, int64_t d);

}  // namespace sru
