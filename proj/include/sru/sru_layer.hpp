// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// SRU layer: batched input projection plus a fused elementwise recurrence.
//
// Per lane (one batch sample b, one hidden index j), sequentially over l:
//
//   f = sigmoid(U[l,b,j+d] + v_f[j]*c + b_f[j])
//   c = f*c + (1-f)*U[l,b,j]
//   r = sigmoid(U[l,b,j+2d] + v_r[j]*c + b_r[j])
//   h = r*c + (1-r)*skip[l,b,j]*alpha
//
// where U packs the three (or four, see below) per-gate input projections
// computed as one matrix product over all L*B rows, and skip is x itself
// when d_in == d_out or a learned projection W_h*x otherwise (batched into
// the same product as a fourth block). Lanes are independent, so the
// recurrence parallelizes over the B x d grid with each lane running its
// length-L loop serially.

#pragma once

#include <cstdint>

#include "sru/tensor.hpp"

namespace sru {

struct SruLayerConfig {
  int64_t d_in = 0;
  int64_t d_out = 0;
  bool bidirectional = false;
  double highway_bias = 0.0;  // initial value of every b_r entry
  bool use_state_in_gates = true;      // keep the v (.) c terms in both gates
  bool use_scaling_correction = true;  // alpha = sqrt(1 + 2e^b); off forces 1
  bool use_highway = true;             // off collapses Eq. 4 to h = c
  int64_t projection_dim = 0;          // d' > 0 factorizes (W;W_f;W_r) = P*Q

  int dirs() const { return bidirectional ? 2 : 1; }
  bool needs_skip_proj() const { return use_highway && d_in != d_out; }
  int gate_blocks() const { return needs_skip_proj() ? 4 : 3; }
  void validate() const;
};

// All learnable quantities of one layer. Bidirectional layers hold two
// independent parameter sets; the projection matrices of both directions
// are stacked into single tensors so one gemm covers every block.
template <typename T>
struct SruLayerParamsT {
  int64_t d_in = 0;
  int64_t d_out = 0;
  int dirs = 1;
  int64_t proj_dim = 0;  // 0 = dense stacked matrices
  int gate_blocks = 3;   // 4 when the skip path is a learned projection

  // Dense: [dirs * gate_blocks * d_out, d_in]; per-direction block order
  // W, W_f, W_r (, W_h).
  Tensor<T> w_all;
  // Factorized: (W;W_f;W_r) = P*Q per direction.
  Tensor<T> p;       // [dirs * 3*d_out, d']
  Tensor<T> q;       // [dirs * d', d_in]
  Tensor<T> skip_w;  // factorized + learned skip: [dirs * d_out, d_in]

  Tensor<T> v_f, v_r, b_f, b_r;  // [dirs, d_out]
  T alpha = T(1);

  bool factorized() const { return proj_dim > 0; }

  // Element accessors for the dense blocks (tests and the reference path).
  T& w(int dir, int64_t i, int64_t j) { return blk(dir, 0, i, j); }
  T& w_f(int dir, int64_t i, int64_t j) { return blk(dir, 1, i, j); }
  T& w_r(int dir, int64_t i, int64_t j) { return blk(dir, 2, i, j); }
  T& w_h(int dir, int64_t i, int64_t j) { return blk(dir, 3, i, j); }
  const T& w(int dir, int64_t i, int64_t j) const { return blk(dir, 0, i, j); }
  const T& w_f(int dir, int64_t i, int64_t j) const { return blk(dir, 1, i, j); }
  const T& w_r(int dir, int64_t i, int64_t j) const { return blk(dir, 2, i, j); }
  const T& w_h(int dir, int64_t i, int64_t j) const { return blk(dir, 3, i, j); }

  template <typename U>
  SruLayerParamsT<U> cast() const {
    SruLayerParamsT<U> o;
    o.d_in = d_in;
    o.d_out = d_out;
    o.dirs = dirs;
    o.proj_dim = proj_dim;
    o.gate_blocks = gate_blocks;
    o.w_all = w_all.template cast<U>();
    o.p = p.template cast<U>();
    o.q = q.template cast<U>();
    o.skip_w = skip_w.template cast<U>();
    o.v_f = v_f.template cast<U>();
    o.v_r = v_r.template cast<U>();
    o.b_f = b_f.template cast<U>();
    o.b_r = b_r.template cast<U>();
    o.alpha = static_cast<U>(alpha);
    return o;
  }

 private:
  T& blk(int dir, int block, int64_t i, int64_t j) {
    return w_all((dir * gate_blocks + block) * d_out + i, j);
  }
  const T& blk(int dir, int block, int64_t i, int64_t j) const {
    return w_all((dir * gate_blocks + block) * d_out + i, j);
  }
};

using SruLayerParams = SruLayerParamsT<double>;

// Zero-valued parameter set laid out for cfg (alpha = 1).
template <typename T>
SruLayerParamsT<T> make_params(const SruLayerConfig& cfg);

// Saved activations required by the backward pass.
template <typename T>
struct SruTapeT {
  Tensor<T> x;         // [L, B, d_in]
  Tensor<T> u;         // [L, B, dirs * gate_blocks * d_out]
  Tensor<T> proj_tmp;  // factorized only: [L*B, dirs * d']
  Tensor<T> c;         // [L, B, dirs * d_out]
  Tensor<T> f;         // [L, B, dirs * d_out]
  Tensor<T> r;         // [L, B, dirs * d_out]
  Tensor<T> c0;        // [B, dirs * d_out]
  Tensor<T> h;         // [L, B, dirs * d_out] (= c when highway disabled)
  int64_t d_out = 0;
  int dirs = 1;
  int gate_blocks = 3;

  int64_t steps() const { return x.extent(0); }
  int64_t batch() const { return x.extent(1); }
  // False if any recorded value (inputs included) is non-finite.
  bool all_finite() const;
};

using SruTape = SruTapeT<double>;

template <typename T>
struct SruForwardResultT {
  Tensor<T> c_last;  // [B, dirs * d_out]
  SruTapeT<T> tape;  // tape.h is the layer output
};

using SruForwardResult = SruForwardResultT<double>;

// The three gate projections for all time steps as one product:
// U[l,b,0:d] = W x, U[l,b,d:2d] = W_f x, U[l,b,2d:3d] = W_r x, with both
// directions batched when bidirectional ([L,B,dirs*3*d_out]). The
// factorized path chains Q then P without materializing the stack.
template <typename T>
Tensor<T> compute_U(const SruLayerConfig& cfg, const SruLayerParamsT<T>& params,
                    const Tensor<T>& x);

// Runs the fused elementwise recurrence on a precomputed U (3-block form).
template <typename T>
SruTapeT<T> fused_recurrence(const SruLayerConfig& cfg,
                             const SruLayerParamsT<T>& params,
                             const Tensor<T>& u3, const Tensor<T>& x,
                             const Tensor<T>& c0);

// Projection + fused recurrence. Bidirectional input projections are issued
// as a single gemm; the reverse direction consumes x in reversed time order;
// h concatenates [forward; backward] on the feature axis and c_last the
// final state of each direction.
template <typename T>
SruForwardResultT<T> forward_layer(const SruLayerConfig& cfg,
                                   const SruLayerParamsT<T>& params,
                                   const Tensor<T>& x, const Tensor<T>& c0);

// Direct per-step transcription of the layer equations: one time step and
// one vector op at a time, no batching, no fusion. Correctness oracle for
// the fused path and the serial baseline in benchmarks.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> naive_reference_forward(
    const SruLayerConfig& cfg, const SruLayerParamsT<T>& params,
    const Tensor<T>& x, const Tensor<T>& c0);

// Shape checks shared by the forward paths (throws DimError).
template <typename T>
void check_forward_shapes(const SruLayerConfig& cfg,
                          const SruLayerParamsT<T>& params, const Tensor<T>& x,
                          const Tensor<T>& c0);

}  // namespace sru
