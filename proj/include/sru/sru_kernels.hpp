// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Internal kernel entry points, split out so the benchmark harness can time
// the projection and the elementwise recurrence separately.

#pragma once

#include "sru/sru_layer.hpp"

namespace sru::detail {

// U with gate_blocks() blocks per direction (skip block included); one gemm
// for dense parameters, chained Q/P gemms when factorized. proj_tmp_out
// receives x*Q^T for the backward pass (factorized only, may be null).
template <typename T>
Tensor<T> project_inputs(const SruLayerConfig& cfg,
                         const SruLayerParamsT<T>& params, const Tensor<T>& x,
                         Tensor<T>* proj_tmp_out);

// Fused elementwise pass over a prepared tape (x, u, c0 set; c/f/r/h sized).
template <typename T>
void run_recurrence(const SruLayerConfig& cfg, const SruLayerParamsT<T>& params,
                    SruTapeT<T>& tape, Tensor<T>& c_last);

}  // namespace sru::detail
