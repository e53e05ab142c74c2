// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Cache-blocked matrix multiply with a fixed summation order: every output
// element is reduced over k in one thread, in the same order, for any
// worker count. That keeps reruns bit-stable, which the test suite relies
// on everywhere.

#pragma once

#include <cstdint>

#include "sru/tensor.hpp"

namespace sru {

enum class Trans { no, yes };

// C[m x n] = op(A) * op(B) (+= when accumulate). Row-major with explicit
// leading dimensions; op(A) is A [m x k] or, when transposed, A stored
// [k x m]. The (yes, yes) combination is not used anywhere and not
// implemented.
template <typename T>
void matmul(Trans ta, Trans tb, int64_t m, int64_t n, int64_t k,
            const T* a, int64_t lda, const T* b, int64_t ldb, T* c,
            int64_t ldc, bool accumulate = false);

// Plain product of two rank-2 tensors; shape-checked.
template <typename T>
Tensor<T> gemm(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace sru
