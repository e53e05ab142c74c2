// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include "sru/gemm.hpp"

#include <algorithm>
#include <cstring>

namespace sru {

namespace {

// Block extents: IB rows of C per task, KB-deep reduction panels, JB-wide
// column panels (keeps the streamed B panel inside L2).
constexpr int64_t kIB = 48;
constexpr int64_t kKB = 256;
constexpr int64_t kJB = 96;

// Dot product with eight fixed-lane accumulators. The lane assignment
// depends only on k, never on the worker count, so the reduction order is
// reproducible. Independent lanes let the compiler vectorize without
// -ffast-math.
template <typename T>
inline T dot8(const T* a, const T* b, int64_t k) {
  T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
  int64_t p = 0;
  for (; p + 8 <= k; p += 8) {
    for (int u = 0; u < 8; ++u) acc[u] += a[p + u] * b[p + u];
  }
  for (int u = 0; p < k; ++p, ++u) acc[u] += a[p] * b[p];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

// C = A * B. Saxpy form: rows of B stream through a C row panel; per
// output element the k loop ascends across panels.
template <typename T>
void gemm_nn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
             const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t i0 = 0; i0 < m; i0 += kIB) {
    const int64_t i1 = std::min(m, i0 + kIB);
    for (int64_t j0 = 0; j0 < n; j0 += kJB) {
      const int64_t jb = std::min(n, j0 + kJB) - j0;
      for (int64_t k0 = 0; k0 < k; k0 += kKB) {
        const int64_t k1 = std::min(k, k0 + kKB);
        for (int64_t i = i0; i < i1; ++i) {
          T* crow = c + i * ldc + j0;
          if (!accumulate && k0 == 0) {
            std::memset(crow, 0, sizeof(T) * static_cast<size_t>(jb));
          }
          const T* arow = a + i * lda;
          for (int64_t p = k0; p < k1; ++p) {
            const T av = arow[p];
            const T* brow = b + p * ldb + j0;
            for (int64_t j = 0; j < jb; ++j) crow[j] += av * brow[j];
          }
        }
      }
    }
  }
}

// C = A * B^T. B stored [n x k]; contiguous row-by-row dots.
template <typename T>
void gemm_nt(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
             const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t i0 = 0; i0 < m; i0 += kIB) {
    const int64_t i1 = std::min(m, i0 + kIB);
    for (int64_t j0 = 0; j0 < n; j0 += kJB) {
      const int64_t j1 = std::min(n, j0 + kJB);
      for (int64_t i = i0; i < i1; ++i) {
        const T* arow = a + i * lda;
        T* crow = c + i * ldc;
        for (int64_t j = j0; j < j1; ++j) {
          const T d = dot8(arow, b + j * ldb, k);
          crow[j] = accumulate ? crow[j] + d : d;
        }
      }
    }
  }
}

// C = A^T * B. A stored [k x m]; rows of B accumulate into a resident C
// panel, k ascending.
template <typename T>
void gemm_tn(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
             const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int64_t i0 = 0; i0 < m; i0 += kIB) {
    const int64_t i1 = std::min(m, i0 + kIB);
    for (int64_t j0 = 0; j0 < n; j0 += kJB) {
      const int64_t jb = std::min(n, j0 + kJB) - j0;
      if (!accumulate) {
        for (int64_t i = i0; i < i1; ++i) {
          std::memset(c + i * ldc + j0, 0, sizeof(T) * static_cast<size_t>(jb));
        }
      }
      for (int64_t p = 0; p < k; ++p) {
        const T* brow = b + p * ldb + j0;
        const T* acol = a + p * lda;
        for (int64_t i = i0; i < i1; ++i) {
          const T av = acol[i];
          T* crow = c + i * ldc + j0;
          for (int64_t j = 0; j < jb; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void matmul(Trans ta, Trans tb, int64_t m, int64_t n, int64_t k, const T* a,
            int64_t lda, const T* b, int64_t ldb, T* c, int64_t ldc,
            bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) {
      for (int64_t i = 0; i < m; ++i) std::memset(c + i * ldc, 0, sizeof(T) * static_cast<size_t>(n));
    }
    return;
  }
  if (ta == Trans::no && tb == Trans::no) {
    gemm_nn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  } else if (ta == Trans::no && tb == Trans::yes) {
    gemm_nt(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  } else if (ta == Trans::yes && tb == Trans::no) {
    gemm_tn(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  } else {
    throw ParamError("matmul: transA && transB not supported");
  }
}

template <typename T>
Tensor<T> gemm(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimError("gemm: operands must be rank-2, got " + a.shape_str() +
                   " and " + b.shape_str());
  }
  if (a.extent(1) != b.extent(0)) {
    throw DimError("gemm: inner extents mismatch, " + a.shape_str() + " x " +
                   b.shape_str());
  }
  const int64_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor<T> c({m, n});
  matmul(Trans::no, Trans::no, m, n, k, a.data(), k, b.data(), n, c.data(), n);
  return c;
}

template void matmul<double>(Trans, Trans, int64_t, int64_t, int64_t,
                             const double*, int64_t, const double*, int64_t,
                             double*, int64_t, bool);
template void matmul<float>(Trans, Trans, int64_t, int64_t, int64_t,
                            const float*, int64_t, const float*, int64_t,
                            float*, int64_t, bool);
template Tensor<double> gemm<double>(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> gemm<float>(const Tensor<float>&, const Tensor<float>&);

}  // namespace sru
