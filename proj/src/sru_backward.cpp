// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sru/gemm.hpp"
#include "sru/sru_grad.hpp"

namespace sru {

namespace {

// Gate derivative from the saved gate value: sigma' = s * (1 - s).
template <typename T>
inline T dgate(T s) {
  return s * (T(1) - s);
}

}  // namespace

template <typename T>
SruGradientsT<T> backward_fused(const SruLayerConfig& cfg,
                                const SruLayerParamsT<T>& params,
                                const SruTapeT<T>& tape,
                                const Tensor<T>& grad_h,
                                const Tensor<T>& grad_c_last) {
  check_forward_shapes(cfg, params, tape.x, tape.c0);
  const int64_t L = tape.x.extent(0), B = tape.x.extent(1);
  const int64_t d = cfg.d_out, d_in = cfg.d_in, N = L * B;
  const int dirs = cfg.dirs(), G = cfg.gate_blocks();
  const int64_t uw = dirs * G * d, hw = dirs * d;
  if (tape.d_out != d || tape.dirs != dirs || tape.gate_blocks != G ||
      tape.u.numel() != N * uw || tape.c.numel() != N * hw) {
    throw ConsistencyError("backward_fused: tape does not match config");
  }
  if (!grad_h.same_shape(tape.h)) {
    throw DimError("backward_fused: grad_h " + grad_h.shape_str() +
                   " must match h " + tape.h.shape_str());
  }
  if (!grad_c_last.same_shape(tape.c0)) {
    throw DimError("backward_fused: grad_c_last " + grad_c_last.shape_str() +
                   " must match c0 " + tape.c0.shape_str());
  }

  const bool state_gates = cfg.use_state_in_gates;
  const bool highway = cfg.use_highway;
  const bool identity_skip = highway && G == 3;
  const T alpha = cfg.use_scaling_correction ? params.alpha : T(1);

  SruGradientsT<T> g;
  g.g_v_f = Tensor<T>({dirs, d});
  g.g_v_r = Tensor<T>({dirs, d});
  g.g_b_f = Tensor<T>({dirs, d});
  g.g_b_r = Tensor<T>({dirs, d});
  g.g_x = Tensor<T>({L, B, d_in});
  g.g_c0 = Tensor<T>({B, dirs * d});

  // dL/dU, same layout as tape.u: per direction blocks dU0, dz_f, dz_r and,
  // when the skip is learned, dL/dskip.
  Tensor<T> gu({L, B, uw});
  // Identity skip goes straight to x; collected per direction first.
  Tensor<T> gxs;
  if (identity_skip) gxs = Tensor<T>({L, B, dirs * d});

  // Pass 1: lane-parallel reverse traversal. Each lane owns disjoint rows of
  // gu/gxs, so any worker count yields identical bits.
  constexpr int64_t kChunk = 64;
  const int64_t nchunk = (d + kChunk - 1) / kChunk;
  for (int dir = 0; dir < dirs; ++dir) {
    const bool rev = dir == 1;
    const T* vf = params.v_f.data() + dir * d;
    const T* vr = params.v_r.data() + dir * d;
    const int64_t ub = dir * G * d;
    const int64_t hb = dir * d;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t ch = 0; ch < nchunk; ++ch) {
        const int64_t j0 = ch * kChunk;
        const int64_t j1 = std::min(d, j0 + kChunk);
        for (int64_t j = j0; j < j1; ++j) {
          T gc = grad_c_last(b, hb + j);
          for (int64_t s = L - 1; s >= 0; --s) {
            const int64_t l = rev ? L - 1 - s : s;
            const int64_t lprev = rev ? l + 1 : l - 1;
            const int64_t row = l * B + b;
            const T* u = tape.u.data() + row * uw + ub;
            T* gur = gu.data() + row * uw + ub;
            const T f = tape.f(l, b, hb + j);
            const T r = tape.r(l, b, hb + j);
            const T c = tape.c(l, b, hb + j);
            const T cprev = (s == 0) ? tape.c0(b, hb + j) : tape.c(lprev, b, hb + j);
            const T gh = grad_h(l, b, hb + j);
            if (highway) {
              const T skip = (G == 4) ? u[3 * d + j] : tape.x(l, b, j);
              const T dzr = gh * (c - alpha * skip) * dgate(r);
              gur[2 * d + j] = dzr;
              const T gskip = gh * (T(1) - r) * alpha;
              if (G == 4) {
                gur[3 * d + j] = gskip;
              } else {
                gxs(l, b, hb + j) = gskip;
              }
              gc += gh * r + (state_gates ? dzr * vr[j] : T(0));
            } else {
              gur[2 * d + j] = T(0);
              gc += gh;
            }
            const T dzf = gc * (cprev - u[j]) * dgate(f);
            gur[d + j] = dzf;
            gur[j] = gc * (T(1) - f);
            gc = gc * f + (state_gates ? dzf * vf[j] : T(0));
          }
          g.g_c0(b, hb + j) = gc;
        }
      }
    }
  }

  // Pass 2: bias and state-weight reductions over (l, b) in fixed order,
  // parallel across hidden indices.
  for (int dir = 0; dir < dirs; ++dir) {
    const bool rev = dir == 1;
    const int64_t ub = dir * G * d;
    const int64_t hb = dir * d;
#pragma omp parallel for schedule(static)
    for (int64_t j = 0; j < d; ++j) {
      T svf = T(0), svr = T(0), sbf = T(0), sbr = T(0);
      for (int64_t l = 0; l < L; ++l) {
        const bool first_step = rev ? (l == L - 1) : (l == 0);
        const int64_t lprev = rev ? l + 1 : l - 1;
        for (int64_t b = 0; b < B; ++b) {
          const int64_t row = l * B + b;
          const T* gur = gu.data() + row * uw + ub;
          const T dzf = gur[d + j];
          const T dzr = gur[2 * d + j];
          const T cprev =
              first_step ? tape.c0(b, hb + j) : tape.c(lprev, b, hb + j);
          svf += dzf * cprev;
          svr += dzr * tape.c(l, b, hb + j);
          sbf += dzf;
          sbr += dzr;
        }
      }
      g.g_v_f(dir, j) = state_gates ? svf : T(0);
      g.g_v_r(dir, j) = state_gates ? svr : T(0);
      g.g_b_f(dir, j) = sbf;
      g.g_b_r(dir, j) = sbr;
    }
  }

  // Parameter and input gradients via the batched products.
  if (!params.factorized()) {
    g.g_w_all = Tensor<T>({dirs * G * d, d_in});
    matmul(Trans::yes, Trans::no, dirs * G * d, d_in, N, gu.data(), uw,
           tape.x.data(), d_in, g.g_w_all.data(), d_in);
    matmul(Trans::no, Trans::no, N, d_in, uw, gu.data(), uw,
           params.w_all.data(), d_in, g.g_x.data(), d_in);
  } else {
    const int64_t dp = params.proj_dim;
    Tensor<T> proj_tmp = tape.proj_tmp;
    if (proj_tmp.empty()) {
      // Tape came from the public fused_recurrence entry; rebuild x*Q^T.
      proj_tmp = Tensor<T>({N, dirs * dp});
      matmul(Trans::no, Trans::yes, N, dirs * dp, d_in, tape.x.data(), d_in,
             params.q.data(), d_in, proj_tmp.data(), dirs * dp);
    }
    g.g_p = Tensor<T>({dirs * 3 * d, dp});
    g.g_q = Tensor<T>({dirs * dp, d_in});
    Tensor<T> gtmp({N, dirs * dp});
    for (int dir = 0; dir < dirs; ++dir) {
      matmul(Trans::yes, Trans::no, 3 * d, dp, N, gu.data() + dir * G * d, uw,
             proj_tmp.data() + dir * dp, dirs * dp, g.g_p.data() + dir * 3 * d * dp,
             dp);
      matmul(Trans::no, Trans::no, N, dp, 3 * d, gu.data() + dir * G * d, uw,
             params.p.data() + dir * 3 * d * dp, dp, gtmp.data() + dir * dp,
             dirs * dp);
      matmul(Trans::yes, Trans::no, dp, d_in, N, gtmp.data() + dir * dp,
             dirs * dp, tape.x.data(), d_in, g.g_q.data() + dir * dp * d_in,
             d_in);
    }
    matmul(Trans::no, Trans::no, N, d_in, dirs * dp, gtmp.data(), dirs * dp,
           params.q.data(), d_in, g.g_x.data(), d_in);
    if (G == 4) {
      g.g_skip_w = Tensor<T>({dirs * d, d_in});
      for (int dir = 0; dir < dirs; ++dir) {
        matmul(Trans::yes, Trans::no, d, d_in, N, gu.data() + dir * G * d + 3 * d,
               uw, tape.x.data(), d_in, g.g_skip_w.data() + dir * d * d_in, d_in);
        matmul(Trans::no, Trans::no, N, d_in, d, gu.data() + dir * G * d + 3 * d,
               uw, params.skip_w.data() + dir * d * d_in, d_in, g.g_x.data(),
               d_in, /*accumulate=*/true);
      }
    }
  }

  if (identity_skip) {
    // d_in == d_out here; fold each direction's skip gradient into g_x.
    T* gx = g.g_x.data();
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < N; ++row) {
      for (int dir = 0; dir < dirs; ++dir) {
        const T* src = gxs.data() + row * hw + dir * d;
        T* dst = gx + row * d_in;
        for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    }
  }

  return g;
}

std::vector<double> fd_gradient_oracle(
    const std::function<double(const std::vector<double>&)>& loss_fn,
    std::vector<double> theta, double eps) {
  if (!(eps > 0.0)) throw ParamError("fd_gradient_oracle: eps must be > 0");
  std::vector<double> grad(theta.size(), 0.0);
  for (size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + eps;
    const double up = loss_fn(theta);
    theta[i] = keep - eps;
    const double down = loss_fn(theta);
    theta[i] = keep;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      std::ostringstream os;
      os << "fd_gradient_oracle: non-finite loss at coordinate " << i;
      throw std::runtime_error(os.str());
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

template SruGradientsT<double> backward_fused<double>(
    const SruLayerConfig&, const SruLayerParamsT<double>&,
    const SruTapeT<double>&, const Tensor<double>&, const Tensor<double>&);
template SruGradientsT<float> backward_fused<float>(
    const SruLayerConfig&, const SruLayerParamsT<float>&,
    const SruTapeT<float>&, const Tensor<float>&, const Tensor<float>&);

}  // namespace sru
