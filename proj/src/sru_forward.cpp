// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include "sru/gemm.hpp"
#include "sru/sru_kernels.hpp"
#include "sru/sru_layer.hpp"

namespace sru {

void SruLayerConfig::validate() const {
  if (d_in < 1 || d_out < 1) {
    throw ParamError("SruLayerConfig: d_in and d_out must be >= 1");
  }
  if (projection_dim < 0) {
    throw ParamError("SruLayerConfig: projection_dim must be >= 0");
  }
  if (projection_dim > 0 && projection_dim >= std::min(d_in, 3 * d_out)) {
    throw ParamError("SruLayerConfig: projection_dim must be < min(d_in, 3*d_out)");
  }
}

template <typename T>
SruLayerParamsT<T> make_params(const SruLayerConfig& cfg) {
  cfg.validate();
  SruLayerParamsT<T> p;
  p.d_in = cfg.d_in;
  p.d_out = cfg.d_out;
  p.dirs = cfg.dirs();
  p.proj_dim = cfg.projection_dim;
  p.gate_blocks = cfg.gate_blocks();
  const int64_t d = cfg.d_out;
  if (p.proj_dim == 0) {
    p.w_all = Tensor<T>({p.dirs * p.gate_blocks * d, cfg.d_in});
  } else {
    p.p = Tensor<T>({p.dirs * 3 * d, p.proj_dim});
    p.q = Tensor<T>({p.dirs * p.proj_dim, cfg.d_in});
    if (p.gate_blocks == 4) {
      p.skip_w = Tensor<T>({p.dirs * d, cfg.d_in});
    }
  }
  p.v_f = Tensor<T>({p.dirs, d});
  p.v_r = Tensor<T>({p.dirs, d});
  p.b_f = Tensor<T>({p.dirs, d});
  p.b_r = Tensor<T>({p.dirs, d});
  return p;
}

template <typename T>
void check_forward_shapes(const SruLayerConfig& cfg,
                          const SruLayerParamsT<T>& params, const Tensor<T>& x,
                          const Tensor<T>& c0) {
  cfg.validate();
  if (params.d_in != cfg.d_in || params.d_out != cfg.d_out ||
      params.dirs != cfg.dirs() || params.proj_dim != cfg.projection_dim ||
      params.gate_blocks != cfg.gate_blocks()) {
    throw ConsistencyError("SRU params were built for a different config");
  }
  if (x.rank() != 3) {
    throw DimError("SRU input must be rank-3 (L,B,d_in), got " + x.shape_str());
  }
  if (x.extent(0) < 1 || x.extent(1) < 1) {
    throw DimError("SRU input needs L >= 1 and B >= 1, got " + x.shape_str());
  }
  if (x.extent(2) != cfg.d_in) {
    throw DimError("SRU input feature extent " + x.shape_str() +
                   " does not match d_in=" + std::to_string(cfg.d_in));
  }
  if (c0.rank() != 2 || c0.extent(0) != x.extent(1) ||
      c0.extent(1) != cfg.dirs() * cfg.d_out) {
    throw DimError("SRU c0 must be (B, dirs*d_out), got " + c0.shape_str());
  }
}

namespace detail {

// All per-gate projections over all L*B rows. Dense parameters need exactly
// one gemm (both directions and the skip block included); the factorized
// path chains Q then P, plus a dense skip-block product when present.
template <typename T>
Tensor<T> project_inputs(const SruLayerConfig& cfg,
                         const SruLayerParamsT<T>& params, const Tensor<T>& x,
                         Tensor<T>* proj_tmp_out) {
  const int64_t L = x.extent(0), B = x.extent(1), d_in = x.extent(2);
  const int64_t N = L * B, d = cfg.d_out;
  const int dirs = cfg.dirs(), G = cfg.gate_blocks();
  const int64_t uw = dirs * G * d;
  Tensor<T> u({L, B, uw});
  if (!params.factorized()) {
    matmul(Trans::no, Trans::yes, N, uw, d_in, x.data(), d_in,
           params.w_all.data(), d_in, u.data(), uw);
    return u;
  }
  const int64_t dp = params.proj_dim;
  Tensor<T> tmp({N, dirs * dp});
  matmul(Trans::no, Trans::yes, N, dirs * dp, d_in, x.data(), d_in,
         params.q.data(), d_in, tmp.data(), dirs * dp);
  for (int dir = 0; dir < dirs; ++dir) {
    matmul(Trans::no, Trans::yes, N, 3 * d, dp, tmp.data() + dir * dp,
           dirs * dp, params.p.data() + dir * 3 * d * dp, dp,
           u.data() + dir * G * d, uw);
    if (G == 4) {
      matmul(Trans::no, Trans::yes, N, d, d_in, x.data(), d_in,
             params.skip_w.data() + dir * d * d_in, d_in,
             u.data() + dir * G * d + 3 * d, uw);
    }
  }
  if (proj_tmp_out != nullptr) *proj_tmp_out = std::move(tmp);
  return u;
}

constexpr int64_t kLaneChunk = 64;

// The fused elementwise pass: one traversal per lane covering both gates,
// the state update and the highway output. Lane tasks write disjoint tape
// regions, so results are bitwise identical for any worker count.
template <typename T>
void run_recurrence(const SruLayerConfig& cfg, const SruLayerParamsT<T>& params,
                    SruTapeT<T>& tape, Tensor<T>& c_last) {
  const int64_t L = tape.x.extent(0), B = tape.x.extent(1);
  const int64_t d_in = tape.x.extent(2), d = cfg.d_out;
  const int dirs = cfg.dirs(), G = cfg.gate_blocks();
  const int64_t uw = dirs * G * d, hw = dirs * d;
  const bool state_gates = cfg.use_state_in_gates;
  const bool highway = cfg.use_highway;
  const T alpha = cfg.use_scaling_correction ? params.alpha : T(1);
  const int64_t nchunk = (d + kLaneChunk - 1) / kLaneChunk;

  for (int dir = 0; dir < dirs; ++dir) {
    const bool rev = dir == 1;
    const T* vf = params.v_f.data() + dir * d;
    const T* vr = params.v_r.data() + dir * d;
    const T* bf = params.b_f.data() + dir * d;
    const T* br = params.b_r.data() + dir * d;
    const int64_t ub = dir * G * d;
    const int64_t hb = dir * d;
#pragma omp parallel for collapse(2) schedule(static)
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t ch = 0; ch < nchunk; ++ch) {
        const int64_t j0 = ch * kLaneChunk;
        const int64_t j1 = std::min(d, j0 + kLaneChunk);
        std::array<T, kLaneChunk> cbuf;
        for (int64_t j = j0; j < j1; ++j) cbuf[j - j0] = tape.c0(b, hb + j);
        for (int64_t s = 0; s < L; ++s) {
          const int64_t l = rev ? L - 1 - s : s;
          const int64_t row = l * B + b;
          const T* u = tape.u.data() + row * uw + ub;
          const T* xr = tape.x.data() + row * d_in;
          T* cr = tape.c.data() + row * hw + hb;
          T* fr = tape.f.data() + row * hw + hb;
          T* rr = tape.r.data() + row * hw + hb;
          T* hr = tape.h.data() + row * hw + hb;
          for (int64_t j = j0; j < j1; ++j) {
            T c = cbuf[j - j0];
            const T f =
                stable_sigmoid(u[d + j] + (state_gates ? vf[j] * c : T(0)) + bf[j]);
            c = f * c + (T(1) - f) * u[j];
            const T r =
                stable_sigmoid(u[2 * d + j] + (state_gates ? vr[j] * c : T(0)) + br[j]);
            T h;
            if (highway) {
              const T skip = (G == 4) ? u[3 * d + j] : xr[j];
              h = r * c + (T(1) - r) * skip * alpha;
            } else {
              h = c;
            }
            fr[j] = f;
            rr[j] = r;
            cr[j] = c;
            hr[j] = h;
            cbuf[j - j0] = c;
          }
        }
        for (int64_t j = j0; j < j1; ++j) c_last(b, hb + j) = cbuf[j - j0];
      }
    }
  }
}

template Tensor<double> project_inputs<double>(const SruLayerConfig&,
                                               const SruLayerParamsT<double>&,
                                               const Tensor<double>&,
                                               Tensor<double>*);
template Tensor<float> project_inputs<float>(const SruLayerConfig&,
                                             const SruLayerParamsT<float>&,
                                             const Tensor<float>&,
                                             Tensor<float>*);
template void run_recurrence<double>(const SruLayerConfig&,
                                     const SruLayerParamsT<double>&,
                                     SruTapeT<double>&, Tensor<double>&);
template void run_recurrence<float>(const SruLayerConfig&,
                                    const SruLayerParamsT<float>&,
                                    SruTapeT<float>&, Tensor<float>&);

}  // namespace detail

template <typename T>
Tensor<T> compute_U(const SruLayerConfig& cfg, const SruLayerParamsT<T>& params,
                    const Tensor<T>& x) {
  cfg.validate();
  if (x.rank() != 3 || x.extent(2) != cfg.d_in) {
    throw DimError("compute_U: input " + x.shape_str() + " does not match d_in=" +
                   std::to_string(cfg.d_in));
  }
  const int64_t L = x.extent(0), B = x.extent(1), N = L * B;
  const int64_t d = cfg.d_out, d_in = cfg.d_in;
  const int dirs = cfg.dirs(), G = cfg.gate_blocks();
  Tensor<T> u3({L, B, dirs * 3 * d});
  const int64_t uw = dirs * 3 * d;
  if (!params.factorized()) {
    if (G == 3) {
      // One gemm over all dirs * 3 * d_out output rows.
      matmul(Trans::no, Trans::yes, N, uw, d_in, x.data(), d_in,
             params.w_all.data(), d_in, u3.data(), uw);
    } else {
      for (int dir = 0; dir < dirs; ++dir) {
        matmul(Trans::no, Trans::yes, N, 3 * d, d_in, x.data(), d_in,
               params.w_all.data() + dir * G * d * d_in, d_in,
               u3.data() + dir * 3 * d, uw);
      }
    }
    return u3;
  }
  const int64_t dp = params.proj_dim;
  Tensor<T> tmp({N, dirs * dp});
  matmul(Trans::no, Trans::yes, N, dirs * dp, d_in, x.data(), d_in,
         params.q.data(), d_in, tmp.data(), dirs * dp);
  for (int dir = 0; dir < dirs; ++dir) {
    matmul(Trans::no, Trans::yes, N, 3 * d, dp, tmp.data() + dir * dp, dirs * dp,
           params.p.data() + dir * 3 * d * dp, dp, u3.data() + dir * 3 * d, uw);
  }
  return u3;
}

template <typename T>
SruTapeT<T> fused_recurrence(const SruLayerConfig& cfg,
                             const SruLayerParamsT<T>& params,
                             const Tensor<T>& u3, const Tensor<T>& x,
                             const Tensor<T>& c0) {
  check_forward_shapes(cfg, params, x, c0);
  const int64_t L = x.extent(0), B = x.extent(1), N = L * B;
  const int64_t d = cfg.d_out, d_in = cfg.d_in;
  const int dirs = cfg.dirs(), G = cfg.gate_blocks();
  if (u3.rank() != 3 || u3.extent(0) != L || u3.extent(1) != B ||
      u3.extent(2) != dirs * 3 * d) {
    throw DimError("fused_recurrence: U " + u3.shape_str() +
                   " does not match (L,B,dirs*3*d_out)");
  }

  SruTapeT<T> tape;
  tape.x = x;
  tape.c0 = c0;
  tape.d_out = d;
  tape.dirs = dirs;
  tape.gate_blocks = G;
  tape.c = Tensor<T>({L, B, dirs * d});
  tape.f = Tensor<T>({L, B, dirs * d});
  tape.r = Tensor<T>({L, B, dirs * d});
  tape.h = Tensor<T>({L, B, dirs * d});

  if (G == 3) {
    tape.u = u3;
  } else {
    // Widen to four blocks per direction and fill the skip block.
    tape.u = Tensor<T>({L, B, dirs * G * d});
    const int64_t uw = dirs * G * d, u3w = dirs * 3 * d;
    for (int64_t row = 0; row < N; ++row) {
      for (int dir = 0; dir < dirs; ++dir) {
        std::memcpy(tape.u.data() + row * uw + dir * G * d,
                    u3.data() + row * u3w + dir * 3 * d,
                    sizeof(T) * static_cast<size_t>(3 * d));
      }
    }
    for (int dir = 0; dir < dirs; ++dir) {
      const T* skip_rows = params.factorized()
                               ? params.skip_w.data() + dir * d * d_in
                               : params.w_all.data() + (dir * G + 3) * d * d_in;
      matmul(Trans::no, Trans::yes, N, d, d_in, x.data(), d_in, skip_rows, d_in,
             tape.u.data() + dir * G * d + 3 * d, dirs * G * d);
    }
  }

  Tensor<T> c_last({B, dirs * d});
  detail::run_recurrence(cfg, params, tape, c_last);
  return tape;
}

template <typename T>
SruForwardResultT<T> forward_layer(const SruLayerConfig& cfg,
                                   const SruLayerParamsT<T>& params,
                                   const Tensor<T>& x, const Tensor<T>& c0) {
  check_forward_shapes(cfg, params, x, c0);
  const int64_t L = x.extent(0), B = x.extent(1), d = cfg.d_out;
  const int dirs = cfg.dirs();

  SruForwardResultT<T> out;
  out.tape.x = x;
  out.tape.c0 = c0;
  out.tape.d_out = d;
  out.tape.dirs = dirs;
  out.tape.gate_blocks = cfg.gate_blocks();
  out.tape.u = detail::project_inputs(cfg, params, x, &out.tape.proj_tmp);
  out.tape.c = Tensor<T>({L, B, dirs * d});
  out.tape.f = Tensor<T>({L, B, dirs * d});
  out.tape.r = Tensor<T>({L, B, dirs * d});
  out.tape.h = Tensor<T>({L, B, dirs * d});
  out.c_last = Tensor<T>({B, dirs * d});
  detail::run_recurrence(cfg, params, out.tape, out.c_last);
  return out;
}

namespace {

template <typename T>
bool tensor_finite(const Tensor<T>& t) {
  const T* p = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(static_cast<double>(p[i]))) return false;
  }
  return true;
}

}  // namespace

template <typename T>
bool SruTapeT<T>::all_finite() const {
  return tensor_finite(x) && tensor_finite(u) && tensor_finite(c) &&
         tensor_finite(f) && tensor_finite(r) && tensor_finite(c0) &&
         tensor_finite(h);
}

#define SRU_INSTANTIATE(T)                                                     \
  template SruLayerParamsT<T> make_params<T>(const SruLayerConfig&);           \
  template void check_forward_shapes<T>(const SruLayerConfig&,                 \
                                        const SruLayerParamsT<T>&,             \
                                        const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> compute_U<T>(const SruLayerConfig&,                       \
                                  const SruLayerParamsT<T>&, const Tensor<T>&);\
  template SruTapeT<T> fused_recurrence<T>(const SruLayerConfig&,              \
                                           const SruLayerParamsT<T>&,          \
                                           const Tensor<T>&, const Tensor<T>&, \
                                           const Tensor<T>&);                  \
  template SruForwardResultT<T> forward_layer<T>(const SruLayerConfig&,        \
                                                 const SruLayerParamsT<T>&,    \
                                                 const Tensor<T>&,             \
                                                 const Tensor<T>&);            \
  template bool SruTapeT<T>::all_finite() const;

SRU_INSTANTIATE(double)
SRU_INSTANTIATE(float)
#undef SRU_INSTANTIATE

}  // namespace sru
