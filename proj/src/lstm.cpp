// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include "sru/lstm.hpp"

#include <cmath>
#include <cstring>

#include "sru/common.hpp"
#include "sru/gemm.hpp"

namespace sru {

LstmParams make_lstm_params(int64_t d_in, int64_t d) {
  if (d_in < 1 || d < 1) throw ParamError("lstm: dimensions must be >= 1");
  LstmParams p;
  p.d_in = d_in;
  p.d = d;
  p.w_x = Tensor<double>({4 * d, d_in});
  p.w_h = Tensor<double>({4 * d, d});
  p.b = Tensor<double>({4 * d});
  return p;
}

LstmParams init_lstm_layer(int64_t d_in, int64_t d, const SeededRng& rng) {
  LstmParams p = make_lstm_params(d_in, d);
  uniform_fill(p.w_x, std::sqrt(3.0 / static_cast<double>(d_in)), rng.substream(0));
  uniform_fill(p.w_h, std::sqrt(3.0 / static_cast<double>(d)), rng.substream(1));
  return p;
}

int64_t lstm_layer_param_count(int64_t d_in, int64_t d) {
  return 4 * (d * d_in + d * d + d);
}

namespace {

template <typename T>
void check_lstm_shapes(const LstmParamsT<T>& params, const Tensor<T>& x,
                       const Tensor<T>& h0, const Tensor<T>& c0) {
  if (x.rank() != 3 || x.extent(2) != params.d_in) {
    throw DimError("lstm: input " + x.shape_str() + " does not match d_in=" +
                   std::to_string(params.d_in));
  }
  if (x.extent(0) < 1 || x.extent(1) < 1) {
    throw DimError("lstm: need L >= 1 and B >= 1, got " + x.shape_str());
  }
  const int64_t B = x.extent(1);
  if (h0.rank() != 2 || h0.extent(0) != B || h0.extent(1) != params.d ||
      c0.rank() != 2 || c0.extent(0) != B || c0.extent(1) != params.d) {
    throw DimError("lstm: state must be (B, d)");
  }
}

}  // namespace

template <typename T>
LstmTapeT<T> lstm_forward(const LstmParamsT<T>& params, const Tensor<T>& x,
                          const Tensor<T>& h0, const Tensor<T>& c0) {
  check_lstm_shapes(params, x, h0, c0);
  const int64_t L = x.extent(0), B = x.extent(1), d_in = params.d_in, d = params.d;
  const int64_t N = L * B, g4 = 4 * d;

  LstmTapeT<T> tape;
  tape.x = x;
  tape.c0 = c0;
  tape.gates = Tensor<T>({L, B, g4});
  tape.c = Tensor<T>({L, B, d});
  tape.h = Tensor<T>({L, B, d});
  tape.h_prev = Tensor<T>({L, B, d});

  // Batched input projections for all steps in one product.
  matmul(Trans::no, Trans::yes, N, g4, d_in, x.data(), d_in, params.w_x.data(),
         d_in, tape.gates.data(), g4);

  for (int64_t l = 0; l < L; ++l) {
    const T* hprev = (l == 0) ? h0.data() : tape.h.data() + (l - 1) * B * d;
    std::memcpy(tape.h_prev.data() + l * B * d, hprev,
                sizeof(T) * static_cast<size_t>(B * d));
    // Hidden-to-hidden product; this is the sequential bottleneck.
    matmul(Trans::no, Trans::yes, B, g4, d, hprev, d, params.w_h.data(), d,
           tape.gates.data() + l * B * g4, g4, /*accumulate=*/true);
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < B; ++b) {
      T* z = tape.gates.data() + (l * B + b) * g4;
      const T* cp = (l == 0) ? c0.data() + b * d : tape.c.data() + ((l - 1) * B + b) * d;
      T* cr = tape.c.data() + (l * B + b) * d;
      T* hr = tape.h.data() + (l * B + b) * d;
      const T* bias = params.b.data();
      for (int64_t j = 0; j < d; ++j) {
        const T gi = stable_sigmoid(z[j] + bias[j]);
        const T gf = stable_sigmoid(z[d + j] + bias[d + j]);
        const T gg = std::tanh(z[2 * d + j] + bias[2 * d + j]);
        const T go = stable_sigmoid(z[3 * d + j] + bias[3 * d + j]);
        const T c = gf * cp[j] + gi * gg;
        z[j] = gi;
        z[d + j] = gf;
        z[2 * d + j] = gg;
        z[3 * d + j] = go;
        cr[j] = c;
        hr[j] = go * std::tanh(c);
      }
    }
  }
  return tape;
}

template <typename T>
LstmGradientsT<T> lstm_backward(const LstmParamsT<T>& params,
                                const LstmTapeT<T>& tape,
                                const Tensor<T>& grad_h,
                                const Tensor<T>& grad_h_last,
                                const Tensor<T>& grad_c_last) {
  const int64_t L = tape.x.extent(0), B = tape.x.extent(1);
  const int64_t d_in = params.d_in, d = params.d, N = L * B, g4 = 4 * d;
  if (!grad_h.same_shape(tape.h)) {
    throw DimError("lstm_backward: grad_h must match h");
  }

  LstmGradientsT<T> g;
  g.g_x = Tensor<T>({L, B, d_in});
  g.g_h0 = Tensor<T>({B, d});
  g.g_c0 = Tensor<T>({B, d});
  g.g_b = Tensor<T>({g4});

  Tensor<T> dz({L, B, g4});
  Tensor<T> gh({B, d});   // running dL/dh_l
  Tensor<T> gc({B, d});   // running dL/dc_l
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t j = 0; j < d; ++j) {
      gh(b, j) = grad_h_last(b, j);
      gc(b, j) = grad_c_last(b, j);
    }
  }

  for (int64_t l = L - 1; l >= 0; --l) {
#pragma omp parallel for schedule(static)
    for (int64_t b = 0; b < B; ++b) {
      const T* z = tape.gates.data() + (l * B + b) * g4;
      const T* cr = tape.c.data() + (l * B + b) * d;
      const T* cp = (l == 0) ? tape.c0.data() + b * d
                             : tape.c.data() + ((l - 1) * B + b) * d;
      T* dzr = dz.data() + (l * B + b) * g4;
      for (int64_t j = 0; j < d; ++j) {
        const T gi = z[j], gf = z[d + j], gg = z[2 * d + j], go = z[3 * d + j];
        const T tc = std::tanh(cr[j]);
        const T ghv = gh(b, j) + grad_h(l, b, j);
        T gcv = gc(b, j) + ghv * go * (T(1) - tc * tc);
        dzr[3 * d + j] = ghv * tc * go * (T(1) - go);        // o gate
        dzr[j] = gcv * gg * gi * (T(1) - gi);                // i gate
        dzr[d + j] = gcv * cp[j] * gf * (T(1) - gf);         // f gate
        dzr[2 * d + j] = gcv * gi * (T(1) - gg * gg);        // g
        gc(b, j) = gcv * gf;
      }
    }
    // dL/dh_{l-1} = dz_l * Wh
    matmul(Trans::no, Trans::no, B, d, g4, dz.data() + l * B * g4, g4,
           params.w_h.data(), d, gh.data(), d);
  }
  g.g_h0 = gh;
  g.g_c0 = gc;

  g.g_w_x = Tensor<T>({g4, d_in});
  g.g_w_h = Tensor<T>({g4, d});
  matmul(Trans::yes, Trans::no, g4, d_in, N, dz.data(), g4, tape.x.data(), d_in,
         g.g_w_x.data(), d_in);
  matmul(Trans::yes, Trans::no, g4, d, N, dz.data(), g4, tape.h_prev.data(), d,
         g.g_w_h.data(), d);
  matmul(Trans::no, Trans::no, N, d_in, g4, dz.data(), g4, params.w_x.data(),
         d_in, g.g_x.data(), d_in);
  for (int64_t row = 0; row < N; ++row) {
    const T* dzr = dz.data() + row * g4;
    for (int64_t j = 0; j < g4; ++j) g.g_b(j) += dzr[j];
  }
  return g;
}

#define LSTM_INSTANTIATE(T)                                                  \
  template LstmTapeT<T> lstm_forward<T>(const LstmParamsT<T>&,               \
                                        const Tensor<T>&, const Tensor<T>&,  \
                                        const Tensor<T>&);                   \
  template LstmGradientsT<T> lstm_backward<T>(                               \
      const LstmParamsT<T>&, const LstmTapeT<T>&, const Tensor<T>&,          \
      const Tensor<T>&, const Tensor<T>&);

LSTM_INSTANTIATE(double)
LSTM_INSTANTIATE(float)
#undef LSTM_INSTANTIATE

}  // namespace sru
