// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include "sru/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <new>
#include <ostream>

#include "sru/gemm.hpp"
#include "sru/init_calib.hpp"
#include "sru/lstm.hpp"
#include "sru/sru_grad.hpp"
#include "sru/sru_kernels.hpp"
#include "sru/sru_layer.hpp"

namespace sru {

const char* bench_arch_name(BenchArch a) {
  switch (a) {
    case BenchArch::sru_fused: return "sru_fused";
    case BenchArch::sru_naive: return "sru_naive";
    case BenchArch::lstm: return "lstm";
  }
  return "?";
}

const char* bench_pass_name(BenchPass p) {
  switch (p) {
    case BenchPass::forward: return "forward";
    case BenchPass::forward_backward: return "forward_backward";
    case BenchPass::elementwise_only: return "elementwise_only";
    case BenchPass::matmul_only: return "matmul_only";
  }
  return "?";
}

std::optional<BenchArch> parse_bench_arch(const std::string& s) {
  if (s == "sru_fused") return BenchArch::sru_fused;
  if (s == "sru_naive") return BenchArch::sru_naive;
  if (s == "lstm") return BenchArch::lstm;
  return std::nullopt;
}

std::optional<BenchPass> parse_bench_pass(const std::string& s) {
  if (s == "forward") return BenchPass::forward;
  if (s == "forward_backward") return BenchPass::forward_backward;
  if (s == "elementwise_only") return BenchPass::elementwise_only;
  if (s == "matmul_only") return BenchPass::matmul_only;
  return std::nullopt;
}

namespace {

template <typename F>
void time_body(F&& body, int reps, int warmup, double* mean, double* stdev) {
  using clock = std::chrono::steady_clock;
  for (int i = 0; i < warmup; ++i) body();
  std::vector<double> ms(static_cast<size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = clock::now();
    body();
    const auto t1 = clock::now();
    ms[static_cast<size_t>(i)] =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  double m = 0.0;
  for (double v : ms) m += v;
  m /= static_cast<double>(reps);
  double ss = 0.0;
  for (double v : ms) ss += (v - m) * (v - m);
  *mean = m;
  *stdev = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) : 0.0;
}

// Unfused per-step elementwise pass: every operation is its own sweep with
// temporaries, the way a framework without fusion would execute Eqs. 1-4.
template <typename T>
void naive_elementwise_pass(const SruLayerConfig& cfg,
                            const SruLayerParamsT<T>& params, const Tensor<T>& u3,
                            const Tensor<T>& x, Tensor<T>& c_state,
                            Tensor<T>& h_out) {
  const int64_t L = x.extent(0), B = x.extent(1), d = cfg.d_out;
  const T alpha = cfg.use_scaling_correction ? params.alpha : T(1);
  const int64_t n = B * d;
  std::vector<T> zf(static_cast<size_t>(n)), f(static_cast<size_t>(n));
  std::vector<T> zr(static_cast<size_t>(n)), r(static_cast<size_t>(n));
  for (int64_t l = 0; l < L; ++l) {
    const T* u = u3.data() + l * B * 3 * d;
    const T* xr = x.data() + l * B * d;
    T* c = c_state.data();
    T* h = h_out.data() + l * B * d;
    for (int64_t b = 0; b < B; ++b)
      for (int64_t j = 0; j < d; ++j)
        zf[static_cast<size_t>(b * d + j)] =
            u[b * 3 * d + d + j] + params.v_f(0, j) * c[b * d + j] + params.b_f(0, j);
    for (int64_t i = 0; i < n; ++i) f[static_cast<size_t>(i)] = stable_sigmoid(zf[static_cast<size_t>(i)]);
    for (int64_t b = 0; b < B; ++b)
      for (int64_t j = 0; j < d; ++j)
        c[b * d + j] = f[static_cast<size_t>(b * d + j)] * c[b * d + j] +
                       (T(1) - f[static_cast<size_t>(b * d + j)]) * u[b * 3 * d + j];
    for (int64_t b = 0; b < B; ++b)
      for (int64_t j = 0; j < d; ++j)
        zr[static_cast<size_t>(b * d + j)] =
            u[b * 3 * d + 2 * d + j] + params.v_r(0, j) * c[b * d + j] + params.b_r(0, j);
    for (int64_t i = 0; i < n; ++i) r[static_cast<size_t>(i)] = stable_sigmoid(zr[static_cast<size_t>(i)]);
    for (int64_t b = 0; b < B; ++b)
      for (int64_t j = 0; j < d; ++j)
        h[b * d + j] = r[static_cast<size_t>(b * d + j)] * c[b * d + j] +
                       (T(1) - r[static_cast<size_t>(b * d + j)]) * xr[b * d + j] * alpha;
  }
}

// LSTM recurrent part with the input projection precomputed.
template <typename T>
void lstm_recurrent_pass(const LstmParamsT<T>& params, const Tensor<T>& ux,
                         Tensor<T>& h, Tensor<T>& c, Tensor<T>& z_buf,
                         int64_t L, int64_t B) {
  const int64_t d = params.d, g4 = 4 * d;
  for (int64_t l = 0; l < L; ++l) {
    std::memcpy(z_buf.data(), ux.data() + l * B * g4,
                sizeof(T) * static_cast<size_t>(B * g4));
    matmul(Trans::no, Trans::yes, B, g4, d, h.data(), d, params.w_h.data(), d,
           z_buf.data(), g4, /*accumulate=*/true);
    for (int64_t b = 0; b < B; ++b) {
      T* z = z_buf.data() + b * g4;
      T* cr = c.data() + b * d;
      T* hr = h.data() + b * d;
      const T* bias = params.b.data();
      for (int64_t j = 0; j < d; ++j) {
        const T gi = stable_sigmoid(z[j] + bias[j]);
        const T gf = stable_sigmoid(z[d + j] + bias[d + j]);
        const T gg = std::tanh(z[2 * d + j] + bias[2 * d + j]);
        const T go = stable_sigmoid(z[3 * d + j] + bias[3 * d + j]);
        cr[j] = gf * cr[j] + gi * gg;
        hr[j] = go * std::tanh(cr[j]);
      }
    }
  }
}

template <typename T>
bool run_sru_cell(BenchPass pass, int64_t L, int64_t B, int64_t d, int reps,
                  int warmup, uint64_t seed, bool fused, double* mean,
                  double* stdev) {
  SruLayerConfig cfg;
  cfg.d_in = d;
  cfg.d_out = d;
  const SeededRng rng(seed);
  const SruLayerParamsT<T> params = init_layer(cfg, rng).template cast<T>();
  Tensor<T> x({L, B, d});
  uniform_fill(x, 1.0, rng.substream(900));
  Tensor<T> c0({B, d});

  if (!fused && (pass == BenchPass::forward_backward || pass == BenchPass::matmul_only)) {
    return false;  // the serial reference has no backward and no batched gemm
  }

  switch (pass) {
    case BenchPass::forward: {
      if (fused) {
        time_body([&] { auto r = forward_layer(cfg, params, x, c0); (void)r; },
                  reps, warmup, mean, stdev);
      } else {
        time_body([&] { auto r = naive_reference_forward(cfg, params, x, c0); (void)r; },
                  reps, warmup, mean, stdev);
      }
      return true;
    }
    case BenchPass::forward_backward: {
      Tensor<T> gh({L, B, d});
      uniform_fill(gh, 1.0, rng.substream(901));
      Tensor<T> gcl({B, d});
      time_body(
          [&] {
            auto r = forward_layer(cfg, params, x, c0);
            auto g = backward_fused(cfg, params, r.tape, gh, gcl);
            (void)g;
          },
          reps, warmup, mean, stdev);
      return true;
    }
    case BenchPass::elementwise_only: {
      Tensor<T> u3 = compute_U(cfg, params, x);
      if (fused) {
        SruTapeT<T> tape;
        tape.x = x;
        tape.c0 = c0;
        tape.u = u3;
        tape.d_out = d;
        tape.dirs = 1;
        tape.gate_blocks = 3;
        tape.c = Tensor<T>({L, B, d});
        tape.f = Tensor<T>({L, B, d});
        tape.r = Tensor<T>({L, B, d});
        tape.h = Tensor<T>({L, B, d});
        Tensor<T> c_last({B, d});
        time_body([&] { detail::run_recurrence(cfg, params, tape, c_last); },
                  reps, warmup, mean, stdev);
      } else {
        Tensor<T> cst({B, d});
        Tensor<T> h({L, B, d});
        time_body(
            [&] {
              cst.fill(T(0));
              naive_elementwise_pass(cfg, params, u3, x, cst, h);
            },
            reps, warmup, mean, stdev);
      }
      return true;
    }
    case BenchPass::matmul_only: {
      Tensor<T> u({L, B, 3 * d});
      time_body(
          [&] {
            matmul(Trans::no, Trans::yes, L * B, 3 * d, d, x.data(), d,
                   params.w_all.data(), d, u.data(), 3 * d);
          },
          reps, warmup, mean, stdev);
      return true;
    }
  }
  return false;
}

template <typename T>
bool run_lstm_cell(BenchPass pass, int64_t L, int64_t B, int64_t d, int reps,
                   int warmup, uint64_t seed, double* mean, double* stdev) {
  const SeededRng rng(seed);
  const LstmParamsT<T> params = init_lstm_layer(d, d, rng).template cast<T>();
  Tensor<T> x({L, B, d});
  uniform_fill(x, 1.0, rng.substream(900));
  Tensor<T> h0({B, d}), c0({B, d});

  switch (pass) {
    case BenchPass::forward: {
      time_body([&] { auto t = lstm_forward(params, x, h0, c0); (void)t; }, reps,
                warmup, mean, stdev);
      return true;
    }
    case BenchPass::forward_backward: {
      Tensor<T> gh({L, B, d});
      uniform_fill(gh, 1.0, rng.substream(901));
      Tensor<T> gz({B, d});
      time_body(
          [&] {
            auto t = lstm_forward(params, x, h0, c0);
            auto g = lstm_backward(params, t, gh, gz, gz);
            (void)g;
          },
          reps, warmup, mean, stdev);
      return true;
    }
    case BenchPass::elementwise_only: {
      // The sequential recurrent part: per-step hidden gemm + gates.
      Tensor<T> ux({L, B, 4 * d});
      matmul(Trans::no, Trans::yes, L * B, 4 * d, d, x.data(), d,
             params.w_x.data(), d, ux.data(), 4 * d);
      Tensor<T> h({B, d}), c({B, d}), z({B, 4 * d});
      time_body(
          [&] {
            h.fill(T(0));
            c.fill(T(0));
            lstm_recurrent_pass(params, ux, h, c, z, L, B);
          },
          reps, warmup, mean, stdev);
      return true;
    }
    case BenchPass::matmul_only: {
      Tensor<T> ux({L, B, 4 * d});
      time_body(
          [&] {
            matmul(Trans::no, Trans::yes, L * B, 4 * d, d, x.data(), d,
                   params.w_x.data(), d, ux.data(), 4 * d);
          },
          reps, warmup, mean, stdev);
      return true;
    }
  }
  return false;
}

}  // namespace

BenchRecord bench_cell(BenchArch arch, BenchPass pass, int64_t L, int64_t B,
                       int64_t d, int reps, int warmup, bool f32, uint64_t seed) {
  BenchRecord rec;
  rec.arch = arch;
  rec.pass = pass;
  rec.L = L;
  rec.B = B;
  rec.d = d;
  rec.reps = reps;
  double mean = std::nan(""), stdev = std::nan("");
  try {
    bool ok = false;
    if (arch == BenchArch::lstm) {
      ok = f32 ? run_lstm_cell<float>(pass, L, B, d, reps, warmup, seed, &mean, &stdev)
               : run_lstm_cell<double>(pass, L, B, d, reps, warmup, seed, &mean, &stdev);
    } else {
      const bool fused = arch == BenchArch::sru_fused;
      ok = f32 ? run_sru_cell<float>(pass, L, B, d, reps, warmup, seed, fused, &mean, &stdev)
               : run_sru_cell<double>(pass, L, B, d, reps, warmup, seed, fused, &mean, &stdev);
    }
    rec.ok = ok;
  } catch (const std::bad_alloc&) {
    rec.ok = false;  // skipped cell; the run continues
  }
  if (rec.ok) {
    rec.ms_mean = mean;
    rec.ms_std = stdev;
  } else {
    rec.ms_mean = std::nan("");
    rec.ms_std = std::nan("");
  }
  return rec;
}

double lstm_recurrent_gemm_ms(int64_t L, int64_t B, int64_t d, int reps,
                              int warmup, uint64_t seed) {
  const SeededRng rng(seed);
  Tensor<double> h({B, d}), w({4 * d, d}), z({B, 4 * d});
  uniform_fill(h, 1.0, rng.substream(0));
  uniform_fill(w, std::sqrt(3.0 / static_cast<double>(d)), rng.substream(1));
  double mean = 0.0, stdev = 0.0;
  time_body(
      [&] {
        for (int64_t l = 0; l < L; ++l) {
          matmul(Trans::no, Trans::yes, B, 4 * d, d, h.data(), d, w.data(), d,
                 z.data(), 4 * d);
        }
      },
      reps, warmup, &mean, &stdev);
  return mean;
}

std::vector<BenchRecord> run_bench(const BenchOptions& opt) {
  std::vector<BenchRecord> out;
  for (BenchArch arch : opt.archs) {
    for (BenchPass pass : opt.passes) {
      for (int64_t L : opt.seq_lens) {
        for (int64_t d : opt.dims) {
          out.push_back(bench_cell(arch, pass, L, opt.batch, d, opt.reps,
                                   opt.warmup, opt.f32, opt.seed));
        }
      }
    }
  }
  return out;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records,
                     bool gnuplot_layout) {
  os << "arch,pass,L,B,d,ms_mean,ms_std\n";
  const BenchRecord* prev = nullptr;
  for (const auto& r : records) {
    if (gnuplot_layout && prev != nullptr &&
        (prev->arch != r.arch || prev->pass != r.pass)) {
      os << "\n";  // block separator for gnuplot `index`
    }
    os << bench_arch_name(r.arch) << "," << bench_pass_name(r.pass) << "," << r.L
       << "," << r.B << "," << r.d << ",";
    if (r.ok) {
      os << r.ms_mean << "," << r.ms_std << "\n";
    } else {
      os << "nan,nan\n";
    }
    prev = &r;
  }
}

}  // namespace sru
