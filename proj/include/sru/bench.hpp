// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Timing harness comparing the fused SRU path, the serial per-step
// reference, and the LSTM baseline on synthetic data. Pass kinds isolate
// the batched projection (matmul_only) and the recurrence (elementwise_only)
// from the full forward / forward+backward runs.

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sru/tensor.hpp"

namespace sru {

enum class BenchArch { sru_fused, sru_naive, lstm };
enum class BenchPass { forward, forward_backward, elementwise_only, matmul_only };

const char* bench_arch_name(BenchArch a);
const char* bench_pass_name(BenchPass p);
std::optional<BenchArch> parse_bench_arch(const std::string& s);
std::optional<BenchPass> parse_bench_pass(const std::string& s);

struct BenchRecord {
  BenchArch arch = BenchArch::sru_fused;
  BenchPass pass = BenchPass::forward;
  int64_t L = 0, B = 0, d = 0;
  double ms_mean = 0.0, ms_std = 0.0;
  int reps = 0;     // timed repetitions recorded
  bool ok = false;  // false: unsupported combination or out-of-memory cell
};

struct BenchOptions {
  std::vector<int64_t> seq_lens{32, 128};
  std::vector<int64_t> dims{128, 256, 512};
  int64_t batch = 32;
  std::vector<BenchArch> archs{BenchArch::sru_fused, BenchArch::sru_naive,
                               BenchArch::lstm};
  std::vector<BenchPass> passes{BenchPass::forward, BenchPass::forward_backward};
  int reps = 20;
  int warmup = 3;
  bool f32 = false;  // benchmarks may opt into 32-bit; correctness stays 64-bit
  uint64_t seed = 1;
};

// One timed cell. Never throws for unsupported/oversized cells; those come
// back with ok = false.
BenchRecord bench_cell(BenchArch arch, BenchPass pass, int64_t L, int64_t B,
                       int64_t d, int reps, int warmup, bool f32, uint64_t seed);

// Full grid, serially, in deterministic row order.
std::vector<BenchRecord> run_bench(const BenchOptions& opt);

// Milliseconds for just the hidden-to-hidden products of an L-step LSTM
// recurrence, the O(B d^2) part whose quadratic scaling the elementwise SRU
// pass avoids. Used for the scaling-ratio checks.
double lstm_recurrent_gemm_ms(int64_t L, int64_t B, int64_t d, int reps,
                              int warmup, uint64_t seed);

// Header arch,pass,L,B,d,ms_mean,ms_std. The gnuplot layout groups rows by
// (arch, pass) into blank-line separated blocks for `plot ... index`.
void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records,
                     bool gnuplot_layout);

}  // namespace sru
