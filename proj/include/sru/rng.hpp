// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Counter-based seeded RNG. Each value is a pure function of
// (seed, stream, counter), so fills are order-independent, reproducible
// across platforms, and invariant to the number of parallel workers.

#pragma once

#include <cstdint>

#include "sru/tensor.hpp"

namespace sru {

class SeededRng {
 public:
  explicit SeededRng(uint64_t seed, uint64_t stream = 0);

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

  // Independent stream derived from this one; used to give every parameter
  // tensor (and every dropout step) its own counter space.
  SeededRng substream(uint64_t k) const;

  uint64_t bits(uint64_t counter) const;

  // Uniform on [0, 1), 53-bit resolution.
  double unit(uint64_t counter) const;

  // Uniform on [-bound, bound).
  double symmetric(uint64_t counter, double bound) const;

  // Standard normal via Box-Muller; consumes counters 2*counter, 2*counter+1.
  double gaussian(uint64_t counter) const;

 private:
  uint64_t seed_;
  uint64_t stream_;
  uint64_t key_;
};

// Fills every element i.i.d. uniform on [-bound, bound). bound must be > 0.
template <typename T>
void uniform_fill(Tensor<T>& t, double bound, const SeededRng& rng);

// Fills with N(0, sigma^2).
template <typename T>
void gaussian_fill(Tensor<T>& t, double sigma, const SeededRng& rng);

}  // namespace sru
