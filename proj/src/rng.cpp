// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include "sru/rng.hpp"

#include <cmath>

#include "sru/common.hpp"

namespace sru {

namespace {

constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer; full avalanche over 64 bits.
inline uint64_t mix(uint64_t z) {
  z += kGamma;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

SeededRng::SeededRng(uint64_t seed, uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix(mix(seed) ^ stream)) {}

SeededRng SeededRng::substream(uint64_t k) const {
  return SeededRng(seed_, mix(stream_ + kGamma * (k + 1)));
}

uint64_t SeededRng::bits(uint64_t counter) const {
  return mix(key_ + counter * kGamma);
}

double SeededRng::unit(uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

double SeededRng::symmetric(uint64_t counter, double bound) const {
  return (2.0 * unit(counter) - 1.0) * bound;
}

double SeededRng::gaussian(uint64_t counter) const {
  // Box-Muller; shift u1 away from zero so log() stays finite.
  const double u1 = (static_cast<double>(bits(2 * counter) >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = unit(2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <typename T>
void uniform_fill(Tensor<T>& t, double bound, const SeededRng& rng) {
  if (!(bound > 0.0)) {
    throw ParamError("uniform_fill: bound must be > 0");
  }
  T* p = t.data();
  const int64_t n = t.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    p[i] = static_cast<T>(rng.symmetric(static_cast<uint64_t>(i), bound));
  }
}

template <typename T>
void gaussian_fill(Tensor<T>& t, double sigma, const SeededRng& rng) {
  T* p = t.data();
  const int64_t n = t.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    p[i] = static_cast<T>(sigma * rng.gaussian(static_cast<uint64_t>(i)));
  }
}

template void uniform_fill<double>(Tensor<double>&, double, const SeededRng&);
template void uniform_fill<float>(Tensor<float>&, double, const SeededRng&);
template void gaussian_fill<double>(Tensor<double>&, double, const SeededRng&);
template void gaussian_fill<float>(Tensor<float>&, double, const SeededRng&);

}  // namespace sru
