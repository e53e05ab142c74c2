// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Shared error types, the gate nonlinearity, and worker-count control.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace sru {

// Shape or extent disagreement between operands.
struct DimError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// An argument value outside its documented domain.
struct ParamError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Tape/config/params handed to a backward pass that do not belong together.
struct ConsistencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad training inputs (corpus, vocabulary, dataset records).
struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// sigma(x) = 1 / (1 + e^-x), branch on sign so exp never overflows.
// Finite for |x| up to ~1e4 and beyond; NaN passes through.
template <typename T>
inline T stable_sigmoid(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Worker pool size used by all parallel kernels. Defaults to the machine
// parallelism, capped by the SRU_WORKERS environment variable. Results are
// bitwise identical for any worker count.
int workers();
void set_workers(int n);
void init_workers_from_env();

}  // namespace sru
