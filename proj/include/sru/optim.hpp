// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Optimizer stack: Noam learning-rate schedule, Adam with decoupled weight
// decay, and global-norm gradient clipping.

#pragma once

#include <cstdint>
#include <vector>

#include "sru/model.hpp"
#include "sru/tensor.hpp"

namespace sru {

// factor * d_model^(-1/2) * min(step^(-1/2), step * warmup^(-3/2)).
// Rises until step == warmup, decays as 1/sqrt(step) after.
double noam_lr(int64_t step, int64_t warmup, int64_t d_model, double factor);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  std::vector<Tensor<double>> m, v;  // aligned with the parameter list
};

AdamState make_adam_state(const std::vector<NamedTensor>& params);

// One update. Decoupled weight decay shrinks parameters before the moment
// update; bias-corrected first/second moments. Throws on non-finite
// gradients, naming the step.
void adam_step(const std::vector<NamedTensor>& params,
               const std::vector<NamedTensor>& grads, AdamState& state,
               double lr, double weight_decay);

// Scales gradients so the global L2 norm is at most max_norm (direction
// preserved); returns the pre-clip norm. max_norm <= 0 disables clipping.
double clip_gradients(const std::vector<NamedTensor>& grads, double max_norm);

}  // namespace sru
