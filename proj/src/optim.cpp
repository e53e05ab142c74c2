// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include "sru/optim.hpp"

#include <cmath>
#include <sstream>

namespace sru {

double noam_lr(int64_t step, int64_t warmup, int64_t d_model, double factor) {
  if (step < 1) throw ParamError("noam_lr: step must be >= 1");
  if (warmup < 1) throw ParamError("noam_lr: warmup must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return factor / std::sqrt(static_cast<double>(d_model)) *
         std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
}

AdamState make_adam_state(const std::vector<NamedTensor>& params) {
  AdamState st;
  for (const auto& p : params) {
    st.m.emplace_back(p.tensor->shape());
    st.v.emplace_back(p.tensor->shape());
  }
  return st;
}

void adam_step(const std::vector<NamedTensor>& params,
               const std::vector<NamedTensor>& grads, AdamState& state,
               double lr, double weight_decay) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ConsistencyError("adam_step: parameter/gradient/moment lists disagree");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<double>& w = *params[pi].tensor;
    const Tensor<double>& g = *grads[pi].tensor;
    if (!w.same_shape(g)) {
      throw ConsistencyError("adam_step: gradient shape mismatch for " + params[pi].name);
    }
    Tensor<double>& m = state.m[pi];
    Tensor<double>& v = state.v[pi];
    double* wp = w.data();
    const double* gp = g.data();
    double* mp = m.data();
    double* vp = v.data();
    const int64_t n = w.numel();
    for (int64_t i = 0; i < n; ++i) {
      if (!std::isfinite(gp[i])) {
        std::ostringstream os;
        os << "adam_step: non-finite gradient in " << params[pi].name
           << " at step " << state.t;
        throw std::runtime_error(os.str());
      }
    }
    const double b1 = state.beta1, b2 = state.beta2, eps = state.eps;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
      if (weight_decay != 0.0) wp[i] *= 1.0 - lr * weight_decay;
      mp[i] = b1 * mp[i] + (1.0 - b1) * gp[i];
      vp[i] = b2 * vp[i] + (1.0 - b2) * gp[i] * gp[i];
      const double mhat = mp[i] / bc1;
      const double vhat = vp[i] / bc2;
      wp[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

double clip_gradients(const std::vector<NamedTensor>& grads, double max_norm) {
  double ss = 0.0;
  for (const auto& g : grads) {
    const double* p = g.tensor->data();
    for (int64_t i = 0; i < g.tensor->numel(); ++i) ss += p[i] * p[i];
  }
  const double norm = std::sqrt(ss);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& g : grads) {
      double* p = g.tensor->data();
      const int64_t n = g.tensor->numel();
#pragma omp parallel for schedule(static)
      for (int64_t i = 0; i < n; ++i) p[i] *= scale;
    }
  }
  return norm;
}

}  // namespace sru
