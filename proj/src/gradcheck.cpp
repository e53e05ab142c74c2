// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include "sru/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "sru/init_calib.hpp"
#include "sru/sru_grad.hpp"

namespace sru {

namespace {

struct Slot {
  std::string group;
  Tensor<double>* value;
  const Tensor<double>* analytic;
};

const char* kBlockNames[4] = {"W", "W_f", "W_r", "W_h"};

// w_all packs per-direction blocks; report each block as its own group.
void compare_w_all(const SruLayerConfig& cfg, const Tensor<double>& analytic,
                   const std::vector<double>& fd, size_t fd_off,
                   const std::function<void(const std::string&, double, double)>& record) {
  const int64_t d = cfg.d_out, d_in = cfg.d_in;
  const int G = cfg.gate_blocks();
  for (int64_t row = 0; row < analytic.extent(0); ++row) {
    const int block = static_cast<int>((row % (G * d)) / d);
    for (int64_t col = 0; col < d_in; ++col) {
      const int64_t idx = row * d_in + col;
      record(kBlockNames[block], analytic[idx], fd[fd_off + static_cast<size_t>(idx)]);
    }
  }
}

}  // namespace

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << " over " << configs_run << " configs\n";
  for (const auto& g : groups) {
    os << "  " << (g.pass ? "ok  " : "FAIL") << " " << g.group
       << "  worst_rel=" << g.worst_rel << " worst_abs=" << g.worst_abs
       << " (" << g.compared << " entries)\n";
  }
  if (!pass) os << "  first failing group: " << first_failure << "\n";
  return os.str();
}

GradCheckReport run_gradcheck(const GradCheckOptions& opt) {
  GradCheckReport report;
  std::map<std::string, GradGroupStat> stats;

  const SeededRng master(opt.seed);
  uint64_t ctr = 0;
  const auto rnd_int = [&](int64_t lo, int64_t hi) {  // inclusive
    const double u = master.unit(ctr++);
    return lo + std::min<int64_t>(static_cast<int64_t>(u * static_cast<double>(hi - lo + 1)),
                                  hi - lo);
  };

  for (int c = 0; c < opt.configs; ++c) {
    // Flag sweep: 3 ablation bits x direction x parameterization.
    const int combo = c % 32;
    SruLayerConfig cfg;
    cfg.use_state_in_gates = combo & 1;
    cfg.use_scaling_correction = combo & 2;
    cfg.use_highway = combo & 4;
    cfg.bidirectional = combo & 8;
    const bool factorized = combo & 16;
    cfg.d_out = rnd_int(1, opt.max_dim);
    cfg.d_in = rnd_int(factorized ? 2 : 1, opt.max_dim);
    if (factorized) {
      const int64_t cap = std::min(cfg.d_in, 3 * cfg.d_out);
      if (cap < 2) {
        cfg.d_in = 2;  // keep d' >= 1 representable
      }
      cfg.projection_dim = rnd_int(1, std::min(cfg.d_in, 3 * cfg.d_out) - 1);
    }
    cfg.highway_bias = master.symmetric(ctr++, 2.0);
    const int64_t L = rnd_int(1, opt.max_seq);
    const int64_t B = rnd_int(1, opt.max_batch);
    const bool saturated = opt.include_saturated && (c % 10 == 9);

    SruLayerParams params = init_layer(cfg, master.substream(1000 + static_cast<uint64_t>(c)));
    if (saturated) {
      for (int64_t i = 0; i < params.b_f.numel(); ++i) {
        params.b_f[i] = (i % 2 == 0) ? 20.0 : -20.0;
      }
    }
    Tensor<double> x({L, B, cfg.d_in});
    uniform_fill(x, 1.0, master.substream(2000 + static_cast<uint64_t>(c)));
    Tensor<double> c0({B, cfg.dirs() * cfg.d_out});
    uniform_fill(c0, 1.0, master.substream(3000 + static_cast<uint64_t>(c)));
    Tensor<double> gh({L, B, cfg.dirs() * cfg.d_out});
    uniform_fill(gh, 1.0, master.substream(4000 + static_cast<uint64_t>(c)));
    Tensor<double> gcl({B, cfg.dirs() * cfg.d_out});
    uniform_fill(gcl, 1.0, master.substream(5000 + static_cast<uint64_t>(c)));

    auto res = forward_layer(cfg, params, x, c0);
    SruGradientsT<double> grads = backward_fused(cfg, params, res.tape, gh, gcl);
    if (opt.corrupt_v_f) {
      for (int64_t i = 0; i < grads.g_v_f.numel(); ++i) grads.g_v_f[i] = -grads.g_v_f[i];
    }

    // Flatten parameters + inputs into one coordinate vector.
    std::vector<Slot> slots;
    if (!params.factorized()) {
      slots.push_back({"w_all", &params.w_all, &grads.g_w_all});
    } else {
      slots.push_back({"P", &params.p, &grads.g_p});
      slots.push_back({"Q", &params.q, &grads.g_q});
      if (params.gate_blocks == 4) slots.push_back({"W_h", &params.skip_w, &grads.g_skip_w});
    }
    slots.push_back({"v_f", &params.v_f, &grads.g_v_f});
    slots.push_back({"v_r", &params.v_r, &grads.g_v_r});
    slots.push_back({"b_f", &params.b_f, &grads.g_b_f});
    slots.push_back({"b_r", &params.b_r, &grads.g_b_r});
    slots.push_back({"x", &x, &grads.g_x});
    slots.push_back({"c0", &c0, &grads.g_c0});

    std::vector<double> theta;
    for (const auto& s : slots) {
      for (int64_t i = 0; i < s.value->numel(); ++i) theta.push_back((*s.value)[i]);
    }

    const auto loss_fn = [&](const std::vector<double>& th) {
      size_t off = 0;
      for (const auto& s : slots) {
        for (int64_t i = 0; i < s.value->numel(); ++i) (*s.value)[i] = th[off++];
      }
      auto r = forward_layer(cfg, params, x, c0);
      double loss = 0.0;
      for (int64_t i = 0; i < r.tape.h.numel(); ++i) loss += gh[i] * r.tape.h[i];
      for (int64_t i = 0; i < r.c_last.numel(); ++i) loss += gcl[i] * r.c_last[i];
      return loss;
    };
    const std::vector<double> theta0 = theta;
    const std::vector<double> fd = fd_gradient_oracle(loss_fn, theta, opt.eps);
    // Restore (loss_fn mutates in place).
    {
      size_t off = 0;
      for (const auto& s : slots) {
        for (int64_t i = 0; i < s.value->numel(); ++i) (*s.value)[i] = theta0[off++];
      }
    }

    const double rel_tol = saturated ? opt.saturated_rel_tol : opt.rel_tol;
    const auto record = [&](const std::string& group, double analytic, double fdv) {
      GradGroupStat& st = stats[group];
      st.group = group;
      st.compared += 1;
      const double abs_err = std::fabs(analytic - fdv);
      const double denom = std::max(std::fabs(analytic), std::fabs(fdv));
      const double rel_err = denom > 0.0 ? abs_err / denom : 0.0;
      const bool ok = abs_err <= opt.abs_tol || rel_err <= rel_tol;
      if (abs_err > opt.abs_tol) {
        st.worst_rel = std::max(st.worst_rel, rel_err);
      }
      st.worst_abs = std::max(st.worst_abs, abs_err);
      if (!ok) {
        st.pass = false;
        report.pass = false;
        if (report.first_failure.empty()) report.first_failure = group;
      }
    };

    size_t off = 0;
    for (const auto& s : slots) {
      if (s.group == "w_all") {
        compare_w_all(cfg, *s.analytic, fd, off, record);
      } else {
        for (int64_t i = 0; i < s.analytic->numel(); ++i) {
          record(s.group, (*s.analytic)[i], fd[off + static_cast<size_t>(i)]);
        }
      }
      off += static_cast<size_t>(s.value->numel());
    }
    report.configs_run += 1;
  }

  for (auto& [name, st] : stats) report.groups.push_back(st);
  return report;
}

}  // namespace sru
