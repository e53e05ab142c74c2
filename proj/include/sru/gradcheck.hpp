// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Randomized certification of the analytic backward pass against central
// finite differences, sweeping every ablation-flag combination, both
// directionality modes, and the dense/factorized parameterizations.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sru {

struct GradCheckOptions {
  int configs = 200;
  uint64_t seed = 7;
  bool include_saturated = true;  // b_f = +-20 cases at the looser tolerance
  int64_t max_seq = 4;
  int64_t max_batch = 3;
  int64_t max_dim = 5;
  double eps = 1e-5;
  double rel_tol = 1e-4;
  double abs_tol = 1e-7;
  double saturated_rel_tol = 1e-3;
  // Test hook: negate the analytic v_f gradient before comparing. A working
  // suite must fail and name v_f.
  bool corrupt_v_f = false;
};

struct GradGroupStat {
  std::string group;
  double worst_rel = 0.0;
  double worst_abs = 0.0;
  int64_t compared = 0;
  bool pass = true;
};

struct GradCheckReport {
  bool pass = true;
  int configs_run = 0;
  std::vector<GradGroupStat> groups;
  std::string first_failure;  // parameter group of the first failing entry

  std::string summary() const;
};

GradCheckReport run_gradcheck(const GradCheckOptions& opt);

}  // namespace sru
