// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include "sru/common.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>

namespace sru {

namespace {
int g_workers = 0;  // 0 = not yet resolved
}

void set_workers(int n) {
  g_workers = std::max(1, n);
  omp_set_num_threads(g_workers);
}

void init_workers_from_env() {
  int n = omp_get_max_threads();
  if (const char* env = std::getenv("SRU_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1 && v < n) {
      n = static_cast<int>(v);
    }
  }
  set_workers(n);
}

int workers() {
  if (g_workers == 0) {
    init_workers_from_env();
  }
  return g_workers;
}

}  // namespace sru
