// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "sru/gemm.hpp"
#include "sru/init_calib.hpp"
#include "sru/sru_layer.hpp"

using namespace sru;
using testing::max_abs_diff;

namespace {

SruLayerConfig basic_cfg(int64_t d_in, int64_t d_out) {
  SruLayerConfig c;
  c.d_in = d_in;
  c.d_out = d_out;
  return c;
}

}  // namespace

TEST_CASE("compute_U: zero input gives zero U") {
  auto cfg = basic_cfg(3, 2);
  auto params = init_layer(cfg, SeededRng(1));
  Tensor<double> x({4, 2, 3});
  const auto u = compute_U(cfg, params, x);
  CHECK(testing::max_abs(u) == 0.0);
  CHECK(u.shape() == std::vector<int64_t>{4, 2, 6});
}

TEST_CASE("compute_U hand case: W=1, W_f=2, W_r=3, x=0.5") {
  auto cfg = basic_cfg(1, 1);
  auto params = make_params<double>(cfg);
  params.w(0, 0, 0) = 1.0;
  params.w_f(0, 0, 0) = 2.0;
  params.w_r(0, 0, 0) = 3.0;
  Tensor<double> x({1, 1, 1});
  x(0, 0, 0) = 0.5;
  const auto u = compute_U(cfg, params, x);
  CHECK(u(0, 0, 0) == doctest::Approx(0.5));
  CHECK(u(0, 0, 1) == doctest::Approx(1.0));
  CHECK(u(0, 0, 2) == doctest::Approx(1.5));
}

TEST_CASE("compute_U rejects a d_in mismatch") {
  auto cfg = basic_cfg(3, 2);
  auto params = init_layer(cfg, SeededRng(1));
  Tensor<double> x({4, 2, 5});
  CHECK_THROWS_AS(compute_U(cfg, params, x), DimError);
}

TEST_CASE("factorized projection equals the dense path when P*Q matches") {
  SruLayerConfig dense_cfg = basic_cfg(6, 4);
  SruLayerConfig fact_cfg = dense_cfg;
  fact_cfg.projection_dim = 3;
  auto fact = init_layer(fact_cfg, SeededRng(7));
  auto dense = make_params<double>(dense_cfg);
  // materialize P*Q into the dense stack
  for (int64_t i = 0; i < 12; ++i) {
    for (int64_t j = 0; j < 6; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < 3; ++k) s += fact.p(i, k) * fact.q(k, j);
      dense.w_all(i, j) = s;
    }
  }
  for (int64_t i = 0; i < 4; ++i)  // skip block W_h (d_in != d_out here)
    for (int64_t j = 0; j < 6; ++j) dense.w_h(0, i, j) = fact.skip_w(i, j);
  dense.v_f = fact.v_f;
  dense.v_r = fact.v_r;
  dense.b_f = fact.b_f;
  dense.b_r = fact.b_r;
  dense.alpha = fact.alpha;

  Tensor<double> x({5, 3, 6});
  uniform_fill(x, 1.0, SeededRng(8));
  const auto u_fact = compute_U(fact_cfg, fact, x);
  const auto u_dense = compute_U(dense_cfg, dense, x);
  CHECK(max_abs_diff(u_fact, u_dense) <= 1e-12);

  Tensor<double> c0({3, 4});
  const auto rf = forward_layer(fact_cfg, fact, x, c0);
  const auto rd = forward_layer(dense_cfg, dense, x, c0);
  CHECK(max_abs_diff(rf.tape.h, rd.tape.h) <= 1e-12);
  CHECK(max_abs_diff(rf.c_last, rd.c_last) <= 1e-12);
}

TEST_CASE("fused recurrence hand case: f = sigma(0) = 0.5 per step") {
  auto cfg = basic_cfg(1, 1);
  auto params = make_params<double>(cfg);
  params.w(0, 0, 0) = 1.0;
  params.alpha = 1.0;
  Tensor<double> x({2, 1, 1});
  x(0, 0, 0) = 1.0;
  x(1, 0, 0) = 2.0;
  Tensor<double> c0({1, 1});
  const auto res = forward_layer(cfg, params, x, c0);
  CHECK(res.tape.c(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(res.tape.c(1, 0, 0) == doctest::Approx(1.25).epsilon(1e-14));
  CHECK(res.tape.h(0, 0, 0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(res.tape.h(1, 0, 0) == doctest::Approx(1.625).epsilon(1e-14));
  CHECK(res.c_last(0, 0) == doctest::Approx(1.25).epsilon(1e-14));

  // the naive path reproduces the same hand values
  const auto [h, c_last] = naive_reference_forward(cfg, params, x, c0);
  CHECK(h(0, 0, 0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(h(1, 0, 0) == doctest::Approx(1.625).epsilon(1e-14));
}

TEST_CASE("saturated-open forget gate preserves c0") {
  auto cfg = basic_cfg(3, 3);
  auto params = init_layer(cfg, SeededRng(2));
  params.b_f.fill(50.0);
  Tensor<double> x({6, 2, 3});
  uniform_fill(x, 1.0, SeededRng(3));
  Tensor<double> c0({2, 3});
  uniform_fill(c0, 1.0, SeededRng(4));
  const auto res = forward_layer(cfg, params, x, c0);
  for (int64_t l = 0; l < 6; ++l)
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t j = 0; j < 3; ++j)
        CHECK(std::fabs(res.tape.c(l, b, j) - c0(b, j)) <= 1e-12);
}

TEST_CASE("saturated-closed reset gate passes x straight through") {
  auto cfg = basic_cfg(3, 3);
  auto params = init_layer(cfg, SeededRng(5));
  params.b_r.fill(-50.0);
  params.alpha = 1.0;
  Tensor<double> x({4, 2, 3});
  uniform_fill(x, 1.0, SeededRng(6));
  Tensor<double> c0({2, 3});
  const auto res = forward_layer(cfg, params, x, c0);
  CHECK(max_abs_diff(res.tape.h, x) <= 1e-12);
}

TEST_CASE("bidirectional output shape is (L, B, 2*d_out)") {
  auto cfg = basic_cfg(5, 5);
  cfg.bidirectional = true;
  auto params = init_layer(cfg, SeededRng(7));
  Tensor<double> x({7, 3, 5});
  uniform_fill(x, 1.0, SeededRng(8));
  Tensor<double> c0({3, 10});
  const auto res = forward_layer(cfg, params, x, c0);
  CHECK(res.tape.h.shape() == std::vector<int64_t>{7, 3, 10});
  CHECK(res.c_last.shape() == std::vector<int64_t>{3, 10});
}

TEST_CASE("zeroed backward direction leaves the forward half bitwise intact") {
  // d_in != d_out so the skip is the learned projection; zeroing the
  // backward direction's parameters then zeroes its whole output half.
  SruLayerConfig bi = basic_cfg(4, 3);
  bi.bidirectional = true;
  auto params = init_layer(bi, SeededRng(9));
  REQUIRE(params.gate_blocks == 4);
  // zero direction 1 blocks
  for (int64_t i = 4 * 3; i < 8 * 3; ++i)
    for (int64_t j = 0; j < 4; ++j) params.w_all(i, j) = 0.0;
  for (int64_t j = 0; j < 3; ++j) {
    params.v_f(1, j) = params.v_r(1, j) = params.b_f(1, j) = params.b_r(1, j) = 0.0;
  }

  SruLayerConfig uni = basic_cfg(4, 3);
  auto uparams = make_params<double>(uni);
  for (int64_t i = 0; i < 4 * 3; ++i)
    for (int64_t j = 0; j < 4; ++j) uparams.w_all(i, j) = params.w_all(i, j);
  for (int64_t j = 0; j < 3; ++j) {
    uparams.v_f(0, j) = params.v_f(0, j);
    uparams.v_r(0, j) = params.v_r(0, j);
    uparams.b_f(0, j) = params.b_f(0, j);
    uparams.b_r(0, j) = params.b_r(0, j);
  }
  uparams.alpha = params.alpha;

  Tensor<double> x({5, 2, 4});
  uniform_fill(x, 1.0, SeededRng(10));
  Tensor<double> cb({2, 6}), cu({2, 3});
  const auto rb = forward_layer(bi, params, x, cb);
  const auto ru = forward_layer(uni, uparams, x, cu);
  for (int64_t l = 0; l < 5; ++l) {
    for (int64_t b = 0; b < 2; ++b) {
      for (int64_t j = 0; j < 3; ++j) {
        REQUIRE(rb.tape.h(l, b, j) == ru.tape.h(l, b, j));   // forward half
        REQUIRE(rb.tape.h(l, b, 3 + j) == 0.0);              // dead half
      }
    }
  }
}

TEST_CASE("palindromic input with shared parameters mirrors the directions") {
  SruLayerConfig cfg = basic_cfg(4, 4);
  cfg.bidirectional = true;
  auto params = init_layer(cfg, SeededRng(11));
  // copy direction 0 parameters into direction 1
  for (int64_t i = 0; i < 3 * 4; ++i)
    for (int64_t j = 0; j < 4; ++j) params.w_all(3 * 4 + i, j) = params.w_all(i, j);
  for (int64_t j = 0; j < 4; ++j) {
    params.v_f(1, j) = params.v_f(0, j);
    params.v_r(1, j) = params.v_r(0, j);
    params.b_f(1, j) = params.b_f(0, j);
    params.b_r(1, j) = params.b_r(0, j);
  }
  const int64_t L = 7;
  Tensor<double> x({L, 2, 4});
  uniform_fill(x, 1.0, SeededRng(12));
  for (int64_t l = 0; l < L / 2; ++l)  // make it palindromic
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t j = 0; j < 4; ++j) x(L - 1 - l, b, j) = x(l, b, j);
  Tensor<double> c0({2, 8});
  const auto res = forward_layer(cfg, params, x, c0);
  for (int64_t l = 0; l < L; ++l)
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t j = 0; j < 4; ++j)
        CHECK(std::fabs(res.tape.h(l, b, 4 + j) - res.tape.h(L - 1 - l, b, j)) <= 1e-12);
}

TEST_CASE("fused path matches the serial reference across flags (quick sweep)") {
  const SeededRng rng(13);
  uint64_t ctr = 0;
  const auto dim = [&](int64_t hi) {
    return 1 + static_cast<int64_t>(rng.unit(ctr++) * static_cast<double>(hi));
  };
  for (int t = 0; t < 32; ++t) {
    SruLayerConfig cfg;
    cfg.use_state_in_gates = t & 1;
    cfg.use_scaling_correction = t & 2;
    cfg.use_highway = t & 4;
    cfg.bidirectional = t & 8;
    const bool fact = t & 16;
    cfg.d_out = dim(16);
    cfg.d_in = fact ? 1 + dim(15) : dim(16);
    if (fact) {
      const int64_t cap = std::min(cfg.d_in, 3 * cfg.d_out);  // >= 2 here
      cfg.projection_dim =
          1 + static_cast<int64_t>(rng.unit(ctr++) * static_cast<double>(cap - 1));
      cfg.projection_dim = std::min(cfg.projection_dim, cap - 1);
    }
    cfg.highway_bias = rng.symmetric(ctr++, 1.5);
    const int64_t L = dim(8), B = dim(4);
    auto params = init_layer(cfg, rng.substream(100 + static_cast<uint64_t>(t)));
    Tensor<double> x({L, B, cfg.d_in});
    uniform_fill(x, 1.0, rng.substream(200 + static_cast<uint64_t>(t)));
    Tensor<double> c0({B, cfg.dirs() * cfg.d_out});
    uniform_fill(c0, 1.0, rng.substream(300 + static_cast<uint64_t>(t)));
    const auto fused = forward_layer(cfg, params, x, c0);
    const auto [h, c_last] = naive_reference_forward(cfg, params, x, c0);
    REQUIRE(testing::close_rel(fused.tape.h, h, 1e-10));
    REQUIRE(testing::close_rel(fused.c_last, c_last, 1e-10));
  }
}

TEST_CASE("L = 0 is rejected identically by both paths") {
  auto cfg = basic_cfg(3, 3);
  auto params = init_layer(cfg, SeededRng(14));
  Tensor<double> x({0, 2, 3});
  Tensor<double> c0({2, 3});
  std::string fused_msg, naive_msg;
  try {
    forward_layer(cfg, params, x, c0);
  } catch (const DimError& e) {
    fused_msg = e.what();
  }
  try {
    naive_reference_forward(cfg, params, x, c0);
  } catch (const DimError& e) {
    naive_msg = e.what();
  }
  CHECK(!fused_msg.empty());
  CHECK(fused_msg == naive_msg);
}

TEST_CASE("public fused_recurrence accepts a precomputed U") {
  auto cfg = basic_cfg(4, 3);  // learned skip block exercised
  auto params = init_layer(cfg, SeededRng(15));
  Tensor<double> x({6, 2, 4});
  uniform_fill(x, 1.0, SeededRng(16));
  Tensor<double> c0({2, 3});
  const auto u3 = compute_U(cfg, params, x);
  const auto tape = fused_recurrence(cfg, params, u3, x, c0);
  const auto full = forward_layer(cfg, params, x, c0);
  CHECK(max_abs_diff(tape.h, full.tape.h) <= 1e-13);
}

TEST_CASE("NaN input propagates and the tape flags it") {
  auto cfg = basic_cfg(2, 2);
  auto params = init_layer(cfg, SeededRng(17));
  Tensor<double> x({3, 1, 2});
  uniform_fill(x, 1.0, SeededRng(18));
  x(1, 0, 1) = std::nan("");
  Tensor<double> c0({1, 2});
  const auto res = forward_layer(cfg, params, x, c0);
  CHECK_FALSE(res.tape.all_finite());
}

TEST_CASE("permuting hidden lanes permutes the outputs exactly") {
  // d_in != d_out so every output path flows through permuted rows.
  SruLayerConfig cfg = basic_cfg(5, 4);
  auto params = init_layer(cfg, SeededRng(19));
  REQUIRE(params.gate_blocks == 4);
  Tensor<double> x({6, 3, 5});
  uniform_fill(x, 1.0, SeededRng(20));
  Tensor<double> c0({3, 4});
  uniform_fill(c0, 1.0, SeededRng(21));

  const int perm[4] = {2, 0, 3, 1};
  auto permuted = params;
  for (int block = 0; block < 4; ++block) {
    for (int64_t i = 0; i < 4; ++i) {
      for (int64_t j = 0; j < 5; ++j) {
        permuted.w_all(block * 4 + i, j) = params.w_all(block * 4 + perm[i], j);
      }
    }
  }
  for (int64_t j = 0; j < 4; ++j) {
    permuted.v_f(0, j) = params.v_f(0, perm[j]);
    permuted.v_r(0, j) = params.v_r(0, perm[j]);
    permuted.b_f(0, j) = params.b_f(0, perm[j]);
    permuted.b_r(0, j) = params.b_r(0, perm[j]);
  }
  Tensor<double> c0p({3, 4});
  for (int64_t b = 0; b < 3; ++b)
    for (int64_t j = 0; j < 4; ++j) c0p(b, j) = c0(b, perm[j]);

  const auto base = forward_layer(cfg, params, x, c0);
  const auto swapped = forward_layer(cfg, permuted, x, c0p);
  for (int64_t l = 0; l < 6; ++l)
    for (int64_t b = 0; b < 3; ++b)
      for (int64_t j = 0; j < 4; ++j) {
        REQUIRE(swapped.tape.h(l, b, j) == base.tape.h(l, b, perm[j]));
        REQUIRE(swapped.tape.c(l, b, j) == base.tape.c(l, b, perm[j]));
      }
}

TEST_CASE("recorded gates lie strictly inside (0,1) and c is a convex mix") {
  auto cfg = basic_cfg(6, 6);
  auto params = init_layer(cfg, SeededRng(22));
  Tensor<double> x({10, 4, 6});
  uniform_fill(x, 2.0, SeededRng(23));
  Tensor<double> c0({4, 6});
  uniform_fill(c0, 1.0, SeededRng(24));
  const auto res = forward_layer(cfg, params, x, c0);
  const auto& tape = res.tape;
  for (int64_t l = 0; l < 10; ++l) {
    for (int64_t b = 0; b < 4; ++b) {
      for (int64_t j = 0; j < 6; ++j) {
        const double f = tape.f(l, b, j), r = tape.r(l, b, j);
        REQUIRE(f > 0.0);
        REQUIRE(f < 1.0);
        REQUIRE(r > 0.0);
        REQUIRE(r < 1.0);
        const double cprev = l == 0 ? tape.c0(b, j) : tape.c(l - 1, b, j);
        const double u0 = tape.u(l, b, j);
        const double lo = std::min(cprev, u0) - 1e-12;
        const double hi = std::max(cprev, u0) + 1e-12;
        REQUIRE(tape.c(l, b, j) >= lo);
        REQUIRE(tape.c(l, b, j) <= hi);
      }
    }
  }
}

TEST_CASE("forward outputs are bitwise identical for 1 and 4 workers") {
  SruLayerConfig cfg = basic_cfg(32, 32);
  cfg.bidirectional = true;
  auto params = init_layer(cfg, SeededRng(25));
  Tensor<double> x({12, 4, 32});
  uniform_fill(x, 1.0, SeededRng(26));
  Tensor<double> c0({4, 64});
  set_workers(1);
  const auto r1 = forward_layer(cfg, params, x, c0);
  set_workers(4);
  const auto r4 = forward_layer(cfg, params, x, c0);
  set_workers(1);
  for (int64_t i = 0; i < r1.tape.h.numel(); ++i) REQUIRE(r1.tape.h[i] == r4.tape.h[i]);
  for (int64_t i = 0; i < r1.c_last.numel(); ++i) REQUIRE(r1.c_last[i] == r4.c_last[i]);
}
