#include <cmath>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "gcinfer/compile.hpp"
#include "gcinfer/costmodel.hpp"
#include "gcinfer/error.hpp"
#include "gcinfer/gclib.hpp"
#include "gcinfer/selftest.hpp"

using namespace gcinfer;

TEST_CASE("published gate counts reproduce the computation and communication columns") {
  CostParams p;
  // hand-computed values of (xor*62 + nonxor*164) / 3.4e9
  CHECK(estimate({43100000, 24700000}, p).t_comp == doctest::Approx(1.977353).epsilon(1e-6));
  CHECK(estimate({13200000, 7540000}, p).t_comp == doctest::Approx(0.604400).epsilon(1e-5));
  for (const auto& b : published_benchmarks()) {
    auto r = estimate({b.xor_count, b.nonxor_count}, p);
    INFO(b.name);
    CHECK(std::abs(r.t_comp - b.comp_seconds) <= 0.01 * b.comp_seconds);
    CHECK(std::abs(r.comm_bytes / 1e6 - b.comm_mb) <= 0.005 * b.comm_mb);
  }
  auto b1 = estimate({43100000, 24700000}, p);
  CHECK(b1.comm_bytes == 790400000ull);
  auto b3 = estimate({13200000, 7540000}, p);
  CHECK(b3.comm_bytes == 241280000ull);
  CHECK_FALSE(b3.t_comm.has_value());
}

TEST_CASE("comm bytes are exactly nonxor * 2 * n_bits / 8") {
  std::mt19937_64 rng(81);
  CostParams p;
  for (int i = 0; i < 1000; ++i) {
    GateStats s{rng() % (1ull << 40), rng() % (1ull << 40)};
    CHECK(estimate(s, p).comm_bytes == s.nonxor_count * 32);
  }
  p.n_bits = 80;
  CHECK(estimate({0, 7}, p).comm_bytes == 140u);
}

TEST_CASE("bandwidth gives transfer time") {
  CostParams p;
  p.bw_net = 823e6;
  auto r = estimate({43100000, 24700000}, p);
  REQUIRE(r.t_comm.has_value());
  CHECK(*r.t_comm == doctest::Approx(790.4e6 * 8 / 823e6));
  // about 9.67 s end to end at this bandwidth
  CHECK(r.t_comp + *r.t_comm == doctest::Approx(9.66).epsilon(0.01));
}

TEST_CASE("non-positive parameters are rejected") {
  CostParams p;
  p.f_cpu = 0;
  CHECK_THROWS_AS(estimate({1, 1}, p), Error);
  p = {};
  p.clk_nonxor = -1;
  CHECK_THROWS_AS(estimate({1, 1}, p), Error);
  p = {};
  p.bw_net = 0.0;
  CHECK_THROWS_AS(estimate({1, 1}, p), Error);
}

TEST_CASE("estimate is additive over netlist composition") {
  std::mt19937_64 rng(82);
  CostParams p;
  p.bw_net = 1e9;
  for (int t = 0; t < 50; ++t) {
    auto a = random_netlist(rng, 64), b = random_netlist(rng, 64);
    auto ra = estimate(stats(a), p), rb = estimate(stats(b), p);
    auto rc = estimate(stats(compose(a, b)), p);
    CHECK(rc.xor_count == ra.xor_count + rb.xor_count);
    CHECK(rc.nonxor_count == ra.nonxor_count + rb.nonxor_count);
    CHECK(rc.comm_bytes == ra.comm_bytes + rb.comm_bytes);
    CHECK(rc.t_comp == doctest::Approx(ra.t_comp + rb.t_comp).epsilon(1e-12));
    CHECK(*rc.t_comm == doctest::Approx(*ra.t_comm + *rb.t_comm).epsilon(1e-12));
  }
}

TEST_CASE("one-neuron model costs exactly MULT + ADD + activation") {
  for (const char* act : {"relu", "tanh:cordic", "sigmoid:pl", "tanh:reduced"}) {
    auto m = make_fc_model({1, 1}, parse_activation("relu"), 83, 1.0, true);
    LayerSpec nl;
    nl.kind = LayerKind::NonLinearity;
    nl.dims.n = 1;
    nl.activation = parse_activation(act);
    m.layers.push_back(nl);
    auto an = estimate_model(m, CompileMode::Unrolled, true);
    auto co = estimate_model(m, CompileMode::Unrolled, false);
    GateStats want = build_mult_truncated().declared + GateStats{61, 16} + activation_stats(nl.activation) +
                     build_argmax(1).declared;
    INFO(act);
    CHECK(build_argmax(1).declared.nonxor_count == 0);
    CHECK(an.nonxor_count == want.nonxor_count);
    CHECK(an.xor_count == want.xor_count);
    CHECK(co.nonxor_count == an.nonxor_count);
    CHECK(co.xor_count == an.xor_count);
  }
}

TEST_CASE("analytic and compiled estimates agree on FC models") {
  for (auto mode : {CompileMode::Unrolled, CompileMode::Folded}) {
    for (const char* act : {"relu", "tanh:cordic", "sigmoid:reduced"}) {
      auto m = make_fc_model({12, 6, 4}, parse_activation(act), 85, 1.0, true);
      auto an = estimate_model(m, mode, true), co = estimate_model(m, mode, false);
      INFO(to_string(mode) << " " << act);
      CHECK(std::abs(double(an.nonxor_count) - double(co.nonxor_count)) <= 0.03 * double(co.nonxor_count));
      CHECK(std::abs(double(an.xor_count) - double(co.xor_count)) <= 0.03 * double(co.xor_count));
      CHECK(an.layers.size() == m.layers.size() + 1);  // + argmax
    }
  }
  // a pruned layer counts only its kept weights
  auto m = make_fc_model({10, 5, 3}, parse_activation("relu"), 86);
  m.layers[0].mask.assign(50, 1);
  for (int k = 0; k < 20; ++k) m.layers[0].mask[k * 2] = 0;
  auto an = estimate_model(m, CompileMode::Unrolled, true), co = estimate_model(m, CompileMode::Unrolled, false);
  CHECK(std::abs(double(an.nonxor_count) - double(co.nonxor_count)) <= 0.03 * double(co.nonxor_count));
  CHECK(an.layers[0].mult.nonxor_count == build_mult_truncated().declared.nonxor_count * 30);
}

TEST_CASE("layer breakdown sums to the totals and splits by operation") {
  auto m = make_fc_model({16, 8, 4}, parse_activation("tanh:pl"), 87, 1.0, true);
  auto r = estimate_model(m, CompileMode::Unrolled, true);
  GateStats sum;
  double beta = 0;
  for (const auto& L : r.layers) sum += L.gates, beta += L.t_comp;
  CHECK(sum.nonxor_count == r.nonxor_count);
  CHECK(sum.xor_count == r.xor_count);
  CHECK(beta == doctest::Approx(r.t_comp).epsilon(1e-12));
  CHECK(r.beta_mult + r.beta_add + r.beta_act + r.beta_other == doctest::Approx(r.t_comp).epsilon(1e-12));
  auto mult = build_mult_truncated().declared;
  CostParams p;
  double per_mult = (double(mult.xor_count) * p.clk_xor + double(mult.nonxor_count) * p.clk_nonxor) / p.f_cpu;
  CHECK(r.beta_mult == doctest::Approx(per_mult * (16 * 8 + 8 * 4)).epsilon(1e-12));
}

TEST_CASE("benchmark-2 topology lands near the published non-XOR count") {
  auto m = make_fc_model({784, 300, 100, 10}, parse_activation("sigmoid:cordic"), 88);
  auto r = estimate_model(m, CompileMode::Unrolled, true);
  MESSAGE("benchmark-2 analytic nonxor " << r.nonxor_count << " xor " << r.xor_count);
  // recorded, not gated here; acceptance and the ledger track the gap
  CHECK(r.nonxor_count > 0);
}

TEST_CASE("conv and pool layers are counted analytically") {
  LayerSpec conv;
  conv.kind = LayerKind::Conv2D;
  conv.dims.c = 1, conv.dims.h = 6, conv.dims.w = 6, conv.dims.oc = 2, conv.dims.k = 3;
  std::mt19937_64 rng(89);
  for (int i = 0; i < 18; ++i) conv.weights.push_back(from_raw(int64_t(rng() % 4000) - 2000));
  conv.bias.assign(2, from_raw(7));
  for (auto kind : {LayerKind::MaxPool, LayerKind::MeanPool}) {
    LayerSpec pool;
    pool.kind = kind;
    pool.dims.c = 2, pool.dims.h = 4, pool.dims.w = 4, pool.dims.k = 2, pool.dims.s = 2;
    ModelDescriptor c;
    c.input_shape = {1, 6, 6};
    c.layers = {conv, pool};
    auto an = estimate_model(c, CompileMode::Unrolled, true), co = estimate_model(c, CompileMode::Unrolled, false);
    INFO(to_string(kind));
    CHECK(an.nonxor_count == co.nonxor_count);
    CHECK(an.xor_count == co.xor_count);
  }
}

TEST_CASE("report json carries every field") {
  CostParams p;
  p.bw_net = 1e9;
  auto m = make_fc_model({4, 3, 2}, parse_activation("relu"), 90);
  auto r = estimate_model(m, CompileMode::Unrolled, false, p);
  auto j = nlohmann::json::parse(cost_report_json(r, p));
  CHECK(j["nonxor_count"].get<uint64_t>() == r.nonxor_count);
  CHECK(j["comm_bytes"].get<uint64_t>() == r.nonxor_count * 32);
  CHECK(j["t_comm"].get<double>() == doctest::Approx(*r.t_comm));
  CHECK(j["layers"].size() == r.layers.size());
  CHECK(j["params"]["clk_nonxor"].get<double>() == 164);
}
