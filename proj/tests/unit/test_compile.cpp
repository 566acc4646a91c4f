#include <random>

#include "doctest.h"
#include "gcinfer/compile.hpp"
#include "gcinfer/error.hpp"
#include "gcinfer/gclib.hpp"
#include "gcinfer/simulate.hpp"

using namespace gcinfer;

namespace {

FxVec random_input(size_t n, std::mt19937_64& rng, double lim = 2.0) {
  std::uniform_real_distribution<double> U(-lim, lim);
  FxVec x(n);
  for (auto& v : x) v = encode(U(rng));
  return x;
}

size_t circuit_label(const CompiledCircuit& c, const ModelDescriptor& m, const FxVec& x) {
  return decode_label(c, simulate(c.program, garbler_inputs(c, x), evaluator_inputs(c, m)));
}

ModelDescriptor conv_model(uint64_t seed) {
  // 1x6x6 -> conv 2 maps k3 s1 -> 2x4x4 -> relu -> maxpool 2 -> 2x2x2 -> meanpool... -> fc 8 -> 5
  ModelDescriptor m;
  m.name = "conv-small";
  m.input_shape = {1, 6, 6};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-0.6, 0.6);
  LayerSpec c;
  c.kind = LayerKind::Conv2D;
  c.dims.c = 1, c.dims.h = 6, c.dims.w = 6, c.dims.oc = 2, c.dims.k = 3, c.dims.s = 1;
  c.weights.resize(c.weight_count());
  for (auto& w : c.weights) w = encode(U(rng));
  c.bias = {encode(0.1), encode(-0.2)};
  m.layers.push_back(c);
  LayerSpec r;
  r.kind = LayerKind::NonLinearity;
  r.dims.n = 32;
  r.activation = parse_activation("relu");
  m.layers.push_back(r);
  LayerSpec mp;
  mp.kind = LayerKind::MaxPool;
  mp.dims.c = 2, mp.dims.h = 4, mp.dims.w = 4, mp.dims.k = 2, mp.dims.s = 2;
  m.layers.push_back(mp);
  LayerSpec f;
  f.kind = LayerKind::FullyConnected;
  f.dims.in = 8, f.dims.out = 4;
  f.weights.resize(32);
  for (auto& w : f.weights) w = encode(U(rng));
  m.layers.push_back(f);
  LayerSpec t;
  t.kind = LayerKind::NonLinearity;
  t.dims.n = 4;
  t.activation = parse_activation("tanh:pl");
  m.layers.push_back(t);
  return m;
}

ModelDescriptor meanpool_model() {
  ModelDescriptor m;
  m.name = "mean";
  m.input_shape = {2, 4, 4};
  LayerSpec p;
  p.kind = LayerKind::MeanPool;
  p.dims.c = 2, p.dims.h = 4, p.dims.w = 4, p.dims.k = 2, p.dims.s = 2;
  m.layers.push_back(p);
  return m;
}

void check_both_modes(const ModelDescriptor& m, int trials, uint64_t seed, double lim = 2.0) {
  auto u = compile(m, CompileMode::Unrolled);
  auto f = compile(m, CompileMode::Folded);
  validate(u.program);
  validate(f.program);
  std::mt19937_64 rng(seed);
  for (int t = 0; t < trials; ++t) {
    FxVec x = random_input(m.input_size(), rng, lim);
    size_t want = ref_network_eval(m, x);
    REQUIRE(circuit_label(u, m, x) == want);
    REQUIRE(circuit_label(f, m, x) == want);
  }
}

}  // namespace

TEST_CASE("compiled FC nets agree with the reference in both modes") {
  check_both_modes(make_fc_model({4, 4, 4}, parse_activation("tanh:cordic"), 1), 100, 2);
  check_both_modes(make_fc_model({6, 5, 7}, parse_activation("sigmoid:reduced"), 3, 1.5, true), 60, 4);
  check_both_modes(make_fc_model({8, 4, 3}, parse_activation("relu"), 5, 1.0, true), 60, 6);
}

TEST_CASE("conv, pooling and bias lower correctly") {
  check_both_modes(conv_model(7), 40, 8);
  check_both_modes(meanpool_model(), 60, 9, 7.9);
}

TEST_CASE("masked weights produce no inputs and no gates") {
  auto m = make_fc_model({10, 6, 3}, parse_activation("relu"), 11);
  std::vector<std::vector<uint8_t>> masks(m.layers.size());
  masks[0].assign(60, 1);
  for (size_t j = 0; j < 10; ++j) masks[0][2 * 10 + j] = 0;  // neuron 2 gone entirely
  for (size_t k = 0; k < 60; k += 7) masks[0][k] = 0;
  auto sm = apply_sparsity(m, masks);
  auto dense = compile(m, CompileMode::Unrolled);
  auto sparse = compile(sm, CompileMode::Unrolled);
  size_t kept = 0;
  for (auto v : masks[0]) kept += v;
  CHECK(sparse.evaluator_map.size() == 16 * (kept + 18));
  CHECK(stats(sparse.program).nonxor_count < stats(dense.program).nonxor_count);
  CHECK(sparse.digest != dense.digest);
  check_both_modes(sm, 60, 12);
  // empty mask list changes nothing
  CHECK(serialize(compile(apply_sparsity(m, {}), CompileMode::Unrolled).program) == serialize(dense.program));
  CHECK_THROWS_AS(apply_sparsity(m, {{1, 0, 1}}), Error);
}

TEST_CASE("fifty percent mask on a 100x100 FC cuts non-XOR by at least 45%") {
  auto m = make_fc_model({100, 100}, parse_activation("relu"), 13);
  std::mt19937 rng(14);
  std::vector<std::vector<uint8_t>> masks(m.layers.size());
  masks[0].assign(10000, 1);
  std::vector<size_t> idx(10000);
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (size_t i = 0; i < 5000; ++i) masks[0][idx[i]] = 0;
  auto d = compile_stats(m, CompileMode::Unrolled);
  auto s = compile_stats(apply_sparsity(m, masks), CompileMode::Unrolled);
  CHECK(double(s.nonxor_count) <= 0.55 * double(d.nonxor_count));
}

TEST_CASE("count-only stats equal materialised stats") {
  auto m = conv_model(15);
  CHECK(compile_stats(m, CompileMode::Unrolled) == stats(compile(m, CompileMode::Unrolled).program));
  CHECK(compile_stats(m, CompileMode::Unrolled, true) == stats(compile(m, CompileMode::Unrolled, true).program));
}

TEST_CASE("single-neuron model costs one MULT, one activation and nothing else") {
  auto m = make_fc_model({1, 1}, parse_activation("relu"), 16);
  m.layers[1].activation = parse_activation("tanh:cordic");
  auto s = compile_stats(m, CompileMode::Unrolled);
  auto mult = build_mult_truncated().declared;
  auto act = build_tanh(ActVariant::CORDIC).declared;
  CHECK(s == mult + act);
}

TEST_CASE("outsourced compile adds only XOR gates") {
  auto m = make_fc_model({6, 4, 3}, parse_activation("tanh:reduced"), 17);
  for (auto mode : {CompileMode::Unrolled, CompileMode::Folded}) {
    auto d = stats(compile(m, mode).program);
    auto o = compile(m, mode, true);
    auto os = stats(o.program);
    CHECK(os.nonxor_count == d.nonxor_count);
    CHECK(os.xor_count == d.xor_count + 16 * 6);
    std::mt19937_64 rng(18);
    for (int t = 0; t < 30; ++t) {
      FxVec x = random_input(6, rng), s = random_input(6, rng, 8.0), y(6);
      for (size_t i = 0; i < 6; ++i) y[i] = Fixed16(int16_t(x[i].raw ^ s[i].raw));
      auto out = simulate(o.program, garbler_inputs(o, s), evaluator_inputs(o, m, y));
      CHECK(decode_label(o, out) == ref_network_eval(m, x));
    }
  }
}

TEST_CASE("folded overhead stays small for large layers") {
  auto m = make_fc_model({64, 16}, parse_activation("relu"), 19);
  auto u = compile_stats(m, CompileMode::Unrolled);
  auto f = stats(compile(m, CompileMode::Folded).program);
  double over = (double(f.total()) - double(u.total())) / double(u.total());
  CHECK(std::abs(over) < 0.05);
}

TEST_CASE("compiled circuits round-trip through text with metadata") {
  auto m = conv_model(20);
  for (auto mode : {CompileMode::Unrolled, CompileMode::Folded}) {
    auto c = compile(m, mode);
    auto text = serialize(c.program, c.meta());
    auto back = parse_compiled(text);
    CHECK(back.digest == c.digest);
    CHECK(back.mode == mode);
    CHECK(back.garbler_map == c.garbler_map);
    CHECK(back.evaluator_map == c.evaluator_map);
    CHECK(back.output_map == c.output_map);
    CHECK(back.classes == 4);
    CHECK(stats(back.program) == stats(c.program));
    CHECK(serialize(compile(m, mode).program, c.meta()) == text);  // deterministic
  }
}

TEST_CASE("digest ignores weight values") {
  auto a = make_fc_model({5, 3}, parse_activation("relu"), 1);
  auto b = make_fc_model({5, 3}, parse_activation("relu"), 2);
  CHECK(model_digest(a, CompileMode::Folded, false) == model_digest(b, CompileMode::Folded, false));
  CHECK(model_digest(a, CompileMode::Folded, false) != model_digest(a, CompileMode::Unrolled, false));
  auto c = make_fc_model({5, 3}, parse_activation("tanh:pl"), 1);
  c.layers[1].activation = parse_activation("tanh:lut");
  CHECK(model_digest(a, CompileMode::Folded, false) != model_digest(c, CompileMode::Folded, false));
}
