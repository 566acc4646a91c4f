#include <cmath>
#include <random>

#include "doctest.h"
#include "gcinfer/activation.hpp"
#include "gcinfer/fixed.hpp"

using namespace gcinfer;

namespace {

// independent oracles, plain integer math
int16_t mul_oracle(int a, int b) {
  long long p = (long long)a * b;
  long long q = p >= 0 ? p / 4096 : -((-p + 4095) / 4096);  // floor
  return int16_t(uint16_t(q & 0xFFFF));
}

int16_t div_oracle(int a, int b) {
  long long num = (long long)std::abs(a) * 4096, den = std::abs(b);
  long long q = den ? num / den : ((~(num >> 16)) & 0xFFFF);
  if ((a < 0) != (b < 0) && den) q = -q;
  if (!den && a < 0) q = -q;
  return int16_t(uint16_t(q & 0xFFFF));
}

}  // namespace

TEST_CASE("encode rounds to nearest and saturates") {
  CHECK(encode(1.0).raw == 4096);
  CHECK(encode(-1.0).raw == -4096);
  CHECK(encode(0.5 / 4096).raw == 0);  // ties to even
  CHECK(encode(1.5 / 4096).raw == 2);
  CHECK(encode(100.0).raw == 32767);
  CHECK(encode(-100.0).raw == -32768);
  CHECK(decode(Fixed16(int16_t(-32768))) == doctest::Approx(-8.0));
  for (int r = -32768; r < 32768; r += 97) CHECK(encode(decode(Fixed16(int16_t(r)))).raw == r);
}

TEST_CASE("add and sub wrap modulo 2^16") {
  CHECK(fx_add(Fixed16(32767), Fixed16(1)).raw == -32768);
  CHECK(fx_sub(Fixed16(-32768), Fixed16(1)).raw == 32767);
}

TEST_CASE("fx_mul matches floor oracle") {
  for (int a = -32768; a < 32768; a += 251)
    for (int b = -32768; b < 32768; b += 257) REQUIRE(fx_mul(Fixed16(int16_t(a)), Fixed16(int16_t(b))).raw == mul_oracle(a, b));
  CHECK(fx_mul(encode(1.5), encode(-2.0)).raw == encode(-3.0).raw);
  CHECK(fx_mul(Fixed16(-1), Fixed16(1)).raw == -1);  // floor, not toward zero
}

TEST_CASE("fx_div matches truncating oracle") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> d(-32768, 32767);
  for (int i = 0; i < 200000; ++i) {
    int a = d(rng), b = d(rng);
    REQUIRE(fx_div(Fixed16(int16_t(a)), Fixed16(int16_t(b))).raw == div_oracle(a, b));
  }
  CHECK(fx_div(encode(1.0), encode(2.0)).raw == 2048);
  CHECK(fx_div(encode(-3.0), encode(2.0)).raw == encode(-1.5).raw);
  CHECK(fx_div(Fixed16(0), Fixed16(0)).raw == -1);
  CHECK(fx_div(Fixed16(4096), Fixed16(0)).raw == div_oracle(4096, 0));
}

TEST_CASE("argmax keeps the lowest index on ties") {
  CHECK(fx_argmax({Fixed16(3), Fixed16(7), Fixed16(7), Fixed16(-1)}) == 1);
  CHECK(fx_argmax({Fixed16(-5)}) == 0);
}

TEST_CASE("activation reference accuracy") {
  // sweep at 2^-6 over [-8, 8)
  struct Row {
    const char* name;
    double bound;
  };
  const Row rows[] = {{"tanh:lut", 1.3e-4}, {"tanh:reduced", 2.5e-4},   {"tanh:pl", 2.0e-3}, {"tanh:cordic", 3.7e-4},
                      {"sigmoid:lut", 1.3e-4}, {"sigmoid:reduced", 2.5e-4}, {"sigmoid:pl", 4.1e-3}, {"sigmoid:cordic", 3.7e-4}};
  for (const auto& r : rows) {
    Activation a = parse_activation(r.name);
    double worst = 0;
    for (int k = -512; k < 512; ++k) {
      double x = k / 64.0;
      double ref = a.fn == ActFn::Tanh ? std::tanh(x) : 1 / (1 + std::exp(-x));
      worst = std::max(worst, std::abs(decode(act_eval(a, encode(x))) - ref));
    }
    INFO(r.name << " worst " << worst);
    CHECK(worst <= r.bound);
  }
}

TEST_CASE("odd and reflected symmetry") {
  for (const char* n : {"tanh:lut", "tanh:reduced", "tanh:pl", "tanh:cordic"}) {
    Activation a = parse_activation(n);
    CHECK(act_eval(a, Fixed16(0)).raw == 0);
    for (int r = 1; r < 32768; r += 37) CHECK(act_eval(a, Fixed16(int16_t(-r))).raw == -act_eval(a, Fixed16(int16_t(r))).raw);
  }
  for (const char* n : {"sigmoid:lut", "sigmoid:reduced", "sigmoid:pl", "sigmoid:cordic"}) {
    Activation a = parse_activation(n);
    CHECK(act_eval(a, Fixed16(0)).raw == 2048);
    for (int r = 1; r < 32768; r += 37)
      CHECK(act_eval(a, Fixed16(int16_t(-r))).raw == 4096 - act_eval(a, Fixed16(int16_t(r))).raw);
  }
}

TEST_CASE("activation names round trip") {
  for (const char* n : {"relu", "softmax", "tanh:lut", "sigmoid:cordic", "tanh:pl", "sigmoid:reduced"})
    CHECK(to_string(parse_activation(n)) == n);
  CHECK_THROWS(parse_activation("gelu"));
  CHECK_THROWS(parse_activation("tanh:foo"));
}
