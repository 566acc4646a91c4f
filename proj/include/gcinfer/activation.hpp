#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "gcinfer/fixed.hpp"

namespace gcinfer {

enum class ActFn : uint8_t { ReLU, Tanh, Sigmoid, Softmax };
enum class ActVariant : uint8_t { None, LUT, Reduced, PiecewiseLinear, CORDIC };

struct Activation {
  ActFn fn = ActFn::ReLU;
  ActVariant variant = ActVariant::None;
  friend bool operator==(const Activation&, const Activation&) = default;
};

// "relu", "softmax", "tanh:lut", "sigmoid:cordic", ...
Activation parse_activation(const std::string& s);
std::string to_string(Activation a);

// Bit-exact plaintext model of the matching activation circuit.
// Softmax is the identity (argmax only needs a monotone map).
Fixed16 act_eval(Activation a, Fixed16 x);

// |x| as used by every symmetric variant: 0..32768
inline uint32_t fx_abs_u(int16_t raw) { return raw < 0 ? uint32_t(-int32_t(raw)) : uint32_t(raw); }

// Positive-half value for the table variants. LUT indexes u (clamped to
// 32767); Reduced indexes u >> 2.
int32_t lut_half(ActFn fn, uint32_t u);
int32_t reduced_half(ActFn fn, uint32_t w);

// Piecewise-linear segments on |x|: y = C[k] + floor(M[k] * (u - B[k]) / 4096)
struct PwlSegments {
  std::span<const uint32_t> B, C, M;
};
PwlSegments pwl_segments(ActFn fn);
int32_t pwl_half(ActFn fn, uint32_t u);

namespace cordic {
inline constexpr int kFrac = 18;
inline constexpr int kWidth = 22;
inline constexpr int kIters = 14;
inline constexpr std::array<int, kIters> kShift = {1, 2, 3, 4, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
inline constexpr std::array<int32_t, kIters> kAtanh = {143997, 66955, 32940, 16405, 16405, 8195, 4096,
                                                       2048,   1024,  512,   256,   128,   64,    32};
inline constexpr int32_t kX0 = 316538;  // 1/gain
inline constexpr std::array<int32_t, 16> kQLn2 = {0,       181704,  363409,  545113,  726817,  908522,
                                                  1090226, 1271931, 1453635, 1635339, 1817044, 1998748,
                                                  2180452, 2362157, 2543861, 2725566};
inline constexpr int32_t kTanhVMax = 10 << kFrac;
inline constexpr int kTanhQuotBits = 16;
inline constexpr int kSigQuotBits = 17;

// e^-v, v >= 0 at kFrac fraction bits, v < 16 ln2-ish range after clamping
int32_t exp_neg(int32_t v);
// non-restoring fractional divide, both >= 0 semantics as the circuit
uint32_t div_frac(int32_t num, int32_t den, int qbits);
int32_t tanh_half(uint32_t u);
int32_t sigmoid_half(uint32_t u);
}  // namespace cordic

}  // namespace gcinfer
