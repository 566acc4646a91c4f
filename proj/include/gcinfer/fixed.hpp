#pragma once

#include <cstdint>
#include <vector>

namespace gcinfer {

inline constexpr int kFracBits = 12;
inline constexpr int kWordBits = 16;

// Q3.12, raw two's-complement
struct Fixed16 {
  int16_t raw = 0;
  constexpr Fixed16() = default;
  constexpr explicit Fixed16(int16_t r) : raw(r) {}
  friend constexpr bool operator==(Fixed16 a, Fixed16 b) { return a.raw == b.raw; }
};

constexpr int16_t wrap16(int64_t v) { return static_cast<int16_t>(static_cast<uint16_t>(v & 0xFFFF)); }
constexpr Fixed16 from_raw(int64_t r) { return Fixed16(wrap16(r)); }

Fixed16 encode(double v);
double decode(Fixed16 x);

constexpr Fixed16 fx_add(Fixed16 a, Fixed16 b) { return from_raw(int32_t(a.raw) + b.raw); }
constexpr Fixed16 fx_sub(Fixed16 a, Fixed16 b) { return from_raw(int32_t(a.raw) - b.raw); }
constexpr Fixed16 fx_mul(Fixed16 a, Fixed16 b) {
  int32_t p = int32_t(a.raw) * int32_t(b.raw);
  return from_raw(p >> kFracBits);
}
// (a * 2^12) / b truncated toward zero, wrapped. For b == 0 the result is what
// the non-restoring divider yields: q = ~((|a| << 12) >> 16) & 0xFFFF, negated
// when a < 0.
Fixed16 fx_div(Fixed16 a, Fixed16 b);

using FxVec = std::vector<Fixed16>;

FxVec encode_all(const std::vector<double>& v);
std::vector<double> decode_all(const FxVec& v);

// lowest index wins ties
size_t fx_argmax(const FxVec& v);

}  // namespace gcinfer
