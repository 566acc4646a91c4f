#include "gcinfer/activation.hpp"

#include <cmath>

#include "gcinfer/error.hpp"

namespace gcinfer {

namespace {

constexpr uint32_t kTanhB[] = {0, 1024, 1792, 2560, 3072, 3584, 4352, 5120, 6144, 7424, 9216, 12288};
constexpr uint32_t kTanhC[] = {0, 1009, 1693, 2275, 2605, 2890, 3227, 3481, 3714, 3890, 4013, 4083};
constexpr uint32_t kTanhM[] = {4037, 3640, 3124, 2640, 2253, 1808, 1348, 932, 563, 281, 93, 4};

constexpr uint32_t kSigB[] = {0, 3840, 7168, 11008, 16896};
constexpr uint32_t kSigC[] = {2048, 2960, 3506, 3851, 4043};
constexpr uint32_t kSigM[] = {973, 672, 369, 137, 17};

double f_of(ActFn fn, double x) {
  if (fn == ActFn::Tanh) return std::tanh(x);
  return 1.0 / (1.0 + std::exp(-x));
}

int32_t wrapw(int64_t v) {
  const int64_t m = int64_t(1) << cordic::kWidth;
  v &= m - 1;
  return int32_t(v >> (cordic::kWidth - 1) ? v - m : v);
}

int16_t reflect(ActFn fn, bool neg, int32_t y) {
  if (!neg) return wrap16(y);
  return fn == ActFn::Tanh ? wrap16(-y) : wrap16(4096 - y);
}

}  // namespace

Activation parse_activation(const std::string& s) {
  if (s == "relu") return {ActFn::ReLU, ActVariant::None};
  if (s == "softmax") return {ActFn::Softmax, ActVariant::None};
  auto colon = s.find(':');
  if (colon == std::string::npos) throw Error(Errc::UnsupportedLayer, "activation '" + s + "'");
  std::string f = s.substr(0, colon), v = s.substr(colon + 1);
  Activation a;
  if (f == "tanh") a.fn = ActFn::Tanh;
  else if (f == "sigmoid") a.fn = ActFn::Sigmoid;
  else throw Error(Errc::UnsupportedLayer, "activation '" + s + "'");
  if (v == "lut") a.variant = ActVariant::LUT;
  else if (v == "reduced") a.variant = ActVariant::Reduced;
  else if (v == "pl") a.variant = ActVariant::PiecewiseLinear;
  else if (v == "cordic") a.variant = ActVariant::CORDIC;
  else throw Error(Errc::UnsupportedLayer, "activation variant '" + s + "'");
  return a;
}

std::string to_string(Activation a) {
  switch (a.fn) {
    case ActFn::ReLU: return "relu";
    case ActFn::Softmax: return "softmax";
    default: break;
  }
  std::string f = a.fn == ActFn::Tanh ? "tanh:" : "sigmoid:";
  switch (a.variant) {
    case ActVariant::LUT: return f + "lut";
    case ActVariant::Reduced: return f + "reduced";
    case ActVariant::PiecewiseLinear: return f + "pl";
    case ActVariant::CORDIC: return f + "cordic";
    default: return f + "?";
  }
}

int32_t lut_half(ActFn fn, uint32_t u) {
  if (u > 32767) u = 32767;
  return int32_t(std::nearbyint(f_of(fn, u / 4096.0) * 4096.0));
}

int32_t reduced_half(ActFn fn, uint32_t w) { return int32_t(std::nearbyint(f_of(fn, w / 1024.0) * 4096.0)); }

PwlSegments pwl_segments(ActFn fn) {
  if (fn == ActFn::Tanh) return {kTanhB, kTanhC, kTanhM};
  return {kSigB, kSigC, kSigM};
}

int32_t pwl_half(ActFn fn, uint32_t u) {
  auto s = pwl_segments(fn);
  size_t k = 0;
  while (k + 1 < s.B.size() && u >= s.B[k + 1]) ++k;
  return int32_t(s.C[k] + ((s.M[k] * (u - s.B[k])) >> 12));
}

namespace cordic {

int32_t exp_neg(int32_t v) {
  int32_t q = (v + (v >> 1)) >> kFrac;
  int32_t r = v - kQLn2[q & 15];
  int32_t x = kX0, y = 0, z = r;
  for (int k = 0; k < kIters; ++k) {
    int i = kShift[k];
    if (z >= 0) {
      int32_t nx = wrapw(int64_t(x) + (y >> i)), ny = wrapw(int64_t(y) + (x >> i));
      x = nx, y = ny, z = wrapw(int64_t(z) - kAtanh[k]);
    } else {
      int32_t nx = wrapw(int64_t(x) - (y >> i)), ny = wrapw(int64_t(y) - (x >> i));
      x = nx, y = ny, z = wrapw(int64_t(z) + kAtanh[k]);
    }
  }
  int32_t e = wrapw(int64_t(x) - y);
  return e >> (q & 15);
}

uint32_t div_frac(int32_t num, int32_t den, int qbits) {
  int32_t r = num;
  uint32_t q = 0;
  for (int k = 0; k < qbits; ++k) {
    r = r >= 0 ? wrapw(2 * int64_t(r) - den) : wrapw(2 * int64_t(r) + den);
    q = (q << 1) | (r >= 0 ? 1u : 0u);
  }
  return q;
}

int32_t tanh_half(uint32_t u) {
  int32_t v = int32_t(u) << (kFrac - kFracBits + 1);
  if (v > kTanhVMax) v = kTanhVMax;
  int32_t e = exp_neg(v);
  int32_t num = (1 << kFrac) - e;
  if (num < 0) num = 0;
  int32_t den = (1 << kFrac) + e;
  uint32_t q = div_frac(num, den, kTanhQuotBits);
  return int32_t((q + 8) >> 4);
}

int32_t sigmoid_half(uint32_t u) {
  int32_t v = int32_t(u) << (kFrac - kFracBits);
  int32_t e = exp_neg(v);
  int32_t den = (1 << kFrac) + e;
  uint32_t q = div_frac(1 << (kFrac - 1), den, kSigQuotBits);
  return int32_t((q + 8) >> 4);
}

}  // namespace cordic

Fixed16 act_eval(Activation a, Fixed16 x) {
  switch (a.fn) {
    case ActFn::Softmax: return x;
    case ActFn::ReLU: return x.raw < 0 ? Fixed16() : x;
    default: break;
  }
  bool neg = x.raw < 0;
  uint32_t u = fx_abs_u(x.raw);
  int32_t y = 0;
  switch (a.variant) {
    case ActVariant::LUT: y = lut_half(a.fn, u); break;
    case ActVariant::Reduced: y = reduced_half(a.fn, (u > 32767 ? 32767 : u) >> 2); break;
    case ActVariant::PiecewiseLinear: y = pwl_half(a.fn, u); break;
    case ActVariant::CORDIC: y = a.fn == ActFn::Tanh ? cordic::tanh_half(u) : cordic::sigmoid_half(u); break;
    default: throw Error(Errc::UnsupportedLayer, "activation without variant");
  }
  return Fixed16(reflect(a.fn, neg, y));
}

}  // namespace gcinfer
