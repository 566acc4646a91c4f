#include "gcinfer/fixed.hpp"

#include <cmath>

namespace gcinfer {

Fixed16 encode(double v) {
  double s = std::nearbyint(v * 4096.0);  // default rounding mode: nearest-even
  if (!(s >= -32768.0)) s = -32768.0;       // also catches NaN
  if (s > 32767.0) s = 32767.0;
  return Fixed16(static_cast<int16_t>(s));
}

double decode(Fixed16 x) { return x.raw / 4096.0; }

Fixed16 fx_div(Fixed16 a, Fixed16 b) {
  int64_t A = std::abs(int64_t(a.raw)) << kFracBits;
  if (b.raw == 0) {
    int64_t q = ~(A >> 16) & 0xFFFF;
    return from_raw(a.raw < 0 ? -q : q);
  }
  int64_t B = std::abs(int64_t(b.raw));
  int64_t q = A / B;
  bool neg = (a.raw < 0) != (b.raw < 0);
  return from_raw(neg ? -q : q);
}

FxVec encode_all(const std::vector<double>& v) {
  FxVec out;
  out.reserve(v.size());
  for (double d : v) out.push_back(encode(d));
  return out;
}

std::vector<double> decode_all(const FxVec& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (auto x : v) out.push_back(decode(x));
  return out;
}

size_t fx_argmax(const FxVec& v) {
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[best].raw < v[i].raw) best = i;
  return best;
}

}  // namespace gcinfer
