#include "gcinfer/gclib.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>

#include "gcinfer/error.hpp"

namespace gcinfer {
namespace gc {

namespace {

Wire or_zero(Builder& b, Wire w) { return w == kNoWire ? b.zero() : w; }

void check_width(const Bits& x, const Bits& y) {
  if (x.size() != y.size() || x.empty()) throw Error(Errc::ShapeMismatch, "operand widths differ");
}

}  // namespace

AddOut add(Builder& b, const Bits& x, const Bits& y, Wire cin) {
  check_width(x, y);
  Wire c = or_zero(b, cin);
  AddOut r;
  r.sum.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    Wire t1 = b.XOR(x[i], c);
    Wire t2 = b.XOR(y[i], c);
    r.sum[i] = b.XOR(t1, y[i]);
    c = b.XOR(c, b.AND(t1, t2));
  }
  r.cout = c;
  return r;
}

Bits add_wrap(Builder& b, const Bits& x, const Bits& y, Wire cin) {
  check_width(x, y);
  Wire c = or_zero(b, cin);
  Bits s(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    Wire t1 = b.XOR(x[i], c);
    s[i] = b.XOR(t1, y[i]);
    if (i + 1 < x.size()) c = b.XOR(c, b.AND(t1, b.XOR(y[i], c)));
  }
  return s;
}

namespace {

// borrow chain of x - y; fills diff when asked
Wire borrow_chain(Builder& b, const Bits& x, const Bits& y, Bits* diff, bool last_borrow) {
  check_width(x, y);
  Wire bw = b.zero();
  if (diff) diff->resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    Wire t2 = b.XOR(y[i], bw);
    if (diff) (*diff)[i] = b.XOR(t2, x[i]);
    if (i + 1 < x.size() || last_borrow) bw = b.XOR(bw, b.AND(b.XNOR(x[i], bw), t2));
  }
  return bw;
}

}  // namespace

AddOut sub(Builder& b, const Bits& x, const Bits& y) {
  AddOut r;
  r.cout = borrow_chain(b, x, y, &r.sum, true);
  return r;
}

Bits sub_wrap(Builder& b, const Bits& x, const Bits& y) {
  Bits d;
  borrow_chain(b, x, y, &d, false);
  return d;
}

Wire lt_unsigned(Builder& b, const Bits& x, const Bits& y) { return borrow_chain(b, x, y, nullptr, true); }

Wire lt_signed(Builder& b, const Bits& x, const Bits& y) {
  Bits xf = x, yf = y;
  xf.back() = b.NOT(x.back());
  yf.back() = b.NOT(y.back());
  return lt_unsigned(b, xf, yf);
}

Wire ge_const(Builder& b, const Bits& x, uint64_t c) {
  if (x.size() < 64 && (c >> x.size())) return b.zero();
  return b.NOT(lt_unsigned(b, x, b.constant(c, x.size())));
}

Bits mux(Builder& b, Wire s, const Bits& x, const Bits& y) {
  check_width(x, y);
  Bits r(x.size());
  for (size_t i = 0; i < x.size(); ++i) r[i] = b.XOR(y[i], b.AND(s, b.XOR(x[i], y[i])));
  return r;
}

Bits cond_negate(Builder& b, const Bits& x, Wire s) {
  Bits r(x.size());
  Wire c = s;
  for (size_t i = 0; i < x.size(); ++i) {
    Wire t = b.XOR(x[i], s);
    r[i] = b.XOR(t, c);
    if (i + 1 < x.size()) c = b.AND(t, c);
  }
  return r;
}

Bits shr(Builder& b, const Bits& x, int k, bool arith) {
  Bits r(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    size_t j = i + size_t(k);
    r[i] = j < x.size() ? x[j] : (arith ? x.back() : b.zero());
  }
  return r;
}

Bits resize(Builder& b, const Bits& x, size_t n, bool sign_extend) {
  Bits r(n);
  for (size_t i = 0; i < n; ++i) r[i] = i < x.size() ? x[i] : (sign_extend ? x.back() : b.zero());
  return r;
}

Bits relu(Builder& b, const Bits& x) {
  Wire keep = b.NOT(x.back());
  Bits r(x.size());
  for (size_t i = 0; i + 1 < x.size(); ++i) r[i] = b.AND(x[i], keep);
  r.back() = b.zero();
  return r;
}

Bits compress_columns(Builder& b, std::vector<std::vector<Wire>> cols) {
  const size_t n = cols.size();
  Bits out(n);
  for (size_t k = 0; k < n; ++k) {
    std::deque<Wire> q;
    size_t ones = 0;
    for (Wire w : cols[k]) {
      int cv = b.const_value(w);
      if (cv == 0) continue;
      if (cv == 1) ++ones;
      else q.push_back(w);
    }
    bool last = k + 1 == n;
    if (!last)
      for (size_t p = 0; p < ones / 2; ++p) cols[k + 1].push_back(b.one());
    if (ones % 2) {
      if (q.empty()) q.push_back(b.one());
      else {
        // HA with a constant one costs nothing: sum = ~w, carry = w
        Wire w = q.front();
        q.pop_front();
        q.push_back(b.NOT(w));
        if (!last) cols[k + 1].push_back(w);
      }
    }
    if (last) {
      Wire s = b.zero();
      for (Wire w : q) s = b.XOR(s, w);
      out[k] = s;
      break;
    }
    while (q.size() > 1) {
      if (q.size() >= 3) {
        Wire x = q.front(); q.pop_front();
        Wire y = q.front(); q.pop_front();
        Wire c = q.front(); q.pop_front();
        Wire t1 = b.XOR(x, c), t2 = b.XOR(y, c);
        q.push_back(b.XOR(t1, y));
        cols[k + 1].push_back(b.XOR(c, b.AND(t1, t2)));
      } else {
        Wire x = q.front(); q.pop_front();
        Wire y = q.front(); q.pop_front();
        q.push_back(b.XOR(x, y));
        cols[k + 1].push_back(b.AND(x, y));
      }
    }
    out[k] = q.empty() ? b.zero() : q.front();
  }
  return out;
}

Bits mult_q312(Builder& b, const Bits& x, const Bits& y) {
  check_width(x, y);
  const size_t n = x.size();       // 16
  const size_t f = kFracBits;      // 12
  const size_t top = n + f;        // need product bits [f, n+f)
  std::vector<std::vector<Wire>> cols(top);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      size_t k = i + j;
      if (k >= top) continue;
      Wire w = b.AND(x[i], y[j]);
      if ((i == n - 1) != (j == n - 1)) w = b.NOT(w);
      cols[k].push_back(w);
    }
  // Baugh-Wooley correction 2^n (2^(2n-1) is beyond the kept columns)
  if (n < top) cols[n].push_back(b.one());
  Bits s = compress_columns(b, std::move(cols));
  return Bits(s.begin() + f, s.end());
}

Bits div_q312(Builder& b, const Bits& x, const Bits& y) {
  check_width(x, y);
  const size_t n = x.size();
  const size_t f = kFracBits;
  Wire sa = x.back(), sb = y.back();
  Bits A = cond_negate(b, x, sa);  // unsigned magnitude
  Bits M = cond_negate(b, y, sb);
  const size_t w = n + 1;
  Bits Mx = resize(b, M, w, false);
  Bits R(w, b.zero());
  Bits q(n);
  for (size_t step = n + f; step-- > 0;) {
    Wire dbit = step >= f ? A[step - f] : b.zero();
    Bits R2(w);
    R2[0] = dbit;
    for (size_t k = 1; k < w; ++k) R2[k] = R[k - 1];
    Wire ns = b.NOT(R.back());  // R >= 0 -> subtract
    Bits Ms(w);
    for (size_t k = 0; k < w; ++k) Ms[k] = b.XOR(Mx[k], ns);
    R = add_wrap(b, R2, Ms, ns);
    if (step < n) q[step] = b.NOT(R.back());
  }
  return cond_negate(b, q, b.XOR(sa, sb));
}

// ---------------------------------------------------------------------------
// tables

namespace {

using BitVec = std::vector<uint64_t>;

void mobius(BitVec& v, size_t nbits) {
  const size_t len = size_t(1) << nbits;
  static const uint64_t masks[6] = {0x5555555555555555ull, 0x3333333333333333ull, 0x0F0F0F0F0F0F0F0Full,
                                    0x00FF00FF00FF00FFull, 0x0000FFFF0000FFFFull, 0x00000000FFFFFFFFull};
  for (size_t s = 0; s < nbits; ++s) {
    size_t step = size_t(1) << s;
    if (step < 64) {
      for (auto& wd : v) wd ^= (wd & masks[s]) << step;
    } else {
      size_t ws = step / 64;
      for (size_t i = 0; i < v.size(); ++i)
        if ((i / ws) & 1) v[i] ^= v[i - ws];
    }
  }
  if (len < 64) v[0] &= (uint64_t(1) << len) - 1;
}

bool get(const BitVec& v, size_t i) { return (v[i >> 6] >> (i & 63)) & 1; }

std::string key_of(const BitVec& v) {
  return std::string(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(uint64_t));
}

struct Monomials {
  Builder& b;
  Bits vars;
  std::vector<Wire> memo;
  Monomials(Builder& bb, Bits v) : b(bb), vars(std::move(v)), memo(size_t(1) << vars.size(), kNoWire) {}
  Wire get(size_t S) {
    if (S == 0) return b.one();
    if (memo[S] != kNoWire) return memo[S];
    size_t hi = 63 - __builtin_clzll(S);
    size_t rest = S & ~(size_t(1) << hi);
    return memo[S] = rest ? b.AND(get(rest), vars[hi]) : vars[hi];
  }
  Wire xor_of(const BitVec& anf) {
    Wire acc = b.zero();
    for (size_t S = 0; S < memo.size(); ++S)
      if (::gcinfer::gc::get(anf, S)) acc = b.XOR(acc, get(S));
    return acc;
  }
};

struct SplitPlan {
  size_t H = 0;
  uint64_t cost = UINT64_MAX;
};

uint64_t plan_cost(const std::vector<uint32_t>& values, size_t n, size_t H, size_t out_bits) {
  const size_t L = n - H;
  const size_t nl = size_t(1) << L, nh = size_t(1) << H;
  const size_t words = (nl + 63) / 64;
  uint64_t cost = (L >= 2 ? nl - L - 1 : 0) + (H >= 2 && H > 0 ? nh - H - 1 : 0);
  for (size_t j = 0; j < out_bits; ++j) {
    std::unordered_map<std::string, int> groups;
    for (size_t h = 0; h < nh; ++h) {
      BitVec g(words, 0);
      for (size_t l = 0; l < nl; ++l)
        if ((values[(h << L) | l] >> j) & 1) g[l >> 6] |= uint64_t(1) << (l & 63);
      mobius(g, L);
      g[0] &= ~uint64_t(1);
      bool nz = false;
      for (auto wd : g) nz |= wd != 0;
      if (nz) groups.emplace(key_of(g), 0);
    }
    cost += groups.size();
  }
  return cost;
}

}  // namespace

Bits table(Builder& b, const Bits& idx, const std::vector<uint32_t>& values, size_t out_bits) {
  const size_t n = idx.size();
  if (values.size() != (size_t(1) << n)) throw Error(Errc::ShapeMismatch, "table size");
  SplitPlan best;
  for (size_t H = 0; H <= n; ++H) {
    uint64_t c = plan_cost(values, n, H, out_bits);
    if (c < best.cost) best = {H, c};
  }
  const size_t H = best.H, L = n - H;
  const size_t nl = size_t(1) << L, nh = size_t(1) << H;
  const size_t wl = (nl + 63) / 64, wh = (nh + 63) / 64;
  Monomials lo(b, Bits(idx.begin(), idx.begin() + L));
  Monomials hi(b, Bits(idx.begin() + L, idx.end()));
  std::unordered_map<std::string, Wire> g_cache;
  Bits out(out_bits);
  for (size_t j = 0; j < out_bits; ++j) {
    // group high values by normalised low sub-function
    std::unordered_map<std::string, std::pair<BitVec, BitVec>> groups;  // key -> (anf, indicator over h)
    std::vector<std::string> order;
    BitVec compl_ind(wh, 0);
    for (size_t h = 0; h < nh; ++h) {
      BitVec g(wl, 0);
      for (size_t l = 0; l < nl; ++l)
        if ((values[(h << L) | l] >> j) & 1) g[l >> 6] |= uint64_t(1) << (l & 63);
      mobius(g, L);
      if (g[0] & 1) {
        compl_ind[h >> 6] |= uint64_t(1) << (h & 63);
        g[0] &= ~uint64_t(1);
      }
      bool nz = false;
      for (auto wd : g) nz |= wd != 0;
      if (!nz) continue;
      auto k = key_of(g);
      auto it = groups.find(k);
      if (it == groups.end()) {
        order.push_back(k);
        it = groups.emplace(k, std::make_pair(g, BitVec(wh, 0))).first;
      }
      it->second.second[h >> 6] |= uint64_t(1) << (h & 63);
    }
    Wire acc = b.zero();
    for (const auto& k : order) {
      auto& [anf, ind] = groups[k];
      auto gc = g_cache.find(k);
      Wire gw = gc != g_cache.end() ? gc->second : (g_cache[k] = lo.xor_of(anf));
      mobius(ind, H);
      acc = b.XOR(acc, b.AND(hi.xor_of(ind), gw));
    }
    mobius(compl_ind, H);
    acc = b.XOR(acc, hi.xor_of(compl_ind));
    out[j] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// activations

CordicOut cordic_hyperbolic(Builder& b, const Bits& z0) {
  using namespace cordic;
  const size_t W = kWidth;
  if (z0.size() != W) throw Error(Errc::ShapeMismatch, "cordic input width");
  // first iteration with y0 = 0: x stays X0, y = +-X0/2
  Wire s = z0.back();
  Bits x = b.constant(uint64_t(kX0), W);
  Bits y(W);
  {
    const int64_t m = int64_t(1) << W;
    uint64_t pos = uint64_t(kX0 >> kShift[0]) & (m - 1);
    uint64_t neg = uint64_t(-int64_t(kX0 >> kShift[0])) & (m - 1);
    for (size_t i = 0; i < W; ++i) {
      bool p = (pos >> i) & 1, q = (neg >> i) & 1;
      y[i] = p == q ? b.constant(p) : (q ? s : b.NOT(s));
    }
  }
  Wire ns = b.NOT(s);
  Bits a0 = b.constant(uint64_t(kAtanh[0]), W);
  Bits az(W);
  for (size_t i = 0; i < W; ++i) az[i] = b.XOR(a0[i], ns);
  Bits z = add_wrap(b, z0, az, ns);
  for (int k = 1; k < kIters; ++k) {
    int sh = kShift[k];
    s = z.back();
    ns = b.NOT(s);
    Bits ys = shr(b, y, sh, true), xs = shr(b, x, sh, true);
    Bits yx(W), xy(W), ak(W);
    Bits a = b.constant(uint64_t(kAtanh[k]), W);
    for (size_t i = 0; i < W; ++i) {
      yx[i] = b.XOR(ys[i], s);
      xy[i] = b.XOR(xs[i], s);
      ak[i] = b.XOR(a[i], ns);
    }
    Bits nx = add_wrap(b, x, yx, s);
    Bits ny = add_wrap(b, y, xy, s);
    z = add_wrap(b, z, ak, ns);
    x = std::move(nx), y = std::move(ny);
  }
  return {x, y};
}

namespace {

// e^-v for v unsigned with cordic::kFrac fraction bits (vw bits wide)
Bits exp_neg(Builder& b, const Bits& v) {
  using namespace cordic;
  const size_t W = kWidth;
  Bits v23 = resize(b, v, W + 1, false);
  Bits v15 = add_wrap(b, v23, shr(b, v23, 1, false));
  Bits q(v15.begin() + kFrac, v15.begin() + kFrac + 4);
  std::vector<uint32_t> lnv(16);
  for (int i = 0; i < 16; ++i) lnv[i] = uint32_t(kQLn2[i]);
  Bits qln2 = table(b, q, lnv, W);
  Bits r = sub_wrap(b, resize(b, v, W, false), qln2);
  auto co = cordic_hyperbolic(b, r);
  Bits e = sub_wrap(b, co.x, co.y);
  for (int k = 0; k < 4; ++k) e = mux(b, q[k], shr(b, e, 1 << k, false), e);
  return e;
}

// non-restoring fraction divide, same steps as cordic::div_frac
Bits div_frac(Builder& b, const Bits& num, const Bits& den, int qbits) {
  const size_t W = num.size();
  Bits r = num;
  Bits q(qbits);
  for (int k = 0; k < qbits; ++k) {
    Wire ns = b.NOT(r.back());  // r >= 0 -> subtract
    Bits r2(W);
    r2[0] = b.zero();
    for (size_t i = 1; i < W; ++i) r2[i] = r[i - 1];
    Bits d(W);
    for (size_t i = 0; i < W; ++i) d[i] = b.XOR(den[i], ns);
    r = add_wrap(b, r2, d, ns);
    q[qbits - 1 - k] = b.NOT(r.back());
  }
  return q;
}

// (q + 8) >> 4, 13 bits
Bits round_q(Builder& b, const Bits& q) {
  Bits hi(q.begin() + 3, q.end());
  hi.push_back(b.zero());
  Bits inc = b.constant(1, hi.size());
  Bits s = add_wrap(b, hi, inc);
  return Bits(s.begin() + 1, s.end());
}

Bits cordic_tanh_half(Builder& b, const Bits& u) {
  using namespace cordic;
  const size_t W = kWidth;
  // v = 2u at kFrac fraction bits, clamped
  Bits v(W + 1);
  const int sh = kFrac - kFracBits + 1;
  for (size_t i = 0; i < W + 1; ++i) v[i] = (i >= size_t(sh) && i - sh < u.size()) ? u[i - sh] : b.zero();
  Wire over = ge_const(b, v, uint64_t(kTanhVMax) + 1);
  v = mux(b, over, b.constant(uint64_t(kTanhVMax), W + 1), v);
  Bits e = exp_neg(b, Bits(v.begin(), v.begin() + W));
  Bits one = b.constant(uint64_t(1) << kFrac, W);
  Bits num = sub_wrap(b, one, e);
  Wire keep = b.NOT(num.back());
  for (auto& w : num) w = b.AND(w, keep);
  Bits den = add_wrap(b, one, e);
  Bits q = div_frac(b, num, den, kTanhQuotBits);
  return round_q(b, q);
}

Bits cordic_sigmoid_half(Builder& b, const Bits& u) {
  using namespace cordic;
  const size_t W = kWidth;
  Bits v(W);
  const int sh = kFrac - kFracBits;
  for (size_t i = 0; i < W; ++i) v[i] = (i >= size_t(sh) && i - sh < u.size()) ? u[i - sh] : b.zero();
  Bits e = exp_neg(b, v);
  Bits one = b.constant(uint64_t(1) << kFrac, W);
  Bits den = add_wrap(b, one, e);
  Bits q = div_frac(b, b.constant(uint64_t(1) << (kFrac - 1), W), den, kSigQuotBits);
  return round_q(b, q);
}

Bits clamp15(Builder& b, const Bits& u) {
  Bits r(15);
  for (size_t i = 0; i < 15; ++i) r[i] = b.OR(u[i], u[15]);
  return r;
}

Bits table_half(Builder& b, ActFn fn, ActVariant v, const Bits& u) {
  if (v == ActVariant::LUT) {
    std::vector<uint32_t> vals(1u << 15);
    for (uint32_t i = 0; i < vals.size(); ++i) vals[i] = uint32_t(lut_half(fn, i));
    return table(b, clamp15(b, u), vals, 13);
  }
  Bits c = clamp15(b, u);
  Bits w(c.begin() + 2, c.end());  // 13 bits
  if (fn == ActFn::Sigmoid) {
    std::vector<uint32_t> vals(1u << 13);
    for (uint32_t i = 0; i < vals.size(); ++i) vals[i] = uint32_t(reduced_half(fn, i));
    return table(b, w, vals, 13);
  }
  // tanh: 12-bit table below 4.0, comparator staircase above
  std::vector<uint32_t> vals(1u << 12);
  for (uint32_t i = 0; i < vals.size(); ++i) vals[i] = uint32_t(reduced_half(fn, i));
  Bits t = table(b, Bits(w.begin(), w.begin() + 12), vals, 13);
  std::vector<std::pair<uint32_t, uint32_t>> steps;  // (threshold, level)
  uint32_t base = uint32_t(reduced_half(fn, 4096));
  for (uint32_t i = 4097; i < 8192; ++i) {
    uint32_t lv = uint32_t(reduced_half(fn, i));
    if (lv != (steps.empty() ? base : steps.back().second)) steps.push_back({i, lv});
  }
  std::vector<Wire> ge;
  for (auto& st : steps) ge.push_back(ge_const(b, w, st.first));
  Bits stair(13);
  for (size_t bit = 0; bit < 13; ++bit) {
    Wire acc = b.zero();
    // one-hot ranges: r0 = ~ge0, rk = ge(k-1) ^ ge(k), rlast = ge(last)
    for (size_t k = 0; k <= steps.size(); ++k) {
      uint32_t lv = k == 0 ? base : steps[k - 1].second;
      if (!((lv >> bit) & 1)) continue;
      Wire lo = k == 0 ? b.one() : ge[k - 1];
      Wire hi = k < steps.size() ? ge[k] : b.zero();
      acc = b.XOR(acc, b.XOR(lo, hi));
    }
    stair[bit] = acc;
  }
  return mux(b, w[12], stair, t);
}

Bits pwl_half_circuit(Builder& b, ActFn fn, const Bits& u) {
  auto seg = pwl_segments(fn);
  const size_t S = seg.B.size();
  std::vector<Wire> ge(S + 1);
  ge[0] = b.one();
  ge[S] = b.zero();
  for (size_t k = 1; k < S; ++k) ge[k] = ge_const(b, u, seg.B[k]);
  std::vector<Wire> sel(S);
  for (size_t k = 0; k < S; ++k) sel[k] = b.XOR(ge[k], ge[k + 1]);
  auto pick = [&](std::span<const uint32_t> vals, size_t width) {
    Bits r(width);
    for (size_t i = 0; i < width; ++i) {
      Wire acc = b.zero();
      for (size_t k = 0; k < S; ++k)
        if ((vals[k] >> i) & 1) acc = b.XOR(acc, sel[k]);
      r[i] = acc;
    }
    return r;
  };
  Bits bsel = pick(seg.B, 16), csel = pick(seg.C, 16), msel = pick(seg.M, 12);
  Bits t = sub_wrap(b, u, bsel);
  // floor(m * t / 4096), unsigned 12 x 16, result < 2^13
  const size_t top = 12 + 13;
  std::vector<std::vector<Wire>> cols(top);
  for (size_t i = 0; i < 12; ++i)
    for (size_t j = 0; j < 16; ++j)
      if (i + j < top) cols[i + j].push_back(b.AND(msel[i], t[j]));
  Bits p = compress_columns(b, std::move(cols));
  Bits hi(p.begin() + 12, p.end());
  hi.resize(16, b.zero());
  return add_wrap(b, csel, hi);
}

Bits reflect(Builder& b, ActFn fn, Wire s, const Bits& y_half) {
  Bits y = resize(b, y_half, 16, false);
  if (fn == ActFn::Tanh) return cond_negate(b, y, s);
  // s ? 4096 - y : y  ==  (y ^ s) + (s ? 4097 : 0)
  Bits t(16), k(16);
  for (size_t i = 0; i < 16; ++i) {
    t[i] = b.XOR(y[i], s);
    k[i] = (i == 0 || i == 12) ? s : b.zero();
  }
  return add_wrap(b, t, k);
}

}  // namespace

Bits activation(Builder& b, Activation a, const Bits& x) {
  if (x.size() != 16) throw Error(Errc::ShapeMismatch, "activation expects 16-bit input");
  switch (a.fn) {
    case ActFn::Softmax: return x;
    case ActFn::ReLU: return relu(b, x);
    default: break;
  }
  Wire s = x.back();
  Bits u = cond_negate(b, x, s);
  Bits half;
  switch (a.variant) {
    case ActVariant::LUT:
    case ActVariant::Reduced: half = table_half(b, a.fn, a.variant, u); break;
    case ActVariant::PiecewiseLinear: half = pwl_half_circuit(b, a.fn, u); break;
    case ActVariant::CORDIC:
      half = a.fn == ActFn::Tanh ? cordic_tanh_half(b, u) : cordic_sigmoid_half(b, u);
      break;
    default: throw Error(Errc::UnsupportedLayer, "activation without variant");
  }
  return reflect(b, a.fn, s, half);
}

size_t argmax_index_bits(size_t n) {
  size_t k = 0;
  while ((size_t(1) << k) < n) ++k;
  return std::max<size_t>(k, 1);
}

Bits argmax(Builder& b, const std::vector<Bits>& v) {
  if (v.empty()) throw Error(Errc::ShapeMismatch, "argmax of nothing");
  const size_t ib = argmax_index_bits(v.size());
  Bits best = v[0];
  Bits idx = b.constant(0, ib);
  for (size_t k = 1; k < v.size(); ++k) {
    Wire c = lt_signed(b, best, v[k]);  // strict: ties keep the left one
    if (k + 1 < v.size()) best = mux(b, c, v[k], best);
    idx = mux(b, c, b.constant(k, ib), idx);
  }
  return idx;
}

std::vector<Bits> matvec(Builder& b, const std::vector<Bits>& z, const std::vector<Bits>& w,
                         const std::vector<Bits>& bias) {
  const size_t m = z.size();
  if (m == 0 || w.size() % m) throw Error(Errc::ShapeMismatch, "matvec weight count");
  const size_t n = w.size() / m;
  std::vector<Bits> out(n);
  for (size_t i = 0; i < n; ++i) {
    Bits acc;
    for (size_t j = 0; j < m; ++j) {
      const Bits& wij = w[i * m + j];
      if (wij.empty()) continue;
      Bits p = mult_q312(b, wij, z[j]);
      acc = acc.empty() ? p : add(b, acc, p).sum;
    }
    if (!bias.empty()) acc = acc.empty() ? bias[i] : add(b, acc, bias[i]).sum;
    out[i] = acc.empty() ? b.constant(0, 16) : acc;
  }
  return out;
}

}  // namespace gc

// ---------------------------------------------------------------------------
// component handles

namespace {

struct HandleBuilder {
  Builder b;
  ComponentHandle h;
  Bits in(const std::string& name, Party p, size_t n) {
    Bits w = b.inputs(p, n);
    h.inputs[name] = w;
    return w;
  }
  void out(const std::string& name, const Bits& w) {
    Bits idx;
    for (auto x : w) idx.push_back(b.output(x));
    h.outputs[name] = idx;
  }
  ComponentHandle done() {
    h.declared = b.stats();
    h.netlist = b.finish();
    return std::move(h);
  }
};

}  // namespace

PortBits encode_ports(const ComponentHandle& h, const std::map<std::string, uint64_t>& values) {
  auto s = make_schedule(h.netlist);
  PortBits pb;
  pb.g.assign(s.n_garbler, 0);
  pb.e.assign(s.n_evaluator, 0);
  std::unordered_map<Wire, size_t> slot_of;
  for (size_t i = 0; i < h.netlist.inputs.size(); ++i) slot_of[h.netlist.inputs[i].wire] = i;
  for (const auto& [name, wires] : h.inputs) {
    auto it = values.find(name);
    uint64_t v = it == values.end() ? 0 : it->second;
    for (size_t k = 0; k < wires.size(); ++k) {
      size_t i = slot_of.at(wires[k]);
      auto& dst = h.netlist.inputs[i].party == Party::Garbler ? pb.g : pb.e;
      dst[s.slot_rank[i]] = uint8_t((v >> k) & 1);
    }
  }
  return pb;
}

uint64_t read_port(const ComponentHandle& h, const std::vector<uint8_t>& out, const std::string& name) {
  uint64_t v = 0;
  const auto& idx = h.outputs.at(name);
  for (size_t k = 0; k < idx.size(); ++k) v |= uint64_t(out.at(idx[k]) & 1) << k;
  return v;
}

ComponentHandle build_add(size_t n) {
  HandleBuilder hb;
  auto a = hb.in("a", Party::Garbler, n), c = hb.in("b", Party::Evaluator, n);
  auto r = gc::add(hb.b, a, c);
  hb.out("sum", r.sum);
  hb.out("cout", {r.cout});
  auto h = hb.done();
  h.declared = {1 + 4 * (n - 1), n};
  return h;
}

ComponentHandle build_sub(size_t n) {
  HandleBuilder hb;
  auto a = hb.in("a", Party::Garbler, n), c = hb.in("b", Party::Evaluator, n);
  auto r = gc::sub(hb.b, a, c);
  hb.out("diff", r.sum);
  hb.out("borrow", {r.cout});
  auto h = hb.done();
  h.declared = {2 + 4 * (n - 1), n};
  return h;
}

ComponentHandle build_mult_truncated(size_t n, size_t frac) {
  if (n != 16 || frac != size_t(kFracBits)) throw Error(Errc::InvalidArgument, "only Q3.12 multiply");
  HandleBuilder hb;
  auto a = hb.in("a", Party::Garbler, n), c = hb.in("b", Party::Evaluator, n);
  hb.out("p", gc::mult_q312(hb.b, a, c));
  return hb.done();
}

ComponentHandle build_div(size_t n, size_t frac) {
  if (n != 16 || frac != size_t(kFracBits)) throw Error(Errc::InvalidArgument, "only Q3.12 divide");
  HandleBuilder hb;
  auto a = hb.in("a", Party::Garbler, n), c = hb.in("b", Party::Evaluator, n);
  hb.out("q", gc::div_q312(hb.b, a, c));
  return hb.done();
}

ComponentHandle build_cmp(size_t n) {
  HandleBuilder hb;
  auto a = hb.in("a", Party::Garbler, n), c = hb.in("b", Party::Evaluator, n);
  hb.out("lt", {gc::lt_signed(hb.b, a, c)});
  auto h = hb.done();
  h.declared.nonxor_count = n;
  return h;
}

ComponentHandle build_mux(size_t n) {
  HandleBuilder hb;
  auto s = hb.in("s", Party::Garbler, 1);
  auto a = hb.in("a", Party::Garbler, n), c = hb.in("b", Party::Evaluator, n);
  hb.out("y", gc::mux(hb.b, s[0], a, c));
  auto h = hb.done();
  h.declared = {2 * n, n};
  return h;
}

ComponentHandle build_relu() {
  HandleBuilder hb;
  auto x = hb.in("x", Party::Garbler, 16);
  hb.out("y", gc::relu(hb.b, x));
  auto h = hb.done();
  h.declared = {1, 15};
  return h;
}

static ComponentHandle build_act(Activation a) {
  HandleBuilder hb;
  auto x = hb.in("x", Party::Garbler, 16);
  hb.out("y", gc::activation(hb.b, a, x));
  return hb.done();
}

ComponentHandle build_tanh(ActVariant v) { return build_act({ActFn::Tanh, v}); }
ComponentHandle build_sigmoid(ActVariant v) { return build_act({ActFn::Sigmoid, v}); }

ComponentHandle build_cordic_hyperbolic(size_t precision_bits) {
  if (precision_bits != 12) throw Error(Errc::InvalidArgument, "CORDIC is built for 12-bit precision");
  HandleBuilder hb;
  auto z = hb.in("z", Party::Garbler, cordic::kWidth);
  auto r = gc::cordic_hyperbolic(hb.b, z);
  hb.out("cosh", r.x);
  hb.out("sinh", r.y);
  return hb.done();
}

ComponentHandle build_argmax(size_t n, size_t n_bits) {
  HandleBuilder hb;
  std::vector<Bits> v;
  for (size_t i = 0; i < n; ++i)
    v.push_back(hb.in("v" + std::to_string(i), i % 2 ? Party::Evaluator : Party::Garbler, n_bits));
  hb.out("index", gc::argmax(hb.b, v));
  return hb.done();
}

ComponentHandle build_matvec(size_t m, size_t n, const std::vector<uint8_t>& mask) {
  if (!mask.empty() && mask.size() != m * n) throw Error(Errc::ShapeMismatch, "matvec mask");
  HandleBuilder hb;
  std::vector<Bits> z, w(m * n);
  for (size_t j = 0; j < m; ++j) z.push_back(hb.in("z" + std::to_string(j), Party::Garbler, 16));
  for (size_t k = 0; k < m * n; ++k)
    if (mask.empty() || mask[k]) w[k] = hb.in("w" + std::to_string(k), Party::Evaluator, 16);
  auto y = gc::matvec(hb.b, z, w);
  for (size_t i = 0; i < n; ++i) hb.out("y" + std::to_string(i), y[i]);
  auto h = hb.done();
  // (MULT + 16) per kept weight, minus one ADD per non-empty row
  auto mh = build_mult_truncated();
  uint64_t kept = 0, rows = 0;
  for (size_t i = 0; i < n; ++i) {
    uint64_t r = 0;
    for (size_t j = 0; j < m; ++j) r += (mask.empty() || mask[i * m + j]) ? 1 : 0;
    kept += r;
    rows += r ? 1 : 0;
  }
  h.declared.nonxor_count = (mh.declared.nonxor_count + 16) * kept - 16 * rows;
  return h;
}

}  // namespace gcinfer
