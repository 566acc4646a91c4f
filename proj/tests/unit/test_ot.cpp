#include <cmath>
#include <random>

#include "doctest.h"
#include "gcinfer/error.hpp"
#include "gcinfer/ot.hpp"

using namespace gcinfer;

namespace {

std::vector<OtPair> random_pairs(size_t n, std::mt19937_64& rng) {
  std::vector<OtPair> p(n);
  for (auto& q : p) q = {Block::from_u64(rng(), rng()), Block::from_u64(rng(), rng())};
  return p;
}

// chi-squared statistic of two byte histograms against their pooled distribution
double chi2_two_sample(const std::vector<uint8_t>& x, const std::vector<uint8_t>& y) {
  std::array<double, 256> hx{}, hy{};
  for (auto v : x) hx[v] += 1;
  for (auto v : y) hy[v] += 1;
  const double nx = double(x.size()), ny = double(y.size());
  double chi = 0;
  for (int b = 0; b < 256; ++b) {
    double tot = hx[b] + hy[b];
    if (tot == 0) continue;
    double ex = tot * nx / (nx + ny), ey = tot * ny / (nx + ny);
    chi += (hx[b] - ex) * (hx[b] - ex) / ex + (hy[b] - ey) * (hy[b] - ey) / ey;
  }
  return chi;
}

}  // namespace

TEST_CASE("single transfers pick the chosen message") {
  Block A = Block::from_u64(1, 2), B = Block::from_u64(3, 4);
  for (auto mode : {OtMode::Secure, OtMode::TestDealer}) {
    CHECK(ot_run_local(mode, {{A, B}}, {1}) == std::vector<Block>{B});
    CHECK(ot_run_local(mode, {{A, B}}, {0}) == std::vector<Block>{A});
  }
}

TEST_CASE("random batches agree across modes and with the serial path") {
  std::mt19937_64 rng(31);
  auto pairs = random_pairs(16 * 64, rng);
  std::vector<uint8_t> ch(pairs.size());
  for (auto& c : ch) c = rng() & 1;
  std::vector<Block> want(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) want[i] = pairs[i][ch[i]];
  CHECK(ot_run_local(OtMode::Secure, pairs, ch, true) == want);
  CHECK(ot_run_local(OtMode::Secure, pairs, ch, false) == want);
  CHECK(ot_run_local(OtMode::TestDealer, pairs, ch) == want);
}

TEST_CASE("size mismatches and bad group elements are rejected") {
  std::mt19937_64 rng(32);
  auto pairs = random_pairs(4, rng);
  CHECK_THROWS_AS(ot_run_local(OtMode::Secure, pairs, {0, 1}), Error);
  OtSender s(OtMode::Secure);
  OtReceiver r(OtMode::Secure);
  auto first = s.first_message();
  auto bad = first;
  for (size_t i = 4; i < bad.size(); ++i) bad[i] = 0xff;
  try {
    r.choose(bad, {0, 1, 1, 0});
    FAIL("expected GroupElementInvalid");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::GroupElementInvalid);
  }
  auto msg = r.choose(first, {0, 1, 1, 0});
  try {
    s.respond(msg, random_pairs(3, rng));
    FAIL("expected BatchSizeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BatchSizeMismatch);
  }
  auto zeroed = msg;
  std::fill(zeroed.begin() + 4, zeroed.begin() + 36, 0);  // identity point
  CHECK_THROWS_AS(s.respond(zeroed, pairs), Error);
}

TEST_CASE("receiver messages look the same for all-zero and all-one choices") {
  // 1000 transfers each; 255 degrees of freedom, reject only far in the tail
  auto collect = [](uint8_t c) {
    OtSender s(OtMode::Secure);
    OtReceiver r(OtMode::Secure);
    auto msg = r.choose(s.first_message(), std::vector<uint8_t>(1000, c));
    return std::vector<uint8_t>(msg.begin() + 4, msg.end());
  };
  double chi = chi2_two_sample(collect(0), collect(1));
  MESSAGE("chi2 = " << chi);
  CHECK(chi < 400.0);
}
