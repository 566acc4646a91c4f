#include "gcinfer/ot.hpp"

#include <sodium.h>

#include <atomic>
#include <cstring>

#include "gcinfer/error.hpp"

namespace gcinfer {

namespace {

void ensure_sodium() {
  static const int ok = sodium_init();
  if (ok < 0) throw Error(Errc::ChannelError, "libsodium failed to initialise");
}

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  for (int s = 24; s >= 0; s -= 8) v.push_back(uint8_t(x >> s));
}

// count header + records of `rec` bytes
uint32_t read_header(std::span<const uint8_t> m, size_t rec, const char* what) {
  if (m.size() < 4) throw Error(Errc::ChannelError, std::string(what) + ": truncated");
  uint32_t n = (uint32_t(m[0]) << 24) | (uint32_t(m[1]) << 16) | (uint32_t(m[2]) << 8) | m[3];
  if (m.size() != 4 + size_t(n) * rec) throw Error(Errc::ChannelError, std::string(what) + ": bad length");
  return n;
}

Block pad(uint64_t i, const uint8_t* A, const uint8_t* B, const uint8_t* P) {
  static const char tag[] = "gcinfer-ot";
  uint8_t idx[8], out[16];
  for (int k = 0; k < 8; ++k) idx[k] = uint8_t(i >> (8 * k));
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, sizeof out);
  crypto_generichash_update(&st, reinterpret_cast<const uint8_t*>(tag), sizeof tag - 1);
  crypto_generichash_update(&st, idx, 8);
  crypto_generichash_update(&st, A, 32);
  crypto_generichash_update(&st, B, 32);
  crypto_generichash_update(&st, P, 32);
  crypto_generichash_final(&st, out, sizeof out);
  return Block::load(out);
}

// run body(i) for i < n, collecting the first failure instead of throwing inside OpenMP
template <class F>
void for_each(size_t n, bool parallel, F body) {
  std::atomic<int> fail{-1};
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(n); ++i)
      if (!body(size_t(i))) {
        int e = -1;
        fail.compare_exchange_strong(e, int(i));
      }
  } else {
    for (size_t i = 0; i < n && fail < 0; ++i)
      if (!body(i)) fail = int(i);
  }
  if (fail >= 0) throw Error(Errc::GroupElementInvalid, "transfer " + std::to_string(fail.load()));
}

}  // namespace

const char* to_string(OtMode m) { return m == OtMode::Secure ? "secure" : "test-dealer"; }

OtMode parse_ot_mode(const std::string& s) {
  if (s == "secure") return OtMode::Secure;
  if (s == "test-dealer") return OtMode::TestDealer;
  throw Error(Errc::InvalidArgument, "unknown OT mode '" + s + "'");
}

OtSender::OtSender(OtMode mode) : mode_(mode) { ensure_sodium(); }
OtSender::~OtSender() {
  sodium_memzero(a_.data(), a_.size());
  sodium_memzero(aA_.data(), aA_.size());
}

std::vector<uint8_t> OtSender::first_message() {
  std::vector<uint8_t> m;
  if (mode_ == OtMode::TestDealer) {
    put_u32(m, 0);
    return m;
  }
  crypto_core_ristretto255_scalar_random(a_.data());
  if (crypto_scalarmult_ristretto255_base(A_.data(), a_.data()) != 0 ||
      crypto_scalarmult_ristretto255(aA_.data(), a_.data(), A_.data()) != 0)
    throw Error(Errc::GroupElementInvalid, "sender key");
  put_u32(m, 1);
  m.insert(m.end(), A_.begin(), A_.end());
  return m;
}

std::vector<uint8_t> OtSender::respond(std::span<const uint8_t> msg, const std::vector<OtPair>& pairs, bool parallel) {
  const size_t rec = mode_ == OtMode::Secure ? kPointBytes : 1;
  const uint32_t n = read_header(msg, rec, "OT receiver message");
  if (n != pairs.size())
    throw Error(Errc::BatchSizeMismatch,
                "receiver asked for " + std::to_string(n) + " transfers, sender has " + std::to_string(pairs.size()));
  std::vector<uint8_t> out;
  put_u32(out, n);
  out.resize(4 + size_t(n) * 32);
  uint8_t* o = out.data() + 4;
  const uint8_t* in = msg.data() + 4;
  if (mode_ == OtMode::TestDealer) {
    for (size_t i = 0; i < n; ++i) {
      const uint8_t c = in[i] & 1;
      pairs[i][c].store(o + 32 * i + 16 * c);
    }
    return out;
  }
  for_each(n, parallel, [&](size_t i) {
    const uint8_t* B = in + 32 * i;
    uint8_t P0[32], P1[32];
    if (!crypto_core_ristretto255_is_valid_point(B)) return false;
    if (crypto_scalarmult_ristretto255(P0, a_.data(), B) != 0) return false;
    // a(B - A) = aB - aA
    crypto_core_ristretto255_sub(P1, P0, aA_.data());
    if (sodium_is_zero(P1, 32)) return false;
    (pairs[i][0] ^ pad(i, A_.data(), B, P0)).store(o + 32 * i);
    (pairs[i][1] ^ pad(i, A_.data(), B, P1)).store(o + 32 * i + 16);
    return true;
  });
  return out;
}

OtReceiver::OtReceiver(OtMode mode) : mode_(mode) { ensure_sodium(); }
OtReceiver::~OtReceiver() {
  for (auto& b : b_) sodium_memzero(b.data(), b.size());
}

std::vector<uint8_t> OtReceiver::choose(std::span<const uint8_t> first, const std::vector<uint8_t>& choices,
                                        bool parallel) {
  choices_ = choices;
  std::vector<uint8_t> out;
  put_u32(out, uint32_t(choices.size()));
  if (mode_ == OtMode::TestDealer) {
    if (read_header(first, kPointBytes, "OT sender key") != 0) throw Error(Errc::ProtocolViolation, "OT mode mismatch");
    for (auto c : choices) out.push_back(c & 1);
    return out;
  }
  if (read_header(first, kPointBytes, "OT sender key") != 1) throw Error(Errc::ProtocolViolation, "OT mode mismatch");
  std::memcpy(A_.data(), first.data() + 4, 32);
  if (!crypto_core_ristretto255_is_valid_point(A_.data())) throw Error(Errc::GroupElementInvalid, "sender key");
  const size_t n = choices.size();
  b_.assign(n, {});
  B_.assign(n, {});
  for_each(n, parallel, [&](size_t i) {
    uint8_t bG[32];
    crypto_core_ristretto255_scalar_random(b_[i].data());
    if (crypto_scalarmult_ristretto255_base(bG, b_[i].data()) != 0) return false;
    if (choices[i] & 1) crypto_core_ristretto255_add(B_[i].data(), A_.data(), bG);
    else std::memcpy(B_[i].data(), bG, 32);
    return true;
  });
  for (const auto& B : B_) out.insert(out.end(), B.begin(), B.end());
  return out;
}

std::vector<Block> OtReceiver::finish(std::span<const uint8_t> msg, bool parallel) {
  const uint32_t n = read_header(msg, 32, "OT sender message");
  if (n != choices_.size()) throw Error(Errc::BatchSizeMismatch, "OT sender answered a different batch size");
  const uint8_t* in = msg.data() + 4;
  std::vector<Block> out(n);
  if (mode_ == OtMode::TestDealer) {
    for (size_t i = 0; i < n; ++i) out[i] = Block::load(in + 32 * i + 16 * (choices_[i] & 1));
    return out;
  }
  for_each(n, parallel, [&](size_t i) {
    uint8_t P[32];
    if (crypto_scalarmult_ristretto255(P, b_[i].data(), A_.data()) != 0) return false;
    out[i] = Block::load(in + 32 * i + 16 * (choices_[i] & 1)) ^ pad(i, A_.data(), B_[i].data(), P);
    return true;
  });
  return out;
}

std::vector<Block> ot_run_local(OtMode mode, const std::vector<OtPair>& pairs, const std::vector<uint8_t>& choices,
                                bool parallel) {
  if (pairs.size() != choices.size()) throw Error(Errc::BatchSizeMismatch, "pairs and choices differ in length");
  OtSender s(mode);
  OtReceiver r(mode);
  auto m1 = s.first_message();
  auto m2 = r.choose(m1, choices, parallel);
  auto m3 = s.respond(m2, pairs, parallel);
  return r.finish(m3, parallel);
}

}  // namespace gcinfer
