#include <future>
#include <random>
#include <thread>

#include "doctest.h"
#include "gcinfer/error.hpp"
#include "gcinfer/session.hpp"

using namespace gcinfer;
using namespace std::chrono_literals;

namespace {

FxVec random_x(size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-2, 2);
  FxVec x(n);
  for (auto& v : x) v = encode(U(rng));
  return x;
}

SessionOptions dealer(uint64_t seed = 7) {
  SessionOptions o;
  o.ot_mode = OtMode::TestDealer;
  o.seed = seed;
  return o;
}

// client and server on two threads over a loopback pair
size_t direct(const ModelDescriptor& m, const CompiledCircuit& c, const FxVec& x, const SessionOptions& o,
              SessionStats* cs = nullptr, SessionStats* ss = nullptr, std::chrono::microseconds delay = 0us,
              std::vector<uint8_t>* transcript = nullptr) {
  auto [a, b] = loopback_pair(delay);
  a->record(transcript != nullptr);
  auto srv = std::async(std::launch::async, [&, ch = b.get()] { run_server(m, c, *ch, o, ss); });
  size_t label = 0;
  try {
    label = run_client(x, c, *a, o, cs);
  } catch (...) {
    b->close();
    srv.wait();
    throw;
  }
  srv.get();
  if (transcript) *transcript = a->transcript();
  return label;
}

size_t outsourced(const ModelDescriptor& m, const CompiledCircuit& c, const FxVec& x, const SessionOptions& o,
                  std::function<uint64_t()> share_rng = {}) {
  auto [cp, pc] = loopback_pair();
  auto [cs, sc] = loopback_pair();
  auto [ps, sp] = loopback_pair();
  auto srv = std::async(std::launch::async, [&, a = sc.get(), b = sp.get()] { run_server_outsourced(m, c, *a, *b, o); });
  auto prx = std::async(std::launch::async, [&, a = pc.get(), b = ps.get()] { run_proxy(c, *a, *b, o); });
  size_t label = run_outsourced(x, c, *cp, *cs, o, share_rng);
  srv.get();
  prx.get();
  return label;
}

}  // namespace

TEST_CASE("frames round-trip and malformed frames are rejected") {
  auto [a, b] = loopback_pair();
  std::vector<uint8_t> p = {1, 2, 3};
  write_frame(*a, FrameType::Tables, p);
  auto f = read_frame(*b);
  CHECK(f.type == FrameType::Tables);
  CHECK(f.payload == p);
  CHECK(a->bytes_sent() == 8);
  uint8_t unknown[5] = {0, 0, 0, 0, 0x55};
  a->send(unknown);
  CHECK_THROWS_AS(read_frame(*b), Error);
  uint8_t huge[5] = {0x7f, 0xff, 0xff, 0xff, 0x10};
  a->send(huge);
  CHECK_THROWS_AS(read_frame(*b), Error);
  send_abort(*a, Errc::DigestMismatch, "nope");
  try {
    read_frame(*b);
    FAIL("expected abort");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DigestMismatch);
  }
  a->close();
  CHECK_THROWS_AS(read_frame(*b), Error);
}

TEST_CASE("hello encodes and decodes") {
  Hello h{Role::Proxy, "abc", kCipherId, kGroupId, "secure", true};
  auto back = Hello::decode(h.encode());
  CHECK(back.role == Role::Proxy);
  CHECK(back.digest == "abc");
  CHECK(back.outsourced);
}

TEST_CASE("loopback sessions return the reference label") {
  auto m = make_fc_model({8, 4, 3}, parse_activation("tanh:reduced"), 41, 1.0, true);
  std::mt19937_64 rng(42);
  for (auto mode : {CompileMode::Unrolled, CompileMode::Folded}) {
    auto c = compile(m, mode);
    for (int t = 0; t < 4; ++t) {
      auto x = random_x(8, rng);
      SessionOptions o;  // secure OT
      o.pipelined = t % 2 == 0;
      SessionStats cs, ss;
      CHECK(direct(m, c, x, o, &cs, &ss) == ref_network_eval(m, x));
      CHECK(cs.table_bytes == stats(c.program).nonxor_count * kTableBytes);
      CHECK(ss.table_bytes == cs.table_bytes);
      CHECK(cs.cycles == c.program.total_cycles());
    }
  }
}

TEST_CASE("large table streams split into several frames") {
  auto m = make_fc_model({6, 3}, parse_activation("sigmoid:pl"), 43);
  auto c = compile(m, CompileMode::Unrolled);
  std::mt19937_64 rng(44);
  auto o = dealer();
  o.max_table_chunk = 1000;
  SessionStats cs;
  auto x = random_x(6, rng);
  CHECK(direct(m, c, x, o, &cs) == ref_network_eval(m, x));
  CHECK(cs.frames_sent > stats(c.program).nonxor_count * kTableBytes / 1000);
}

TEST_CASE("digest mismatch aborts before any OT") {
  auto m = make_fc_model({5, 3}, parse_activation("relu"), 45);
  auto good = compile(m, CompileMode::Folded);
  auto bad = good;
  bad.digest[0] = bad.digest[0] == '0' ? '1' : '0';
  auto [a, b] = loopback_pair();
  auto srv = std::async(std::launch::async, [&, ch = b.get()] { run_server(m, bad, *ch, dealer()); });
  std::mt19937_64 rng(46);
  try {
    run_client(random_x(5, rng), good, *a, dealer());
    FAIL("expected DigestMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DigestMismatch);
  }
  try {
    srv.get();
    FAIL("expected DigestMismatch on the server");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DigestMismatch);
  }
  // only HELLO frames crossed
  CHECK(a->bytes_sent() == 5 + Hello{Role::GarblerClient, good.digest, kCipherId, kGroupId, "test-dealer", false}
                                     .encode()
                                     .size());
}

TEST_CASE("fixed seed and test-dealer OT give identical transcripts") {
  auto m = make_fc_model({4, 3, 2}, parse_activation("tanh:pl"), 47);
  auto c = compile(m, CompileMode::Folded);
  std::mt19937_64 rng(48);
  auto x = random_x(4, rng);
  std::vector<uint8_t> t1, t2, t3;
  direct(m, c, x, dealer(9), nullptr, nullptr, 0us, &t1);
  direct(m, c, x, dealer(9), nullptr, nullptr, 0us, &t2);
  direct(m, c, x, dealer(10), nullptr, nullptr, 0us, &t3);
  CHECK(!t1.empty());
  CHECK(t1 == t2);
  CHECK(t1 != t3);
}

TEST_CASE("outsourced sessions agree with direct ones") {
  auto m = make_fc_model({6, 4, 3}, parse_activation("sigmoid:reduced"), 49, 1.0, true);
  auto d = compile(m, CompileMode::Folded);
  auto oc = compile(m, CompileMode::Folded, true);
  CHECK(stats(oc.program).nonxor_count == stats(d.program).nonxor_count);
  std::mt19937_64 rng(50);
  for (int t = 0; t < 5; ++t) {
    auto x = random_x(6, rng);
    auto o = dealer(100 + t);
    CHECK(outsourced(m, oc, x, o) == direct(m, d, x, o));
  }
  auto x = random_x(6, rng);
  CHECK(outsourced(m, oc, x, SessionOptions{}, [] { return uint64_t(0); }) == ref_network_eval(m, x));
  auto [a, b] = loopback_pair();
  auto [c2, d2] = loopback_pair();
  CHECK_THROWS_AS(run_outsourced(random_x(5, rng), oc, *a, *c2, dealer()), Error);
}

TEST_CASE("tcp session through serve_one") {
  auto m = make_fc_model({5, 4, 2}, parse_activation("relu"), 51);
  auto c = compile(m, CompileMode::Folded);
  TcpListener l("127.0.0.1:0");
  auto srv = std::async(std::launch::async, [&] { serve_one(m, c, l, dealer()); });
  std::mt19937_64 rng(52);
  auto x = random_x(5, rng);
  auto ch = tcp_connect("127.0.0.1:" + std::to_string(l.port()));
  CHECK(run_client(x, c, *ch, dealer()) == ref_network_eval(m, x));
  srv.get();
}

TEST_CASE("pipelined cycles overlap garbling, transfer and evaluation") {
  auto m = make_fc_model({16, 8, 4}, parse_activation("tanh:pl"), 53);
  auto c = compile(m, CompileMode::Folded);
  const auto d = 3ms;
  std::mt19937_64 rng(54);
  auto x = random_x(16, rng);
  SessionStats cs, ss;
  CHECK(direct(m, c, x, dealer(), &cs, &ss, d) == ref_network_eval(m, x));
  const double cyc = double(c.program.total_cycles());
  const double transfer = 2 * std::chrono::duration<double>(d).count();  // labels + tables frame per cycle
  const double step = std::max({cs.max_cycle_compute, ss.max_cycle_compute, transfer});
  const double bound = (cyc + 1) * step + 12 * std::chrono::duration<double>(d).count() + 0.05;
  MESSAGE("cycles " << cyc << " wall " << cs.seconds << " s, bound " << bound << " s");
  CHECK(cs.seconds <= bound);
}
