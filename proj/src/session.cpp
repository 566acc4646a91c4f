#include "gcinfer/session.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sodium.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <exception>
#include <optional>
#include <thread>

#include "gcinfer/error.hpp"
#include "gcinfer/garble.hpp"
#include "json.hpp"

namespace gcinfer {

using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------- channels

void Channel::send(std::span<const uint8_t> data) {
  send_impl(data);
  sent_ += data.size();
  if (recording_) transcript_.insert(transcript_.end(), data.begin(), data.end());
}

void Channel::recv(uint8_t* out, size_t n) {
  recv_impl(out, n);
  received_ += n;
}

namespace {

struct Pipe {
  struct Chunk {
    Clock::time_point ready;
    std::vector<uint8_t> data;
  };
  std::mutex m;
  std::condition_variable cv;
  std::deque<Chunk> q;
  size_t off = 0;
  bool closed = false;
  Clock::time_point busy_until{};
};

class LoopChannel : public Channel {
 public:
  LoopChannel(std::shared_ptr<Pipe> out, std::shared_ptr<Pipe> in, std::chrono::microseconds d)
      : out_(std::move(out)), in_(std::move(in)), delay_(d) {}
  ~LoopChannel() override { close(); }

  void close() override {
    for (auto* p : {out_.get(), in_.get()}) {
      std::lock_guard lk(p->m);
      p->closed = true;
      p->cv.notify_all();
    }
  }

 protected:
  void send_impl(std::span<const uint8_t> data) override {
    std::lock_guard lk(out_->m);
    if (out_->closed) throw Error(Errc::ChannelError, "loopback closed");
    auto ready = std::max(Clock::now(), out_->busy_until) + delay_;
    out_->busy_until = ready;
    out_->q.push_back({ready, std::vector<uint8_t>(data.begin(), data.end())});
    out_->cv.notify_all();
  }

  void recv_impl(uint8_t* out, size_t n) override {
    std::unique_lock lk(in_->m);
    while (n > 0) {
      if (in_->q.empty()) {
        if (in_->closed) throw Error(Errc::ChannelError, "loopback closed by peer");
        in_->cv.wait(lk);
        continue;
      }
      auto& c = in_->q.front();
      if (Clock::now() < c.ready) {
        in_->cv.wait_until(lk, c.ready);
        continue;
      }
      size_t k = std::min(n, c.data.size() - in_->off);
      std::memcpy(out, c.data.data() + in_->off, k);
      out += k, n -= k, in_->off += k;
      if (in_->off == c.data.size()) in_->q.pop_front(), in_->off = 0;
    }
  }

 private:
  std::shared_ptr<Pipe> out_, in_;
  std::chrono::microseconds delay_;
};

class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~TcpChannel() override { ::close(fd_); }
  void close() override { ::shutdown(fd_, SHUT_RDWR); }

 protected:
  void send_impl(std::span<const uint8_t> data) override {
    const uint8_t* p = data.data();
    size_t n = data.size();
    while (n > 0) {
      ssize_t k = ::send(fd_, p, n, MSG_NOSIGNAL);
      if (k < 0 && errno == EINTR) continue;
      if (k <= 0) throw Error(Errc::ChannelError, std::string("send: ") + std::strerror(errno));
      p += k, n -= size_t(k);
    }
  }
  void recv_impl(uint8_t* out, size_t n) override {
    while (n > 0) {
      ssize_t k = ::recv(fd_, out, n, 0);
      if (k < 0 && errno == EINTR) continue;
      if (k == 0) throw Error(Errc::ChannelError, "connection closed by peer");
      if (k < 0) throw Error(Errc::ChannelError, std::string("recv: ") + std::strerror(errno));
      out += k, n -= size_t(k);
    }
  }

 private:
  int fd_;
};

std::pair<std::string, std::string> split_addr(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::InvalidArgument, "address must be host:port, got '" + addr + "'");
  std::string host = addr.substr(0, colon), port = addr.substr(colon + 1);
  if (host.empty() || host == "*") host = "0.0.0.0";
  return {host, port};
}

struct AddrInfo {
  addrinfo* ai = nullptr;
  AddrInfo(const std::string& addr, bool passive) {
    auto [host, port] = split_addr(addr);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    int rc = getaddrinfo(host.c_str(), port.c_str(), &hints, &ai);
    if (rc != 0) throw Error(Errc::ChannelError, "resolve " + addr + ": " + gai_strerror(rc));
  }
  ~AddrInfo() { freeaddrinfo(ai); }
};

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> loopback_pair(std::chrono::microseconds delay) {
  auto ab = std::make_shared<Pipe>(), ba = std::make_shared<Pipe>();
  return {std::make_unique<LoopChannel>(ab, ba, delay), std::make_unique<LoopChannel>(ba, ab, delay)};
}

TcpListener::TcpListener(const std::string& addr) {
  AddrInfo r(addr, true);
  for (auto* a = r.ai; a; a = a->ai_next) {
    int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, a->ai_addr, a->ai_addrlen) == 0 && ::listen(fd, 8) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  if (fd_ < 0) throw Error(Errc::ChannelError, "cannot listen on " + addr + ": " + std::strerror(errno));
  sockaddr_storage ss{};
  socklen_t len = sizeof ss;
  getsockname(fd_, reinterpret_cast<sockaddr*>(&ss), &len);
  port_ = ss.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port)
                                   : ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Channel> TcpListener::accept() {
  for (;;) {
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return std::make_unique<TcpChannel>(fd);
    if (errno != EINTR) throw Error(Errc::ChannelError, std::string("accept: ") + std::strerror(errno));
  }
}

std::unique_ptr<Channel> tcp_connect(const std::string& addr, std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    AddrInfo r(addr, false);
    for (auto* a = r.ai; a; a = a->ai_next) {
      int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) return std::make_unique<TcpChannel>(fd);
      ::close(fd);
    }
    if (Clock::now() >= deadline) throw Error(Errc::ChannelError, "cannot connect to " + addr);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

// ---------------------------------------------------------------- frames

const char* to_string(FrameType t) {
  switch (t) {
    case FrameType::Hello: return "HELLO";
    case FrameType::OtReceiverMsg: return "OT_RECEIVER_MSG";
    case FrameType::OtSenderMsg: return "OT_SENDER_MSG";
    case FrameType::Tables: return "TABLES";
    case FrameType::GarblerLabels: return "GARBLER_LABELS";
    case FrameType::OutputLabels: return "OUTPUT_LABELS";
    case FrameType::ResultAck: return "RESULT_ACK";
    case FrameType::OutputMap: return "OUTPUT_MAP";
    case FrameType::InputShare: return "INPUT_SHARE";
    case FrameType::Abort: return "ABORT";
  }
  return "?";
}

namespace {

bool known_type(uint8_t t) {
  switch (FrameType(t)) {
    case FrameType::Hello:
    case FrameType::OtReceiverMsg:
    case FrameType::OtSenderMsg:
    case FrameType::Tables:
    case FrameType::GarblerLabels:
    case FrameType::OutputLabels:
    case FrameType::ResultAck:
    case FrameType::OutputMap:
    case FrameType::InputShare:
    case FrameType::Abort: return true;
  }
  return false;
}

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
  for (int s = 24; s >= 0; s -= 8) v.push_back(uint8_t(x >> s));
}

uint32_t get_u32(const uint8_t* p) { return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | p[3]; }

}  // namespace

void write_frame(Channel& ch, FrameType t, std::span<const uint8_t> payload) {
  if (payload.size() > kMaxFrame) throw Error(Errc::ProtocolViolation, "frame over 64 MiB");
  std::vector<uint8_t> buf;
  buf.reserve(5 + payload.size());
  put_u32(buf, uint32_t(payload.size()));
  buf.push_back(uint8_t(t));
  buf.insert(buf.end(), payload.begin(), payload.end());
  ch.send(buf);
}

Frame read_frame(Channel& ch) {
  uint8_t hdr[5];
  ch.recv(hdr, 5);
  const uint32_t len = get_u32(hdr);
  if (!known_type(hdr[4])) throw Error(Errc::ProtocolViolation, "unknown frame type " + std::to_string(hdr[4]));
  if (len > kMaxFrame) throw Error(Errc::ProtocolViolation, "frame of " + std::to_string(len) + " bytes");
  Frame f;
  f.type = FrameType(hdr[4]);
  f.payload.resize(len);
  if (len) ch.recv(f.payload.data(), len);
  if (f.type == FrameType::Abort) {
    Errc code = Errc::ProtocolViolation;
    if (!f.payload.empty() && f.payload[0] <= uint8_t(Errc::InvalidArgument)) code = Errc(f.payload[0]);
    std::string why = f.payload.size() > 1 ? std::string(f.payload.begin() + 1, f.payload.end()) : "";
    throw Error(code, "peer aborted: " + why);
  }
  return f;
}

Frame expect_frame(Channel& ch, FrameType t) {
  Frame f = read_frame(ch);
  if (f.type != t)
    throw Error(Errc::ProtocolViolation, std::string("expected ") + to_string(t) + ", got " + to_string(f.type));
  return f;
}

void send_abort(Channel& ch, Errc code, const std::string& why) noexcept {
  try {
    std::vector<uint8_t> p{uint8_t(code)};
    p.insert(p.end(), why.begin(), why.end());
    write_frame(ch, FrameType::Abort, p);
  } catch (...) {
  }
}

// ---------------------------------------------------------------- hello

const char* to_string(Role r) {
  switch (r) {
    case Role::GarblerClient: return "garbler-client";
    case Role::EvaluatorServer: return "evaluator-server";
    case Role::Proxy: return "proxy";
    case Role::OutsourcingClient: return "outsourcing-client";
  }
  return "?";
}

std::vector<uint8_t> Hello::encode() const {
  nlohmann::json j = {{"version", kProtocolVersion},     {"role", to_string(role)}, {"digest", digest},
                      {"cipher", cipher},   {"group", group},          {"ot_mode", ot_mode},
                      {"outsourced", outsourced}};
  std::string s = j.dump();
  return {s.begin(), s.end()};
}

Hello Hello::decode(std::span<const uint8_t> payload) {
  try {
    auto j = nlohmann::json::parse(payload.begin(), payload.end());
    Hello h;
    std::string r = j.at("role");
    bool found = false;
    for (auto c : {Role::GarblerClient, Role::EvaluatorServer, Role::Proxy, Role::OutsourcingClient})
      if (r == to_string(c)) h.role = c, found = true;
    if (!found) throw Error(Errc::ProtocolViolation, "unknown role " + r);
    h.digest = j.at("digest");
    h.cipher = j.at("cipher");
    h.group = j.at("group");
    h.ot_mode = j.at("ot_mode");
    h.outsourced = j.at("outsourced");
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ProtocolViolation, std::string("bad HELLO: ") + e.what());
  }
}

namespace {

Hello make_hello(const CompiledCircuit& c, const SessionOptions& o, Role r) {
  return {r, c.digest, kCipherId, kGroupId, to_string(o.ot_mode), c.outsourced};
}

// the caller's guard turns the throw into an ABORT frame
void check_hello(const Hello& h, const CompiledCircuit& c, const SessionOptions& o, std::initializer_list<Role> roles) {
  auto fail = [&](Errc code, const std::string& why) { throw Error(code, why); };
  if (h.digest != c.digest) fail(Errc::DigestMismatch, "model digest " + h.digest + " != " + c.digest);
  if (h.cipher != kCipherId) fail(Errc::ProtocolViolation, "cipher " + h.cipher);
  if (h.group != kGroupId) fail(Errc::ProtocolViolation, "group " + h.group);
  if (h.ot_mode != to_string(o.ot_mode)) fail(Errc::ProtocolViolation, "OT mode " + h.ot_mode);
  if (h.outsourced != c.outsourced) fail(Errc::ProtocolViolation, "direct/outsourced mismatch");
  if (std::find(roles.begin(), roles.end(), h.role) == roles.end())
    fail(Errc::ProtocolViolation, std::string("unexpected role ") + to_string(h.role));
}

Hello read_hello(Channel& ch) { return Hello::decode(expect_frame(ch, FrameType::Hello).payload); }

void hello_initiate(Channel& ch, const CompiledCircuit& c, const SessionOptions& o, Role me,
                    std::initializer_list<Role> peer) {
  write_frame(ch, FrameType::Hello, make_hello(c, o, me).encode());
  check_hello(read_hello(ch), c, o, peer);
}

void hello_answer(Channel& ch, const Hello& h, const CompiledCircuit& c, const SessionOptions& o, Role me,
                  std::initializer_list<Role> peer) {
  check_hello(h, c, o, peer);
  write_frame(ch, FrameType::Hello, make_hello(c, o, me).encode());
}

// ---------------------------------------------------------------- engine helpers

template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(size_t cap) : cap_(std::max<size_t>(cap, 1)) {}
  void push(T v) {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] { return q_.size() < cap_ || err_; });
    if (err_) std::rethrow_exception(err_);
    q_.push_back(std::move(v));
    cv_.notify_all();
  }
  bool pop(T& v) {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] { return !q_.empty() || closed_ || err_; });
    if (err_) std::rethrow_exception(err_);
    if (q_.empty()) return false;
    v = std::move(q_.front());
    q_.pop_front();
    cv_.notify_all();
    return true;
  }
  void close() {
    std::lock_guard lk(m_);
    closed_ = true;
    cv_.notify_all();
  }
  void fail(std::exception_ptr e) {
    std::lock_guard lk(m_);
    if (!err_) err_ = e;
    cv_.notify_all();
  }
  std::exception_ptr error() {
    std::lock_guard lk(m_);
    return err_;
  }

 private:
  size_t cap_;
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<T> q_;
  bool closed_ = false;
  std::exception_ptr err_;
};

struct CycleBundle {
  uint32_t cycle = 0;
  std::vector<Block> labels;
  std::vector<uint8_t> tables;
};

std::vector<uint8_t> blocks_payload(std::span<const Block> b, std::optional<uint32_t> head = {}) {
  std::vector<uint8_t> p;
  p.reserve(4 + 16 * b.size());
  put_u32(p, head ? *head : uint32_t(b.size()));
  p.resize(4 + 16 * b.size());
  for (size_t i = 0; i < b.size(); ++i) b[i].store(&p[4 + 16 * i]);
  return p;
}

std::vector<Block> payload_blocks(std::span<const uint8_t> p, size_t want, const char* what) {
  if (p.size() != 4 + 16 * want) throw Error(Errc::ProtocolViolation, std::string(what) + ": wrong size");
  std::vector<Block> b(want);
  for (size_t i = 0; i < want; ++i) b[i] = Block::load(&p[4 + 16 * i]);
  return b;
}

uint64_t count_frames_sent(const CycleBundle& b, size_t chunk) {
  return 1 + std::max<uint64_t>(1, (b.tables.size() + chunk - 1) / chunk);
}

void send_bundle(Channel& ch, const CycleBundle& b, size_t chunk) {
  write_frame(ch, FrameType::GarblerLabels, blocks_payload(b.labels, b.cycle));
  size_t at = 0;
  do {
    size_t k = std::min(chunk, b.tables.size() - at);
    std::vector<uint8_t> p;
    p.reserve(4 + k);
    put_u32(p, b.cycle);
    p.insert(p.end(), b.tables.begin() + at, b.tables.begin() + at + k);
    write_frame(ch, FrameType::Tables, p);
    at += k;
  } while (at < b.tables.size());
}

CycleBundle recv_bundle(Channel& ch, uint32_t cycle, size_t n_labels, size_t n_table_bytes, uint64_t& frames) {
  CycleBundle b;
  b.cycle = cycle;
  auto f = expect_frame(ch, FrameType::GarblerLabels);
  ++frames;
  if (f.payload.size() < 4 || get_u32(f.payload.data()) != cycle)
    throw Error(Errc::ProtocolViolation, "labels for the wrong cycle");
  b.labels = payload_blocks(f.payload, n_labels, "GARBLER_LABELS");
  b.tables.reserve(n_table_bytes);
  do {
    auto t = expect_frame(ch, FrameType::Tables);
    ++frames;
    if (t.payload.size() < 4 || get_u32(t.payload.data()) != cycle)
      throw Error(Errc::ProtocolViolation, "tables for the wrong cycle");
    if (b.tables.size() + t.payload.size() - 4 > n_table_bytes)
      throw Error(Errc::MalformedTables, "cycle " + std::to_string(cycle) + ": too many table bytes");
    b.tables.insert(b.tables.end(), t.payload.begin() + 4, t.payload.end());
  } while (b.tables.size() < n_table_bytes);
  return b;
}

Block garbling_seed(const SessionOptions& o) {
  if (o.seed) return Block::from_u64(o.seed, 0x676369);
  uint8_t r[16];
  randombytes_buf(r, sizeof r);
  return Block::load(r);
}

double secs(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

struct GarbleOutcome {
  std::vector<Block> out0;
  Block R;
};

// Garbler side after HELLO: OT as sender, then every cycle.
GarbleOutcome garbler_session(Channel& ch, const CompiledCircuit& c, const std::vector<uint8_t>& g,
                              const SessionOptions& o, SessionStats& st) {
  ProgramGarbler gb(c.program, garbling_seed(o));
  auto e0 = gb.evaluator_label0();
  std::vector<OtPair> pairs(e0.size());
  for (size_t i = 0; i < e0.size(); ++i) pairs[i] = {e0[i], e0[i] ^ gb.R()};
  OtSender ot(o.ot_mode);
  const uint64_t before_ot = ch.bytes_sent() + ch.bytes_received();
  auto m1 = ot.first_message();
  write_frame(ch, FrameType::OtSenderMsg, m1);
  auto m2 = expect_frame(ch, FrameType::OtReceiverMsg);
  write_frame(ch, FrameType::OtSenderMsg, ot.respond(m2.payload, pairs));
  st.ot_bytes = ch.bytes_sent() + ch.bytes_received() - before_ot;
  st.frames_sent += 2, st.frames_received += 1;

  const size_t chunk = std::max<size_t>(1, std::min(o.max_table_chunk, kMaxFrame - 4));
  auto garble_one = [&]() {
    CycleBundle b;
    b.cycle = uint32_t(gb.cycles_done());
    auto t0 = Clock::now();
    gb.garble_next(g, b.tables, b.labels);
    st.max_cycle_compute = std::max(st.max_cycle_compute, secs(Clock::now() - t0));
    st.table_bytes += b.tables.size();
    st.label_bytes += 16 * b.labels.size();
    st.frames_sent += count_frames_sent(b, chunk);
    ++st.cycles;
    return b;
  };
  if (!o.pipelined) {
    while (gb.cycles_done() < gb.total_cycles()) send_bundle(ch, garble_one(), chunk);
  } else {
    BoundedQueue<CycleBundle> q(o.queue_cycles);
    std::thread io([&] {
      try {
        CycleBundle b;
        while (q.pop(b)) send_bundle(ch, b, chunk);
      } catch (...) {
        q.fail(std::current_exception());
      }
    });
    try {
      while (gb.cycles_done() < gb.total_cycles()) q.push(garble_one());
    } catch (...) {
      q.fail(std::current_exception());
      io.join();
      throw;
    }
    q.close();
    io.join();
    if (auto e = q.error()) std::rethrow_exception(e);
  }
  return {gb.output_label0(), gb.R()};
}

// Evaluator side after HELLO: OT as receiver, then every cycle. Returns output labels.
std::vector<Block> evaluator_session(Channel& ch, const CompiledCircuit& c, const std::vector<uint8_t>& e,
                                     const SessionOptions& o, SessionStats& st) {
  OtReceiver ot(o.ot_mode);
  const uint64_t before_ot = ch.bytes_sent() + ch.bytes_received();
  auto m1 = expect_frame(ch, FrameType::OtSenderMsg);
  write_frame(ch, FrameType::OtReceiverMsg, ot.choose(m1.payload, e));
  auto labels = ot.finish(expect_frame(ch, FrameType::OtSenderMsg).payload);
  st.ot_bytes = ch.bytes_sent() + ch.bytes_received() - before_ot;
  st.frames_sent += 1, st.frames_received += 2;

  ProgramEvaluator ev(c.program, std::move(labels));
  // per-cycle sizes, known in advance so the reader can run ahead
  std::vector<std::pair<size_t, size_t>> sizes;
  for (const auto& n : c.program.stages) {
    const size_t tb = stats_per_cycle(n).nonxor_count * kTableBytes;
    const auto sc = make_schedule(n);
    for (uint32_t cy = 0; cy < n.cycles; ++cy) {
      size_t nl = cy == 0 ? n.registers.size() : 0;
      for (uint32_t k = sc.in_off[cy]; k < sc.in_off[cy + 1]; ++k)
        nl += n.inputs[sc.in_idx[k]].party != Party::Evaluator ? 1 : 0;
      sizes.emplace_back(nl, tb);
    }
  }
  auto eval_one = [&](const CycleBundle& b) {
    auto t0 = Clock::now();
    ev.evaluate_next(b.tables, b.labels);
    st.max_cycle_compute = std::max(st.max_cycle_compute, secs(Clock::now() - t0));
    st.table_bytes += b.tables.size();
    st.label_bytes += 16 * b.labels.size();
    ++st.cycles;
  };
  uint64_t frames = 0;
  if (!o.pipelined) {
    for (uint32_t cy = 0; cy < sizes.size(); ++cy) eval_one(recv_bundle(ch, cy, sizes[cy].first, sizes[cy].second, frames));
  } else {
    BoundedQueue<CycleBundle> q(o.queue_cycles);
    std::thread io([&] {
      try {
        for (uint32_t cy = 0; cy < sizes.size(); ++cy) q.push(recv_bundle(ch, cy, sizes[cy].first, sizes[cy].second, frames));
        q.close();
      } catch (...) {
        q.fail(std::current_exception());
      }
    });
    try {
      CycleBundle b;
      while (q.pop(b)) eval_one(b);
    } catch (const Error& e) {
      q.fail(std::current_exception());
      send_abort(ch, e.code(), e.what());
      ch.close();
      io.join();
      throw;
    }
    io.join();
  }
  st.frames_received += frames;
  return ev.output_labels();
}

template <class F>
auto guarded(Channel& ch, F body) {
  try {
    return body();
  } catch (const Error& e) {
    if (e.code() != Errc::ChannelError && std::string(e.what()).find("peer aborted") == std::string::npos)
      send_abort(ch, e.code(), e.what());
    throw;
  }
}

std::vector<uint8_t> share_payload(const FxVec& v) {
  std::vector<uint8_t> p;
  put_u32(p, uint32_t(v.size()));
  for (auto f : v) p.push_back(uint8_t(uint16_t(f.raw) >> 8)), p.push_back(uint8_t(f.raw));
  return p;
}

FxVec parse_share(std::span<const uint8_t> p, size_t want) {
  if (p.size() < 4 || p.size() != 4 + 2 * size_t(get_u32(p.data())))
    throw Error(Errc::ProtocolViolation, "INPUT_SHARE: bad length");
  const size_t n = get_u32(p.data());
  if (n != want)
    throw Error(Errc::ShareSizeMismatch, "share of " + std::to_string(n) + " elements, model takes " + std::to_string(want));
  FxVec v(n);
  for (size_t i = 0; i < n; ++i) v[i] = Fixed16(int16_t(uint16_t((p[4 + 2 * i] << 8) | p[5 + 2 * i])));
  return v;
}

void run_server_after_hello(const ModelDescriptor& m, const CompiledCircuit& c, Channel& ch, const Hello& h,
                            const SessionOptions& o, SessionStats& st) {
  guarded(ch, [&] {
    hello_answer(ch, h, c, o, Role::EvaluatorServer, {Role::GarblerClient});
    st.frames_sent++, st.frames_received++;
    auto out = evaluator_session(ch, c, evaluator_inputs(c, m), o, st);
    write_frame(ch, FrameType::OutputLabels, blocks_payload(out));
    expect_frame(ch, FrameType::ResultAck);
    st.frames_sent++, st.frames_received++;
    return 0;
  });
}

void server_outsourced(const ModelDescriptor& m, const CompiledCircuit& c, Channel& client, Channel& proxy,
                       std::optional<Hello> ch_hello, std::optional<Hello> px_hello, const SessionOptions& o,
                       SessionStats& st) {
  FxVec share;
  guarded(client, [&] {
    Hello h = ch_hello ? *ch_hello : read_hello(client);
    hello_answer(client, h, c, o, Role::EvaluatorServer, {Role::OutsourcingClient});
    share = parse_share(expect_frame(client, FrameType::InputShare).payload, c.data_inputs);
    return 0;
  });
  std::vector<Block> out;
  try {
    out = guarded(proxy, [&] {
      Hello h = px_hello ? *px_hello : read_hello(proxy);
      hello_answer(proxy, h, c, o, Role::EvaluatorServer, {Role::Proxy});
      return evaluator_session(proxy, c, evaluator_inputs(c, m, share), o, st);
    });
  } catch (const Error& e) {
    send_abort(client, e.code(), e.what());
    throw;
  }
  guarded(client, [&] {
    write_frame(client, FrameType::OutputLabels, blocks_payload(out));
    expect_frame(client, FrameType::ResultAck);
    return 0;
  });
}

}  // namespace

// ---------------------------------------------------------------- roles

size_t run_client(const FxVec& x, const CompiledCircuit& c, Channel& server, const SessionOptions& o,
                  SessionStats* st) {
  SessionStats local;
  auto& s = st ? *st : local;
  const auto t0 = Clock::now();
  if (c.outsourced) throw Error(Errc::InvalidArgument, "direct session needs a direct-mode netlist");
  auto g = garbler_inputs(c, x);
  size_t label = guarded(server, [&] {
    hello_initiate(server, c, o, Role::GarblerClient, {Role::EvaluatorServer});
    s.frames_sent++, s.frames_received++;
    auto res = garbler_session(server, c, g, o, s);
    auto f = expect_frame(server, FrameType::OutputLabels);
    s.frames_received++;
    auto got = payload_blocks(f.payload, res.out0.size(), "OUTPUT_LABELS");
    size_t lbl = decode_label(c, decode_outputs(res.out0, res.R, got));
    write_frame(server, FrameType::ResultAck, {});
    s.frames_sent++;
    return lbl;
  });
  s.seconds = secs(Clock::now() - t0);
  return label;
}

void run_server(const ModelDescriptor& m, const CompiledCircuit& c, Channel& client, const SessionOptions& o,
                SessionStats* st) {
  SessionStats local;
  auto& s = st ? *st : local;
  const auto t0 = Clock::now();
  Hello h = guarded(client, [&] { return read_hello(client); });
  run_server_after_hello(m, c, client, h, o, s);
  s.seconds = secs(Clock::now() - t0);
}

size_t run_outsourced(const FxVec& x, const CompiledCircuit& c, Channel& proxy, Channel& server,
                      const SessionOptions& o, std::function<uint64_t()> share_rng) {
  if (!c.outsourced) throw Error(Errc::InvalidArgument, "outsourced session needs an outsourced netlist");
  if (x.size() != c.data_inputs)
    throw Error(Errc::ShareSizeMismatch,
                "input has " + std::to_string(x.size()) + " elements, model takes " + std::to_string(c.data_inputs));
  FxVec s(x.size()), xs(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    uint16_t r;
    if (share_rng) r = uint16_t(share_rng());
    else randombytes_buf(&r, sizeof r);
    s[i] = Fixed16(int16_t(r));
    xs[i] = Fixed16(int16_t(uint16_t(x[i].raw) ^ r));
  }
  guarded(proxy, [&] {
    hello_initiate(proxy, c, o, Role::OutsourcingClient, {Role::Proxy});
    write_frame(proxy, FrameType::InputShare, share_payload(s));
    return 0;
  });
  guarded(server, [&] {
    hello_initiate(server, c, o, Role::OutsourcingClient, {Role::EvaluatorServer});
    write_frame(server, FrameType::InputShare, share_payload(xs));
    return 0;
  });
  auto map = guarded(proxy, [&] { return expect_frame(proxy, FrameType::OutputMap); });
  auto outs = guarded(server, [&] { return expect_frame(server, FrameType::OutputLabels); });
  // OUTPUT_MAP: R, then count-prefixed label0 list
  if (map.payload.size() < 20) throw Error(Errc::ProtocolViolation, "OUTPUT_MAP too short");
  const Block R = Block::load(map.payload.data());
  const size_t n = c.output_map.size();
  auto l0 = payload_blocks(std::span(map.payload).subspan(16), n, "OUTPUT_MAP");
  auto got = payload_blocks(outs.payload, n, "OUTPUT_LABELS");
  size_t label = decode_label(c, decode_outputs(l0, R, got));
  write_frame(proxy, FrameType::ResultAck, {});
  write_frame(server, FrameType::ResultAck, {});
  return label;
}

void run_proxy(const CompiledCircuit& c, Channel& client, Channel& server, const SessionOptions& o,
               SessionStats* st) {
  SessionStats local;
  auto& s = st ? *st : local;
  const auto t0 = Clock::now();
  FxVec share;
  guarded(client, [&] {
    hello_answer(client, read_hello(client), c, o, Role::Proxy, {Role::OutsourcingClient});
    share = parse_share(expect_frame(client, FrameType::InputShare).payload, c.data_inputs);
    return 0;
  });
  GarbleOutcome res;
  try {
    res = guarded(server, [&] {
      hello_initiate(server, c, o, Role::Proxy, {Role::EvaluatorServer});
      return garbler_session(server, c, garbler_inputs(c, share), o, s);
    });
  } catch (const Error& e) {
    send_abort(client, e.code(), e.what());
    throw;
  }
  guarded(client, [&] {
    std::vector<uint8_t> p(16);
    res.R.store(p.data());
    auto rest = blocks_payload(res.out0);
    p.insert(p.end(), rest.begin(), rest.end());
    write_frame(client, FrameType::OutputMap, p);
    expect_frame(client, FrameType::ResultAck);
    return 0;
  });
  s.seconds = secs(Clock::now() - t0);
}

void run_server_outsourced(const ModelDescriptor& m, const CompiledCircuit& c, Channel& client, Channel& proxy,
                           const SessionOptions& o, SessionStats* st) {
  SessionStats local;
  auto& s = st ? *st : local;
  const auto t0 = Clock::now();
  server_outsourced(m, c, client, proxy, {}, {}, o, s);
  s.seconds = secs(Clock::now() - t0);
}

void serve_one(const ModelDescriptor& m, const CompiledCircuit& c, TcpListener& l, const SessionOptions& o,
               SessionStats* st) {
  SessionStats local;
  auto& s = st ? *st : local;
  const auto t0 = Clock::now();
  auto first = l.accept();
  Hello h = guarded(*first, [&] { return read_hello(*first); });
  switch (h.role) {
    case Role::GarblerClient: run_server_after_hello(m, c, *first, h, o, s); break;
    case Role::OutsourcingClient: {
      auto second = l.accept();
      server_outsourced(m, c, *first, *second, h, {}, o, s);
      break;
    }
    case Role::Proxy: {
      auto second = l.accept();
      server_outsourced(m, c, *second, *first, {}, h, o, s);
      break;
    }
    default:
      send_abort(*first, Errc::ProtocolViolation, "unexpected role");
      throw Error(Errc::ProtocolViolation, std::string("unexpected role ") + to_string(h.role));
  }
  s.seconds = secs(Clock::now() - t0);
}

}  // namespace gcinfer
