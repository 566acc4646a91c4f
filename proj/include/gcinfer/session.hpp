#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "gcinfer/compile.hpp"
#include "gcinfer/error.hpp"
#include "gcinfer/ot.hpp"

namespace gcinfer {

// ---- transport ----

class Channel {
 public:
  virtual ~Channel() = default;
  // Throws ChannelError when the peer is gone.
  void send(std::span<const uint8_t> data);
  void recv(uint8_t* out, size_t n);
  virtual void close() = 0;

  uint64_t bytes_sent() const { return sent_; }
  uint64_t bytes_received() const { return received_; }
  // copy of every byte sent, when enabled
  void record(bool on) { recording_ = on; }
  const std::vector<uint8_t>& transcript() const { return transcript_; }

 protected:
  virtual void send_impl(std::span<const uint8_t> data) = 0;
  virtual void recv_impl(uint8_t* out, size_t n) = 0;

 private:
  uint64_t sent_ = 0, received_ = 0;
  bool recording_ = false;
  std::vector<uint8_t> transcript_;
};

// In-process pair. Each send occupies the link for `delay` before the bytes
// become readable, so consecutive frames queue up behind each other.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> loopback_pair(
    std::chrono::microseconds delay = std::chrono::microseconds(0));

class TcpListener {
 public:
  explicit TcpListener(const std::string& addr);  // "host:port", port 0 picks one
  ~TcpListener();
  uint16_t port() const { return port_; }
  std::unique_ptr<Channel> accept();

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

// Retries until `timeout` while the peer is not yet listening.
std::unique_ptr<Channel> tcp_connect(const std::string& addr,
                                     std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

// ---- framing ----

enum class FrameType : uint8_t {
  Hello = 0x01,
  OtReceiverMsg = 0x02,
  OtSenderMsg = 0x03,
  Tables = 0x10,
  GarblerLabels = 0x11,
  OutputLabels = 0x20,
  ResultAck = 0x21,
  OutputMap = 0x22,
  InputShare = 0x30,
  Abort = 0x7F,
};
const char* to_string(FrameType t);

inline constexpr size_t kMaxFrame = size_t(64) << 20;

struct Frame {
  FrameType type = FrameType::Abort;
  std::vector<uint8_t> payload;
};

// 4-byte big-endian payload length, type byte, payload.
void write_frame(Channel& ch, FrameType t, std::span<const uint8_t> payload);
// Throws ProtocolViolation on unknown types or oversize frames, and rethrows
// a received ABORT as an Error with the peer's code.
Frame read_frame(Channel& ch);
Frame expect_frame(Channel& ch, FrameType t);
void send_abort(Channel& ch, Errc code, const std::string& why) noexcept;

// ---- protocol ----

inline constexpr int kProtocolVersion = 1;

enum class Role : uint8_t { GarblerClient, EvaluatorServer, Proxy, OutsourcingClient };
const char* to_string(Role r);

struct Hello {
  Role role = Role::GarblerClient;
  std::string digest, cipher, group, ot_mode;
  bool outsourced = false;
  std::vector<uint8_t> encode() const;
  static Hello decode(std::span<const uint8_t> payload);
};

struct SessionOptions {
  OtMode ot_mode = OtMode::Secure;
  uint64_t seed = 0;         // garbling seed; 0 draws one from the OS
  bool pipelined = true;     // engine and channel I/O on separate threads
  size_t queue_cycles = 2;   // bounded queue depth, in cycles
  size_t max_table_chunk = kMaxFrame - 4;
};

struct SessionStats {
  uint64_t cycles = 0;
  uint64_t table_bytes = 0;  // garbled-table bytes only, frame and cycle headers excluded
  uint64_t label_bytes = 0;
  uint64_t ot_bytes = 0;
  uint64_t frames_sent = 0, frames_received = 0;
  double seconds = 0;
  double max_cycle_compute = 0;  // slowest garble or evaluate step
};

// Direct mode: the client garbles, the server evaluates.
size_t run_client(const FxVec& x, const CompiledCircuit& c, Channel& server, const SessionOptions& o = {},
                  SessionStats* st = nullptr);
void run_server(const ModelDescriptor& m, const CompiledCircuit& c, Channel& client, const SessionOptions& o = {},
                SessionStats* st = nullptr);

// Outsourced mode. The client splits x into s and x^s, the proxy garbles with
// s and the server evaluates with x^s as extra evaluator input.
size_t run_outsourced(const FxVec& x, const CompiledCircuit& c, Channel& proxy, Channel& server,
                      const SessionOptions& o = {}, std::function<uint64_t()> share_rng = {});
void run_proxy(const CompiledCircuit& c, Channel& client, Channel& server, const SessionOptions& o = {},
               SessionStats* st = nullptr);
void run_server_outsourced(const ModelDescriptor& m, const CompiledCircuit& c, Channel& client, Channel& proxy,
                           const SessionOptions& o = {}, SessionStats* st = nullptr);

// One server session on a listener: direct if a garbler client connects,
// outsourced if an outsourcing client does (the proxy connection follows).
void serve_one(const ModelDescriptor& m, const CompiledCircuit& c, TcpListener& l, const SessionOptions& o = {},
               SessionStats* st = nullptr);

}  // namespace gcinfer
