#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcinfer/garble.hpp"

namespace gcinfer {

// Secure: Chou-Orlandi base OT over ristretto255, pads from BLAKE2b.
// TestDealer: receiver reveals its choices and the sender returns only the
// chosen message. Insecure, for CI.
enum class OtMode : uint8_t { Secure, TestDealer };
const char* to_string(OtMode m);
OtMode parse_ot_mode(const std::string& s);

inline constexpr const char* kGroupId = "ristretto255-blake2b";
inline constexpr size_t kPointBytes = 32;

using OtPair = std::array<Block, 2>;

// Message flow: sender.first_message() -> receiver.choose() -> sender.respond() -> receiver.finish().
// Each message is a 4-byte big-endian count followed by fixed-size records.
// `parallel` selects the OpenMP loop; false runs the serial reference.
class OtSender {
 public:
  explicit OtSender(OtMode mode);
  ~OtSender();
  std::vector<uint8_t> first_message();
  std::vector<uint8_t> respond(std::span<const uint8_t> receiver_msg, const std::vector<OtPair>& pairs,
                               bool parallel = true);

 private:
  OtMode mode_;
  std::array<uint8_t, 32> a_{}, A_{}, aA_{};
};

class OtReceiver {
 public:
  explicit OtReceiver(OtMode mode);
  ~OtReceiver();
  std::vector<uint8_t> choose(std::span<const uint8_t> sender_first, const std::vector<uint8_t>& choices,
                              bool parallel = true);
  std::vector<Block> finish(std::span<const uint8_t> sender_msg, bool parallel = true);

 private:
  OtMode mode_;
  std::array<uint8_t, 32> A_{};
  std::vector<uint8_t> choices_;
  std::vector<std::array<uint8_t, 32>> b_, B_;
};

// All four steps in memory.
std::vector<Block> ot_run_local(OtMode mode, const std::vector<OtPair>& pairs, const std::vector<uint8_t>& choices,
                                bool parallel = true);

}  // namespace gcinfer
