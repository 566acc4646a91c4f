#pragma once

#include <emmintrin.h>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcinfer/netlist.hpp"

namespace gcinfer {

struct Block {
  __m128i v;
  Block() : v(_mm_setzero_si128()) {}
  explicit Block(__m128i x) : v(x) {}
  static Block from_u64(uint64_t lo, uint64_t hi) { return Block(_mm_set_epi64x(int64_t(hi), int64_t(lo))); }
  uint64_t lo() const { return uint64_t(_mm_cvtsi128_si64(v)); }
  uint64_t hi() const { return uint64_t(_mm_cvtsi128_si64(_mm_unpackhi_epi64(v, v))); }
  bool lsb() const { return lo() & 1; }
  Block operator^(Block o) const { return Block(_mm_xor_si128(v, o.v)); }
  Block operator|(Block o) const { return Block(_mm_or_si128(v, o.v)); }
  Block& operator^=(Block o) { return v = _mm_xor_si128(v, o.v), *this; }
  bool operator==(Block o) const { return lo() == o.lo() && hi() == o.hi(); }
  bool operator!=(Block o) const { return !(*this == o); }
  void store(uint8_t* p) const { _mm_storeu_si128(reinterpret_cast<__m128i*>(p), v); }
  static Block load(const uint8_t* p) { return Block(_mm_loadu_si128(reinterpret_cast<const __m128i*>(p))); }
};
inline Block select(bool b, Block x) { return b ? x : Block(); }

// AES-128 with AES-NI
class Aes {
 public:
  explicit Aes(Block key);
  Block enc(Block x) const;
  void enc4(Block* x) const;  // four blocks, interleaved rounds
 private:
  __m128i rk_[11];
};

// GF(2^128) doubling
Block dbl(Block x);

// H(L, t) = pi(2L ^ t) ^ 2L with pi the fixed-key cipher
Block hash(Block label, Block tweak);
Block tweak(uint64_t gate_id, uint32_t cycle, uint32_t half);

inline constexpr const char* kCipherId = "aes128-fixedkey-halfgates";
inline constexpr uint32_t kTableBytes = 32;

// Label source: label0 = AES_seed(cycle, wire, domain); R = AES_seed(tag) | 1.
class LabelSource {
 public:
  explicit LabelSource(Block seed);
  Block R() const { return R_; }
  Block label0(uint32_t global_cycle, uint32_t wire, uint32_t domain) const;
 private:
  Aes prf_;
  Block R_;
};

// Garbles the stages of a program cycle by cycle. Garbler bits are indexed as
// in simulate(): stage by stage, slots of that party in list order.
class ProgramGarbler {
 public:
  ProgramGarbler(const Program& p, Block seed);

  Block R() const { return src_.R(); }
  uint64_t total_cycles() const { return total_cycles_; }
  uint64_t cycles_done() const { return done_; }
  // label0 of every evaluator slot, program-wide in evaluator-bit order
  std::vector<Block> evaluator_label0() const;
  // Garble the next global cycle. `g` holds every garbler bit of the program.
  // Appends AND tables (32 bytes each, gate order) and the active labels of the
  // garbler and constant slots of this cycle (list order), preceded at a
  // stage's first cycle by the register-init labels.
  void garble_next(const std::vector<uint8_t>& g, std::vector<uint8_t>& tables, std::vector<Block>& labels);
  // label0 of the program outputs (valid once all cycles are done)
  const std::vector<Block>& output_label0() const { return outs_.back(); }

 private:
  void begin_stage();

  const Program& p_;
  LabelSource src_;
  std::vector<Schedule> sched_;
  std::vector<uint32_t> g_off_, e_off_;
  uint64_t total_cycles_ = 0, done_ = 0;
  size_t stage_ = 0;
  uint32_t cycle_ = 0;
  std::vector<Block> w0_;  // label0 per wire of the current stage
  std::vector<Block> dreg_;
  std::vector<std::vector<Block>> outs_;  // label0 of outputs per stage
};

class ProgramEvaluator {
 public:
  // e_labels: active label of every evaluator slot (program-wide order)
  ProgramEvaluator(const Program& p, std::vector<Block> e_labels);

  uint64_t total_cycles() const { return total_cycles_; }
  uint64_t cycles_done() const { return done_; }
  // Throws MalformedTables when sizes do not match the cycle.
  void evaluate_next(std::span<const uint8_t> tables, std::span<const Block> labels);
  const std::vector<Block>& output_labels() const { return outs_.back(); }
  // expected sizes for the next cycle
  size_t next_table_bytes() const;
  size_t next_label_count() const;

 private:
  void begin_stage();

  const Program& p_;
  std::vector<Block> e_;
  std::vector<Schedule> sched_;
  std::vector<uint32_t> e_off_;
  std::vector<uint64_t> and_count_;
  uint64_t total_cycles_ = 0, done_ = 0;
  size_t stage_ = 0;
  uint32_t cycle_ = 0;
  std::vector<Block> w_;
  std::vector<Block> dreg_;
  std::vector<std::vector<Block>> outs_;
};

// Throws InvalidLabel if a label is neither label0 nor label0^R.
std::vector<uint8_t> decode_outputs(const std::vector<Block>& label0, Block R, const std::vector<Block>& received);

// Local garble + evaluate of a whole program (tests and selftest).
std::vector<uint8_t> garble_and_evaluate(const Program& p, const std::vector<uint8_t>& g, const std::vector<uint8_t>& e,
                                         Block seed, uint64_t* table_bytes = nullptr);

std::string to_hex(Block b);

}  // namespace gcinfer
