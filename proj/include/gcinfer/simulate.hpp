#pragma once

#include <cstdint>
#include <vector>

#include "gcinfer/netlist.hpp"

namespace gcinfer {

// Plaintext evaluation. Garbler and evaluator bits are consumed stage by
// stage, each stage's slots of that party in list order. The result holds the
// last stage's outputs in list order.
std::vector<uint8_t> simulate(const Program& p, const std::vector<uint8_t>& g, const std::vector<uint8_t>& e);
std::vector<uint8_t> simulate(const Netlist& n, const std::vector<uint8_t>& g, const std::vector<uint8_t>& e);

// 64 assignments at once, one per bit lane.
std::vector<uint64_t> simulate64(const Program& p, const std::vector<uint64_t>& g, const std::vector<uint64_t>& e);

// Batch of independent assignments. parallel=false is a plain loop over simulate().
std::vector<std::vector<uint8_t>> simulate_batch(const Program& p, const std::vector<std::vector<uint8_t>>& g,
                                                 const std::vector<std::vector<uint8_t>>& e, bool parallel = true);

// Slot counts summed over stages.
struct PartyCounts {
  uint64_t garbler = 0, evaluator = 0;
};
PartyCounts party_counts(const Program& p);

// Pack an integer into / read one out of a bit vector (LSB first).
void put_bits(std::vector<uint8_t>& v, size_t at, uint64_t x, size_t n);
uint64_t get_bits(const std::vector<uint8_t>& v, size_t at, size_t n);
int64_t get_signed(const std::vector<uint8_t>& v, size_t at, size_t n);

}  // namespace gcinfer
