#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gcinfer/netlist.hpp"

namespace gcinfer {

// Random valid netlist with up to max_gates gates over all gate kinds.
// cycles > 1 adds registers and re-fed input slots.
Netlist random_netlist(std::mt19937_64& rng, size_t max_gates, uint32_t cycles = 1);

struct SelftestResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

// Garbled evaluation vs plaintext simulation for every gclib component and a
// set of random netlists. `trials` random assignments each.
std::vector<SelftestResult> run_selftest(uint64_t seed, size_t trials,
                                         const std::function<void(const SelftestResult&)>& progress = {});

}  // namespace gcinfer
