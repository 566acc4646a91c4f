#pragma once

#include <cstdint>
#include <vector>

#include "gcinfer/netlist.hpp"

namespace gcinfer {

using Wire = uint32_t;
using Bits = std::vector<Wire>;  // LSB first
inline constexpr Wire kNoWire = UINT32_MAX;

// Emits gates in topological order. Gates whose result is fixed by a
// constant operand are folded away. With record=false only counts are kept.
class Builder {
 public:
  explicit Builder(bool record = true) : record_(record) {}

  Wire zero();
  Wire one();
  Wire constant(bool v) { return v ? one() : zero(); }
  Bits constant(uint64_t value, size_t n);
  int const_value(Wire w) const { return w == zero_ ? 0 : w == one_ ? 1 : -1; }

  Wire input(Party p, uint32_t cycle = 0);
  Bits inputs(Party p, size_t n, uint32_t cycle = 0);
  void add_slot(Wire w, Party p, uint32_t cycle);
  Wire link(uint32_t cycle, uint32_t src_stage, uint32_t src_output);
  void add_link(Wire w, uint32_t cycle, uint32_t src_stage, uint32_t src_output);

  Wire reg(uint8_t init = 0);
  void set_d(Wire q, Wire d);

  Wire XOR(Wire a, Wire b);
  Wire XNOR(Wire a, Wire b);
  Wire AND(Wire a, Wire b);
  Wire OR(Wire a, Wire b);
  Wire NOT(Wire a);
  Wire BUF(Wire a);

  uint32_t output(Wire w, uint32_t cycle = 0);
  void outputs(const Bits& b, uint32_t cycle = 0) {
    for (auto w : b) output(w, cycle);
  }

  GateStats stats() const { return {xor_, nonxor_}; }
  uint32_t num_wires() const { return nwires_; }
  uint32_t num_outputs() const { return nout_; }
  Netlist finish(uint32_t cycles = 1);

 private:
  Wire fresh() { return nwires_++; }
  Wire gate(GateKind k, Wire a, Wire b);

  bool record_;
  uint32_t nwires_ = 0, nout_ = 0;
  Wire zero_ = kNoWire, one_ = kNoWire;
  uint64_t xor_ = 0, nonxor_ = 0;
  Netlist n_;
};

}  // namespace gcinfer
