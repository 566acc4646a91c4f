#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gcinfer {

enum class GateKind : uint8_t { XOR, XNOR, AND, OR, NOT, BUF };
enum class Party : uint8_t { Garbler, Evaluator, Const0, Const1 };

inline bool is_free(GateKind k) { return k != GateKind::AND && k != GateKind::OR; }
inline bool is_unary(GateKind k) { return k == GateKind::NOT || k == GateKind::BUF; }
const char* to_string(GateKind k);

struct Gate {
  uint32_t in0 = 0, in1 = 0, out = 0;
  GateKind kind = GateKind::XOR;
};

// An input wire takes a new value at every cycle it has a slot for and
// keeps it otherwise. Its first slot must be at cycle 0.
struct InputSlot {
  uint32_t wire = 0, cycle = 0;
  Party party = Party::Garbler;
};

// Input slot fed by output `src_output` of an earlier stage (multi-stage programs only).
struct Link {
  uint32_t wire = 0, cycle = 0, src_stage = 0, src_output = 0;
};

struct Register {
  uint32_t d = 0, q = 0;
  uint8_t init = 0;
};

struct OutputSlot {
  uint32_t wire = 0, cycle = 0;
};

struct GateStats {
  uint64_t xor_count = 0, nonxor_count = 0;
  uint64_t total() const { return xor_count + nonxor_count; }
  GateStats& operator+=(const GateStats& o) {
    xor_count += o.xor_count, nonxor_count += o.nonxor_count;
    return *this;
  }
  friend GateStats operator+(GateStats a, const GateStats& b) { return a += b; }
  friend GateStats operator*(GateStats a, uint64_t c) { return {a.xor_count * c, a.nonxor_count * c}; }
  friend bool operator==(const GateStats&, const GateStats&) = default;
};

struct Netlist {
  uint32_t num_wires = 0;
  uint32_t cycles = 1;
  std::vector<Gate> gates;
  std::vector<InputSlot> inputs;
  std::vector<Link> links;
  std::vector<Register> registers;
  std::vector<OutputSlot> outputs;
  friend bool operator==(const Netlist&, const Netlist&);
};

// Ordered stages; outputs of the last stage are the program outputs.
struct Program {
  std::vector<Netlist> stages;
  uint64_t total_cycles() const;
};

// Throws Error(CyclicCombinationalPath | MultipleDrivers | DanglingWire | ParseError).
void validate(const Netlist& n);
void validate(const Program& p);

GateStats stats_per_cycle(const Netlist& n);
GateStats stats(const Netlist& n);
GateStats stats(const Program& p);

std::string serialize(const Netlist& n);
std::string serialize(const Program& p, const std::vector<std::string>& meta = {});
// `meta` receives the payload of `#@` comment lines
Program parse_program(const std::string& text, std::vector<std::string>* meta = nullptr);
Netlist parse_netlist(const std::string& text);
Program load_program(const std::string& path, std::vector<std::string>* meta = nullptr);
void save_program(const Program& p, const std::string& path, const std::vector<std::string>& meta = {});

// Per-cycle index lists (CSR) for inputs, links and outputs, plus the rank of
// every input slot among slots of the same party class in list order.
struct Schedule {
  std::vector<uint32_t> in_off, in_idx;
  std::vector<uint32_t> link_off, link_idx;
  std::vector<uint32_t> out_off, out_idx;
  std::vector<uint32_t> slot_rank;  // G slots and E slots ranked separately; constants get rank among constants
  uint32_t n_garbler = 0, n_evaluator = 0, n_const = 0;
};
Schedule make_schedule(const Netlist& n);

// disjoint union (wires of b renumbered after a's); outputs concatenated
Netlist compose(const Netlist& a, const Netlist& b);

// Sequential netlist -> combinational one with c copies (registers wired through).
Netlist unroll(const Netlist& n);

}  // namespace gcinfer
