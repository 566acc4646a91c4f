#include "gcinfer/builder.hpp"

#include "gcinfer/error.hpp"

namespace gcinfer {

Wire Builder::zero() {
  if (zero_ == kNoWire) {
    zero_ = fresh();
    add_slot(zero_, Party::Const0, 0);
  }
  return zero_;
}

Wire Builder::one() {
  if (one_ == kNoWire) {
    one_ = fresh();
    add_slot(one_, Party::Const1, 0);
  }
  return one_;
}

Bits Builder::constant(uint64_t value, size_t n) {
  Bits b(n);
  for (size_t i = 0; i < n; ++i) b[i] = constant(i < 64 && ((value >> i) & 1));
  return b;
}

Wire Builder::input(Party p, uint32_t cycle) {
  Wire w = fresh();
  add_slot(w, p, cycle);
  return w;
}

Bits Builder::inputs(Party p, size_t n, uint32_t cycle) {
  Bits b(n);
  for (auto& w : b) w = input(p, cycle);
  return b;
}

void Builder::add_slot(Wire w, Party p, uint32_t cycle) {
  if (record_) n_.inputs.push_back({w, cycle, p});
}

Wire Builder::link(uint32_t cycle, uint32_t src_stage, uint32_t src_output) {
  Wire w = fresh();
  add_link(w, cycle, src_stage, src_output);
  return w;
}

void Builder::add_link(Wire w, uint32_t cycle, uint32_t src_stage, uint32_t src_output) {
  if (record_) n_.links.push_back({w, cycle, src_stage, src_output});
}

Wire Builder::reg(uint8_t init) {
  Wire q = fresh();
  if (record_) n_.registers.push_back({kNoWire, q, init});
  return q;
}

void Builder::set_d(Wire q, Wire d) {
  if (!record_) return;
  for (auto& r : n_.registers)
    if (r.q == q) {
      r.d = d;
      return;
    }
  throw Error(Errc::InvalidArgument, "set_d on unknown register");
}

Wire Builder::gate(GateKind k, Wire a, Wire b) {
  Wire o = fresh();
  (is_free(k) ? xor_ : nonxor_)++;
  if (record_) n_.gates.push_back({a, b, o, k});
  return o;
}

Wire Builder::XOR(Wire a, Wire b) {
  int ca = const_value(a), cb = const_value(b);
  if (ca == 0) return b;
  if (cb == 0) return a;
  if (ca == 1) return NOT(b);
  if (cb == 1) return NOT(a);
  if (a == b) return zero();
  return gate(GateKind::XOR, a, b);
}

Wire Builder::XNOR(Wire a, Wire b) {
  int ca = const_value(a), cb = const_value(b);
  if (ca == 1) return b;
  if (cb == 1) return a;
  if (ca == 0) return NOT(b);
  if (cb == 0) return NOT(a);
  if (a == b) return one();
  return gate(GateKind::XNOR, a, b);
}

Wire Builder::AND(Wire a, Wire b) {
  int ca = const_value(a), cb = const_value(b);
  if (ca == 0 || cb == 0) return zero();
  if (ca == 1) return b;
  if (cb == 1) return a;
  if (a == b) return a;
  return gate(GateKind::AND, a, b);
}

Wire Builder::OR(Wire a, Wire b) {
  int ca = const_value(a), cb = const_value(b);
  if (ca == 1 || cb == 1) return one();
  if (ca == 0) return b;
  if (cb == 0) return a;
  if (a == b) return a;
  return gate(GateKind::OR, a, b);
}

Wire Builder::NOT(Wire a) {
  int ca = const_value(a);
  if (ca >= 0) return constant(ca == 0);
  return gate(GateKind::NOT, a, a);
}

Wire Builder::BUF(Wire a) { return gate(GateKind::BUF, a, a); }

uint32_t Builder::output(Wire w, uint32_t cycle) {
  if (record_) n_.outputs.push_back({w, cycle});
  return nout_++;
}

Netlist Builder::finish(uint32_t cycles) {
  for (const auto& r : n_.registers)
    if (r.d == kNoWire) throw Error(Errc::DanglingWire, "register without d wire");
  n_.num_wires = nwires_;
  n_.cycles = cycles;
  return std::move(n_);
}

}  // namespace gcinfer
