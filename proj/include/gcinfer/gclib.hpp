#pragma once

#include <map>
#include <string>
#include <vector>

#include "gcinfer/activation.hpp"
#include "gcinfer/builder.hpp"

namespace gcinfer {

namespace gc {

struct AddOut {
  Bits sum;
  Wire cout;
};

// Ripple adders, one AND per full adder. Widths must match.
AddOut add(Builder& b, const Bits& x, const Bits& y, Wire cin = kNoWire);
Bits add_wrap(Builder& b, const Bits& x, const Bits& y, Wire cin = kNoWire);
// x - y; borrow = 1 iff x < y (unsigned)
AddOut sub(Builder& b, const Bits& x, const Bits& y);
Bits sub_wrap(Builder& b, const Bits& x, const Bits& y);

Wire lt_unsigned(Builder& b, const Bits& x, const Bits& y);
Wire lt_signed(Builder& b, const Bits& x, const Bits& y);
Wire ge_const(Builder& b, const Bits& x, uint64_t c);

Bits mux(Builder& b, Wire s, const Bits& x, const Bits& y);  // s ? x : y
Bits cond_negate(Builder& b, const Bits& x, Wire s);
Bits shr(Builder& b, const Bits& x, int k, bool arith);       // wiring only
Bits resize(Builder& b, const Bits& x, size_t n, bool sign_extend);

Bits relu(Builder& b, const Bits& x);
Bits mult_q312(Builder& b, const Bits& x, const Bits& y);
Bits div_q312(Builder& b, const Bits& x, const Bits& y);

// Sum of bit columns modulo 2^cols.size(); column k has weight 2^k.
Bits compress_columns(Builder& b, std::vector<std::vector<Wire>> cols);

// values[i] for i < 2^idx.size(), out_bits wide
Bits table(Builder& b, const Bits& idx, const std::vector<uint32_t>& values, size_t out_bits);

struct CordicOut {
  Bits x, y;  // cosh, sinh of z0 at cordic::kFrac fraction bits
};
CordicOut cordic_hyperbolic(Builder& b, const Bits& z0);

Bits activation(Builder& b, Activation a, const Bits& x);

Bits argmax(Builder& b, const std::vector<Bits>& v);
size_t argmax_index_bits(size_t n);

// out_i = sum_j w[i*m+j] * z_j (+ bias_i); an empty weight entry is masked.
std::vector<Bits> matvec(Builder& b, const std::vector<Bits>& z, const std::vector<Bits>& w,
                         const std::vector<Bits>& bias = {});

}  // namespace gc

struct ComponentHandle {
  Netlist netlist;
  std::map<std::string, Bits> inputs;   // wire ids in port order
  std::map<std::string, Bits> outputs;  // output indices in port order
  GateStats declared;
};

// Port values -> garbler/evaluator bit vectors for simulate(); and back.
struct PortBits {
  std::vector<uint8_t> g, e;
};
PortBits encode_ports(const ComponentHandle& h, const std::map<std::string, uint64_t>& values);
uint64_t read_port(const ComponentHandle& h, const std::vector<uint8_t>& out, const std::string& name);

ComponentHandle build_add(size_t n_bits);
ComponentHandle build_sub(size_t n_bits);
ComponentHandle build_mult_truncated(size_t n_bits = 16, size_t frac = 12);
ComponentHandle build_div(size_t n_bits = 16, size_t frac = 12);
ComponentHandle build_cmp(size_t n_bits);
ComponentHandle build_mux(size_t n_bits);
ComponentHandle build_relu();
ComponentHandle build_tanh(ActVariant v);
ComponentHandle build_sigmoid(ActVariant v);
ComponentHandle build_cordic_hyperbolic(size_t precision_bits = 12);
ComponentHandle build_argmax(size_t n_classes, size_t n_bits = 16);
ComponentHandle build_matvec(size_t m, size_t n, const std::vector<uint8_t>& mask = {});

}  // namespace gcinfer
