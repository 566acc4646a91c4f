#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcinfer/model.hpp"
#include "gcinfer/netlist.hpp"

namespace gcinfer {

enum class CompileMode : uint8_t { Unrolled, Folded };
const char* to_string(CompileMode m);
CompileMode parse_compile_mode(const std::string& s);

// Evaluator bit ids: flat parameter index * 16 + bit. Share bits (outsourced
// mode) carry kShareTag and index the data bit instead.
inline constexpr uint32_t kShareTag = 0x80000000u;

struct CompiledCircuit {
  Program program;
  CompileMode mode = CompileMode::Unrolled;
  bool outsourced = false;
  uint32_t data_inputs = 0;  // Fixed16 elements of x
  uint32_t classes = 0;
  std::vector<uint32_t> garbler_map;    // G slot rank -> data bit (elem*16+bit)
  std::vector<uint32_t> evaluator_map;  // E slot rank -> parameter bit or share bit
  std::vector<uint32_t> output_map;     // output index -> bit of the class label
  std::string digest;

  std::vector<std::string> meta() const;
};

// Weights then bias of every layer, in layer order. Masked entries keep their
// position but are never referenced.
FxVec flat_parameters(const ModelDescriptor& m);

std::string model_digest(const ModelDescriptor& m, CompileMode mode, bool outsourced);

CompiledCircuit compile(const ModelDescriptor& m, CompileMode mode, bool outsourced = false);
// Gate totals without materialising the netlist (unrolled) or via compile (folded).
GateStats compile_stats(const ModelDescriptor& m, CompileMode mode, bool outsourced = false);

void save_compiled(const CompiledCircuit& c, const std::string& path);
CompiledCircuit load_compiled(const std::string& path);
CompiledCircuit parse_compiled(const std::string& text);

// Garbler bits from data x (direct) or the share s (outsourced).
std::vector<uint8_t> garbler_inputs(const CompiledCircuit& c, const FxVec& x);
// Evaluator bits from model parameters, plus x^s when outsourced.
std::vector<uint8_t> evaluator_inputs(const CompiledCircuit& c, const ModelDescriptor& m,
                                      const FxVec& masked_x = {});
size_t decode_label(const CompiledCircuit& c, const std::vector<uint8_t>& out_bits);

// Per-layer masks (empty entry = leave layer unchanged).
ModelDescriptor apply_sparsity(const ModelDescriptor& m, const std::vector<std::vector<uint8_t>>& masks);

}  // namespace gcinfer
