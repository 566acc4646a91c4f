#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gcinfer/compile.hpp"
#include "gcinfer/netlist.hpp"

namespace gcinfer {

struct CostParams {
  double f_cpu = 3.4e9;     // Hz
  double clk_xor = 62;      // cycles per XOR-family gate
  double clk_nonxor = 164;  // cycles per AND/OR
  uint32_t n_bits = 128;    // label length
  std::optional<double> bw_net;  // bits/s; no transfer time without it
  void validate() const;    // InvalidArgument unless all strictly positive
};

struct LayerCost {
  std::string label;  // e.g. "0:FC 784x300"
  GateStats gates;
  GateStats mult, add, act, other;  // split of `gates` by operation
  double t_comp = 0;
};

struct CostReport {
  uint64_t xor_count = 0, nonxor_count = 0;
  double t_comp = 0;  // s
  uint64_t comm_bytes = 0;
  std::optional<double> t_comm;  // s
  // beta_opr per operation, summed over layers
  double beta_mult = 0, beta_add = 0, beta_act = 0, beta_other = 0;
  std::vector<LayerCost> layers;
};

CostReport estimate(const GateStats& s, const CostParams& p = {});

// analytic: closed form from per-component counts. Otherwise totals come from
// the compiler; the per-layer split is the analytic one in both cases.
CostReport estimate_model(const ModelDescriptor& m, CompileMode mode, bool analytic, const CostParams& p = {});

// Closed-form counts without building the netlist.
GateStats analytic_stats(const ModelDescriptor& m, CompileMode mode);

// Gate counts of one activation instance.
GateStats activation_stats(Activation a);

struct PublishedBenchmark {
  std::string name, architecture;
  uint64_t xor_count, nonxor_count;
  double comm_mb, comp_seconds, exec_seconds;
};
const std::vector<PublishedBenchmark>& published_benchmarks();

std::string cost_report_json(const CostReport& r, const CostParams& p, int indent = -1);

}  // namespace gcinfer
