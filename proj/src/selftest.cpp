#include "gcinfer/selftest.hpp"

#include "gcinfer/activation.hpp"
#include "gcinfer/garble.hpp"
#include "gcinfer/gclib.hpp"
#include "gcinfer/simulate.hpp"

namespace gcinfer {

Netlist random_netlist(std::mt19937_64& rng, size_t max_gates, uint32_t cycles) {
  Netlist n;
  n.cycles = cycles;
  auto pick = [&](uint64_t k) { return uint32_t(rng() % k); };
  const uint32_t n_in = 2 + pick(7);
  for (uint32_t i = 0; i < n_in; ++i) {
    Party p = pick(8) == 0 ? (pick(2) ? Party::Const1 : Party::Const0) : (pick(2) ? Party::Garbler : Party::Evaluator);
    n.inputs.push_back({n.num_wires, 0, p});
    for (uint32_t c = 1; c < cycles; ++c)
      if (p != Party::Const0 && p != Party::Const1 && pick(2)) n.inputs.push_back({n.num_wires, c, p});
    ++n.num_wires;
  }
  const uint32_t n_reg = cycles > 1 ? 1 + pick(4) : 0;
  for (uint32_t r = 0; r < n_reg; ++r) n.registers.push_back({0, n.num_wires++, uint8_t(pick(2))});
  const size_t n_gates = 1 + rng() % max_gates;
  for (size_t g = 0; g < n_gates; ++g) {
    Gate gt;
    gt.kind = GateKind(pick(6));
    gt.in0 = pick(n.num_wires);
    gt.in1 = is_unary(gt.kind) ? gt.in0 : pick(n.num_wires);
    gt.out = n.num_wires++;
    n.gates.push_back(gt);
  }
  for (auto& r : n.registers) r.d = pick(n.num_wires);
  const uint32_t n_out = 1 + pick(8);
  for (uint32_t o = 0; o < n_out; ++o) n.outputs.push_back({pick(n.num_wires), pick(cycles)});
  return n;
}

namespace {

SelftestResult check_program(const std::string& name, const Program& p, std::mt19937_64& rng, size_t trials) {
  SelftestResult r{name, true, ""};
  auto pc = party_counts(p);
  const uint64_t bits = pc.garbler + pc.evaluator;
  const bool exhaustive = bits <= 10;
  const size_t n = exhaustive ? (size_t(1) << bits) : trials;
  std::vector<std::vector<uint8_t>> g(n, std::vector<uint8_t>(pc.garbler)), e(n, std::vector<uint8_t>(pc.evaluator));
  for (size_t t = 0; t < n; ++t) {
    for (size_t k = 0; k < pc.garbler; ++k) g[t][k] = exhaustive ? (t >> k) & 1 : rng() & 1;
    for (size_t k = 0; k < pc.evaluator; ++k) e[t][k] = exhaustive ? (t >> (pc.garbler + k)) & 1 : rng() & 1;
  }
  auto want = simulate_batch(p, g, e);
  for (size_t t = 0; t < n; ++t) {
    Block seed = Block::from_u64(rng(), rng());
    auto got = garble_and_evaluate(p, g[t], e[t], seed);
    if (got != want[t]) {
      r.ok = false;
      r.detail = "mismatch at assignment " + std::to_string(t);
      return r;
    }
  }
  r.detail = std::to_string(n) + (exhaustive ? " assignments (exhaustive)" : " random assignments");
  return r;
}

Program one(const Netlist& n) {
  Program p;
  p.stages.push_back(n);
  return p;
}

}  // namespace

std::vector<SelftestResult> run_selftest(uint64_t seed, size_t trials,
                                         const std::function<void(const SelftestResult&)>& progress) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::string, ComponentHandle>> comps;
  comps.emplace_back("add4", build_add(4));
  comps.emplace_back("add16", build_add(16));
  comps.emplace_back("sub16", build_sub(16));
  comps.emplace_back("cmp5", build_cmp(5));
  comps.emplace_back("cmp16", build_cmp(16));
  comps.emplace_back("mux1", build_mux(1));
  comps.emplace_back("mux16", build_mux(16));
  comps.emplace_back("relu", build_relu());
  comps.emplace_back("mult", build_mult_truncated());
  comps.emplace_back("div", build_div());
  for (auto v : {ActVariant::LUT, ActVariant::Reduced, ActVariant::PiecewiseLinear, ActVariant::CORDIC}) {
    comps.emplace_back(to_string(Activation{ActFn::Tanh, v}), build_tanh(v));
    comps.emplace_back(to_string(Activation{ActFn::Sigmoid, v}), build_sigmoid(v));
  }
  comps.emplace_back("cordic", build_cordic_hyperbolic());
  comps.emplace_back("argmax10", build_argmax(10));
  comps.emplace_back("matvec3x2", build_matvec(3, 2));
  std::vector<SelftestResult> out;
  auto push = [&](SelftestResult r) {
    if (progress) progress(r);
    out.push_back(std::move(r));
  };
  for (const auto& [name, h] : comps) push(check_program(name, one(h.netlist), rng, trials));
  bool all = true;
  std::string detail;
  for (int i = 0; i < 50; ++i) {
    uint32_t cycles = i % 2 ? 1 + uint32_t(rng() % 4) : 1;
    Netlist n = random_netlist(rng, 64, cycles);
    auto r = check_program("random" + std::to_string(i), one(n), rng, trials);
    if (!r.ok) all = false, detail = r.name + ": " + r.detail;
  }
  push({"random-netlists-50", all, all ? "50 netlists" : detail});
  return out;
}

}  // namespace gcinfer
