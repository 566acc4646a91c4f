#include "gcinfer/simulate.hpp"

#include <algorithm>

#include "gcinfer/error.hpp"

namespace gcinfer {

namespace {

template <class T>
constexpr T all_ones() {
  return static_cast<T>(~T(0));
}

template <class T>
T eval_gate(GateKind k, T a, T b) {
  switch (k) {
    case GateKind::XOR: return a ^ b;
    case GateKind::XNOR: return static_cast<T>(~(a ^ b));
    case GateKind::AND: return a & b;
    case GateKind::OR: return a | b;
    case GateKind::NOT: return static_cast<T>(~a);
    case GateKind::BUF: return a;
  }
  return a;
}

template <class T>
T mask(T v) {
  if constexpr (sizeof(T) == 1) return v & 1;
  else return v;
}

template <class T>
std::vector<T> run_stage(const Netlist& n, const Schedule& s, const std::vector<T>& g, size_t& gi,
                         const std::vector<T>& e, size_t& ei, const std::vector<std::vector<T>>& prior) {
  std::vector<T> val(n.num_wires, T(0)), dv(n.registers.size());
  std::vector<T> out(n.outputs.size());
  for (uint32_t c = 0; c < n.cycles; ++c) {
    for (uint32_t k = s.in_off[c]; k < s.in_off[c + 1]; ++k) {
      uint32_t i = s.in_idx[k];
      const auto& slot = n.inputs[i];
      switch (slot.party) {
        case Party::Garbler: val[slot.wire] = g.at(gi + s.slot_rank[i]); break;
        case Party::Evaluator: val[slot.wire] = e.at(ei + s.slot_rank[i]); break;
        case Party::Const0: val[slot.wire] = T(0); break;
        case Party::Const1: val[slot.wire] = mask(all_ones<T>()); break;
      }
    }
    for (uint32_t k = s.link_off[c]; k < s.link_off[c + 1]; ++k) {
      const auto& l = n.links[s.link_idx[k]];
      val[l.wire] = prior.at(l.src_stage).at(l.src_output);
    }
    for (size_t r = 0; r < n.registers.size(); ++r)
      val[n.registers[r].q] = c == 0 ? (n.registers[r].init ? mask(all_ones<T>()) : T(0)) : dv[r];
    for (const auto& gt : n.gates) val[gt.out] = mask(eval_gate<T>(gt.kind, val[gt.in0], val[gt.in1]));
    for (uint32_t k = s.out_off[c]; k < s.out_off[c + 1]; ++k) out[s.out_idx[k]] = val[n.outputs[s.out_idx[k]].wire];
    for (size_t r = 0; r < n.registers.size(); ++r) dv[r] = val[n.registers[r].d];
  }
  gi += s.n_garbler;
  ei += s.n_evaluator;
  return out;
}

template <class T>
std::vector<T> run_program(const Program& p, const std::vector<T>& g, const std::vector<T>& e) {
  auto pc = party_counts(p);
  if (g.size() != pc.garbler || e.size() != pc.evaluator)
    throw Error(Errc::ShapeMismatch, "input bit count does not match the program");
  std::vector<std::vector<T>> outs;
  size_t gi = 0, ei = 0;
  for (const auto& st : p.stages) outs.push_back(run_stage<T>(st, make_schedule(st), g, gi, e, ei, outs));
  return outs.empty() ? std::vector<T>{} : outs.back();
}

}  // namespace

PartyCounts party_counts(const Program& p) {
  PartyCounts c;
  for (const auto& st : p.stages)
    for (const auto& s : st.inputs) {
      if (s.party == Party::Garbler) ++c.garbler;
      else if (s.party == Party::Evaluator) ++c.evaluator;
    }
  return c;
}

std::vector<uint8_t> simulate(const Program& p, const std::vector<uint8_t>& g, const std::vector<uint8_t>& e) {
  return run_program<uint8_t>(p, g, e);
}

std::vector<uint8_t> simulate(const Netlist& n, const std::vector<uint8_t>& g, const std::vector<uint8_t>& e) {
  Program p;
  p.stages.push_back(n);
  return simulate(p, g, e);
}

std::vector<uint64_t> simulate64(const Program& p, const std::vector<uint64_t>& g, const std::vector<uint64_t>& e) {
  return run_program<uint64_t>(p, g, e);
}

std::vector<std::vector<uint8_t>> simulate_batch(const Program& p, const std::vector<std::vector<uint8_t>>& g,
                                                 const std::vector<std::vector<uint8_t>>& e, bool parallel) {
  if (g.size() != e.size()) throw Error(Errc::BatchSizeMismatch, "garbler and evaluator batches differ");
  const size_t N = g.size();
  std::vector<std::vector<uint8_t>> out(N);
  if (!parallel) {
    for (size_t i = 0; i < N; ++i) out[i] = simulate(p, g[i], e[i]);
    return out;
  }
  auto pc = party_counts(p);
  for (size_t i = 0; i < N; ++i)
    if (g[i].size() != pc.garbler || e[i].size() != pc.evaluator)
      throw Error(Errc::ShapeMismatch, "input bit count does not match the program");
  const long blocks = long((N + 63) / 64);
#pragma omp parallel for schedule(dynamic)
  for (long blk = 0; blk < blocks; ++blk) {
    size_t lo = size_t(blk) * 64, hi = std::min(N, lo + 64);
    std::vector<uint64_t> gs(pc.garbler, 0), es(pc.evaluator, 0);
    for (size_t i = lo; i < hi; ++i) {
      for (size_t k = 0; k < gs.size(); ++k) gs[k] |= uint64_t(g[i][k] & 1) << (i - lo);
      for (size_t k = 0; k < es.size(); ++k) es[k] |= uint64_t(e[i][k] & 1) << (i - lo);
    }
    auto r = simulate64(p, gs, es);
    for (size_t i = lo; i < hi; ++i) {
      out[i].resize(r.size());
      for (size_t k = 0; k < r.size(); ++k) out[i][k] = uint8_t((r[k] >> (i - lo)) & 1);
    }
  }
  return out;
}

void put_bits(std::vector<uint8_t>& v, size_t at, uint64_t x, size_t n) {
  if (v.size() < at + n) v.resize(at + n);
  for (size_t i = 0; i < n; ++i) v[at + i] = uint8_t((x >> i) & 1);
}

uint64_t get_bits(const std::vector<uint8_t>& v, size_t at, size_t n) {
  uint64_t x = 0;
  for (size_t i = 0; i < n; ++i) x |= uint64_t(v.at(at + i) & 1) << i;
  return x;
}

int64_t get_signed(const std::vector<uint8_t>& v, size_t at, size_t n) {
  uint64_t x = get_bits(v, at, n);
  if (n < 64 && ((x >> (n - 1)) & 1)) x |= ~uint64_t(0) << n;
  return int64_t(x);
}

}  // namespace gcinfer
