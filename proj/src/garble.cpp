#include "gcinfer/garble.hpp"

#include <wmmintrin.h>

#include <cstdio>

#include "gcinfer/error.hpp"

namespace gcinfer {

namespace {

inline __m128i expand_step(__m128i key, __m128i gen) {
  gen = _mm_shuffle_epi32(gen, 0xff);
  key = _mm_xor_si128(key, _mm_slli_si128(key, 4));
  key = _mm_xor_si128(key, _mm_slli_si128(key, 4));
  key = _mm_xor_si128(key, _mm_slli_si128(key, 4));
  return _mm_xor_si128(key, gen);
}

#define GC_EXPAND(i, rcon) rk_[i] = expand_step(rk_[i - 1], _mm_aeskeygenassist_si128(rk_[i - 1], rcon))

const Aes& fixed_cipher() {
  static const Aes aes(Block::from_u64(0x6a09e667f3bcc908ull, 0xbb67ae8584caa73bull));
  return aes;
}

inline Block fixed_hash(Block L, Block t) {
  Block d = dbl(L);
  return fixed_cipher().enc(d ^ t) ^ d;
}

// four hashes with interleaved AES rounds
inline void fixed_hash4(const Block* L, const Block* t, Block* out) {
  Block d[4], x[4];
  for (int i = 0; i < 4; ++i) d[i] = dbl(L[i]), x[i] = d[i] ^ t[i];
  fixed_cipher().enc4(x);
  for (int i = 0; i < 4; ++i) out[i] = x[i] ^ d[i];
}

inline uint64_t gate_id(size_t stage, size_t g) { return (uint64_t(stage) << 40) | uint64_t(g); }

std::vector<uint32_t> party_offsets(const Program& p, Party party) {
  std::vector<uint32_t> off;
  uint32_t acc = 0;
  for (const auto& st : p.stages) {
    off.push_back(acc);
    for (const auto& s : st.inputs) acc += s.party == party ? 1 : 0;
  }
  return off;
}

}  // namespace

Aes::Aes(Block key) {
  rk_[0] = key.v;
  GC_EXPAND(1, 0x01);
  GC_EXPAND(2, 0x02);
  GC_EXPAND(3, 0x04);
  GC_EXPAND(4, 0x08);
  GC_EXPAND(5, 0x10);
  GC_EXPAND(6, 0x20);
  GC_EXPAND(7, 0x40);
  GC_EXPAND(8, 0x80);
  GC_EXPAND(9, 0x1b);
  GC_EXPAND(10, 0x36);
}

Block Aes::enc(Block x) const {
  __m128i s = _mm_xor_si128(x.v, rk_[0]);
  for (int r = 1; r < 10; ++r) s = _mm_aesenc_si128(s, rk_[r]);
  return Block(_mm_aesenclast_si128(s, rk_[10]));
}

void Aes::enc4(Block* x) const {
  __m128i a = _mm_xor_si128(x[0].v, rk_[0]), b = _mm_xor_si128(x[1].v, rk_[0]);
  __m128i c = _mm_xor_si128(x[2].v, rk_[0]), d = _mm_xor_si128(x[3].v, rk_[0]);
  for (int r = 1; r < 10; ++r) {
    a = _mm_aesenc_si128(a, rk_[r]);
    b = _mm_aesenc_si128(b, rk_[r]);
    c = _mm_aesenc_si128(c, rk_[r]);
    d = _mm_aesenc_si128(d, rk_[r]);
  }
  x[0] = Block(_mm_aesenclast_si128(a, rk_[10]));
  x[1] = Block(_mm_aesenclast_si128(b, rk_[10]));
  x[2] = Block(_mm_aesenclast_si128(c, rk_[10]));
  x[3] = Block(_mm_aesenclast_si128(d, rk_[10]));
}

Block dbl(Block x) {
  uint64_t lo = x.lo(), hi = x.hi();
  uint64_t nhi = (hi << 1) | (lo >> 63);
  uint64_t nlo = (lo << 1) ^ ((hi >> 63) ? 0x87ull : 0ull);
  return Block::from_u64(nlo, nhi);
}

Block hash(Block label, Block t) { return fixed_hash(label, t); }

Block tweak(uint64_t gid, uint32_t cycle, uint32_t half) {
  return Block::from_u64(gid, (uint64_t(cycle) << 32) | half);
}

LabelSource::LabelSource(Block seed) : prf_(seed) {
  R_ = prf_.enc(Block::from_u64(0, 0xFFFFFFFFFFFFFFFFull)) | Block::from_u64(1, 0);
}

Block LabelSource::label0(uint32_t global_cycle, uint32_t wire, uint32_t domain) const {
  return prf_.enc(Block::from_u64((uint64_t(global_cycle) << 32) | wire, domain));
}

// ---------------------------------------------------------------------------

ProgramGarbler::ProgramGarbler(const Program& p, Block seed) : p_(p), src_(seed) {
  for (const auto& st : p.stages) {
    sched_.push_back(make_schedule(st));
    total_cycles_ += st.cycles;
    outs_.emplace_back(st.outputs.size());
  }
  g_off_ = party_offsets(p, Party::Garbler);
  e_off_ = party_offsets(p, Party::Evaluator);
  if (!p.stages.empty()) begin_stage();
}

void ProgramGarbler::begin_stage() {
  const auto& n = p_.stages[stage_];
  w0_.assign(n.num_wires, Block());
  dreg_.assign(n.registers.size(), Block());
  cycle_ = 0;
}

std::vector<Block> ProgramGarbler::evaluator_label0() const {
  std::vector<Block> out;
  uint64_t base = 0;
  for (size_t s = 0; s < p_.stages.size(); ++s) {
    const auto& n = p_.stages[s];
    const auto& sc = sched_[s];
    std::vector<Block> part(sc.n_evaluator);
    for (size_t i = 0; i < n.inputs.size(); ++i)
      if (n.inputs[i].party == Party::Evaluator)
        part[sc.slot_rank[i]] = src_.label0(uint32_t(base + n.inputs[i].cycle), n.inputs[i].wire, uint32_t(2 * s));
    out.insert(out.end(), part.begin(), part.end());
    base += n.cycles;
  }
  return out;
}

void ProgramGarbler::garble_next(const std::vector<uint8_t>& g, std::vector<uint8_t>& tables, std::vector<Block>& labels) {
  if (done_ >= total_cycles_) throw Error(Errc::ProtocolViolation, "garbling past the last cycle");
  const Netlist& n = p_.stages[stage_];
  const Schedule& s = sched_[stage_];
  const Block R = src_.R();
  const uint32_t gcyc = uint32_t(done_), dom = uint32_t(2 * stage_), c = cycle_;
  if (c == 0) {
    for (const auto& r : n.registers) {
      w0_[r.q] = src_.label0(gcyc, r.q, dom + 1);
      labels.push_back(w0_[r.q] ^ select(r.init, R));
    }
  } else {
    for (size_t r = 0; r < n.registers.size(); ++r) w0_[n.registers[r].q] = dreg_[r];
  }
  for (uint32_t k = s.in_off[c]; k < s.in_off[c + 1]; ++k) {
    const uint32_t i = s.in_idx[k];
    const auto& slot = n.inputs[i];
    Block l0 = src_.label0(gcyc, slot.wire, dom);
    w0_[slot.wire] = l0;
    switch (slot.party) {
      case Party::Garbler: labels.push_back(l0 ^ select(g.at(g_off_[stage_] + s.slot_rank[i]) & 1, R)); break;
      case Party::Const0: labels.push_back(l0); break;
      case Party::Const1: labels.push_back(l0 ^ R); break;
      case Party::Evaluator: break;
    }
  }
  for (uint32_t k = s.link_off[c]; k < s.link_off[c + 1]; ++k) {
    const auto& l = n.links[s.link_idx[k]];
    w0_[l.wire] = outs_[l.src_stage][l.src_output];
  }
  const Block* w = w0_.data();
  for (size_t gi = 0; gi < n.gates.size(); ++gi) {
    const Gate& gt = n.gates[gi];
    switch (gt.kind) {
      case GateKind::XOR: w0_[gt.out] = w[gt.in0] ^ w[gt.in1]; break;
      case GateKind::XNOR: w0_[gt.out] = w[gt.in0] ^ w[gt.in1] ^ R; break;
      case GateKind::NOT: w0_[gt.out] = w[gt.in0] ^ R; break;
      case GateKind::BUF: w0_[gt.out] = w[gt.in0]; break;
      case GateKind::AND:
      case GateKind::OR: {
        const bool is_or = gt.kind == GateKind::OR;
        Block A0 = w[gt.in0], B0 = w[gt.in1];
        if (is_or) A0 ^= R, B0 ^= R;
        const bool pa = A0.lsb(), pb = B0.lsb();
        const uint64_t id = gate_id(stage_, gi);
        Block tj = tweak(id, gcyc, 0), tk = tweak(id, gcyc, 1);
        Block in[4] = {A0, A0 ^ R, B0, B0 ^ R}, tw[4] = {tj, tj, tk, tk}, h[4];
        fixed_hash4(in, tw, h);
        Block TG = h[0] ^ h[1] ^ select(pb, R);
        Block WG0 = h[0] ^ select(pa, TG);
        Block TE = h[2] ^ h[3] ^ A0;
        Block WE0 = h[2] ^ select(pb, TE ^ A0);
        Block C0 = WG0 ^ WE0;
        w0_[gt.out] = is_or ? C0 ^ R : C0;
        size_t at = tables.size();
        tables.resize(at + kTableBytes);
        TG.store(&tables[at]);
        TE.store(&tables[at + 16]);
        break;
      }
    }
  }
  for (uint32_t k = s.out_off[c]; k < s.out_off[c + 1]; ++k)
    outs_[stage_][s.out_idx[k]] = w0_[n.outputs[s.out_idx[k]].wire];
  for (size_t r = 0; r < n.registers.size(); ++r) dreg_[r] = w0_[n.registers[r].d];
  ++done_;
  if (++cycle_ == n.cycles && ++stage_ < p_.stages.size()) begin_stage();
}

// ---------------------------------------------------------------------------

ProgramEvaluator::ProgramEvaluator(const Program& p, std::vector<Block> e_labels) : p_(p), e_(std::move(e_labels)) {
  for (const auto& st : p.stages) {
    sched_.push_back(make_schedule(st));
    total_cycles_ += st.cycles;
    outs_.emplace_back(st.outputs.size());
    and_count_.push_back(stats_per_cycle(st).nonxor_count);
  }
  e_off_ = party_offsets(p, Party::Evaluator);
  uint64_t need = 0;
  for (const auto& sc : sched_) need += sc.n_evaluator;
  if (need != e_.size()) throw Error(Errc::BatchSizeMismatch, "evaluator label count does not match the program");
  if (!p.stages.empty()) begin_stage();
}

void ProgramEvaluator::begin_stage() {
  const auto& n = p_.stages[stage_];
  w_.assign(n.num_wires, Block());
  dreg_.assign(n.registers.size(), Block());
  cycle_ = 0;
}

size_t ProgramEvaluator::next_table_bytes() const {
  return done_ < total_cycles_ ? and_count_[stage_] * kTableBytes : 0;
}

size_t ProgramEvaluator::next_label_count() const {
  if (done_ >= total_cycles_) return 0;
  const auto& n = p_.stages[stage_];
  const auto& s = sched_[stage_];
  size_t c = cycle_ == 0 ? n.registers.size() : 0;
  for (uint32_t k = s.in_off[cycle_]; k < s.in_off[cycle_ + 1]; ++k)
    c += n.inputs[s.in_idx[k]].party != Party::Evaluator ? 1 : 0;
  return c;
}

void ProgramEvaluator::evaluate_next(std::span<const uint8_t> tables, std::span<const Block> labels) {
  if (done_ >= total_cycles_) throw Error(Errc::ProtocolViolation, "evaluating past the last cycle");
  if (tables.size() != next_table_bytes())
    throw Error(Errc::MalformedTables, "cycle " + std::to_string(done_) + ": got " + std::to_string(tables.size()) +
                                           " table bytes, expected " + std::to_string(next_table_bytes()));
  if (labels.size() != next_label_count())
    throw Error(Errc::MalformedTables, "cycle " + std::to_string(done_) + ": wrong garbler label count");
  const Netlist& n = p_.stages[stage_];
  const Schedule& s = sched_[stage_];
  const uint32_t gcyc = uint32_t(done_), c = cycle_;
  size_t li = 0;
  if (c == 0) {
    for (const auto& r : n.registers) w_[r.q] = labels[li++];
  } else {
    for (size_t r = 0; r < n.registers.size(); ++r) w_[n.registers[r].q] = dreg_[r];
  }
  for (uint32_t k = s.in_off[c]; k < s.in_off[c + 1]; ++k) {
    const uint32_t i = s.in_idx[k];
    const auto& slot = n.inputs[i];
    w_[slot.wire] = slot.party == Party::Evaluator ? e_[e_off_[stage_] + s.slot_rank[i]] : labels[li++];
  }
  for (uint32_t k = s.link_off[c]; k < s.link_off[c + 1]; ++k) {
    const auto& l = n.links[s.link_idx[k]];
    w_[l.wire] = outs_[l.src_stage][l.src_output];
  }
  const uint8_t* tp = tables.data();
  for (size_t gi = 0; gi < n.gates.size(); ++gi) {
    const Gate& gt = n.gates[gi];
    switch (gt.kind) {
      case GateKind::XOR:
      case GateKind::XNOR: w_[gt.out] = w_[gt.in0] ^ w_[gt.in1]; break;
      case GateKind::NOT:
      case GateKind::BUF: w_[gt.out] = w_[gt.in0]; break;
      case GateKind::AND:
      case GateKind::OR: {
        Block A = w_[gt.in0], B = w_[gt.in1];
        Block TG = Block::load(tp), TE = Block::load(tp + 16);
        tp += kTableBytes;
        const uint64_t id = gate_id(stage_, gi);
        Block WG = fixed_hash(A, tweak(id, gcyc, 0)) ^ select(A.lsb(), TG);
        Block WE = fixed_hash(B, tweak(id, gcyc, 1)) ^ select(B.lsb(), TE ^ A);
        w_[gt.out] = WG ^ WE;
        break;
      }
    }
  }
  for (uint32_t k = s.out_off[c]; k < s.out_off[c + 1]; ++k)
    outs_[stage_][s.out_idx[k]] = w_[n.outputs[s.out_idx[k]].wire];
  for (size_t r = 0; r < n.registers.size(); ++r) dreg_[r] = w_[n.registers[r].d];
  ++done_;
  if (++cycle_ == n.cycles && ++stage_ < p_.stages.size()) begin_stage();
}

std::vector<uint8_t> decode_outputs(const std::vector<Block>& label0, Block R, const std::vector<Block>& received) {
  if (label0.size() != received.size()) throw Error(Errc::InvalidLabel, "output label count mismatch");
  std::vector<uint8_t> bits(label0.size());
  for (size_t i = 0; i < bits.size(); ++i) {
    if (received[i] == label0[i]) bits[i] = 0;
    else if (received[i] == (label0[i] ^ R)) bits[i] = 1;
    else throw Error(Errc::InvalidLabel, "output " + std::to_string(i) + " matches neither label");
  }
  return bits;
}

std::vector<uint8_t> garble_and_evaluate(const Program& p, const std::vector<uint8_t>& g, const std::vector<uint8_t>& e,
                                         Block seed, uint64_t* table_bytes) {
  ProgramGarbler gb(p, seed);
  auto e0 = gb.evaluator_label0();
  if (e0.size() != e.size()) throw Error(Errc::BatchSizeMismatch, "evaluator bit count does not match the program");
  std::vector<Block> ea(e0.size());
  for (size_t i = 0; i < ea.size(); ++i) ea[i] = e0[i] ^ select(e[i] & 1, gb.R());
  ProgramEvaluator ev(p, std::move(ea));
  std::vector<uint8_t> tables;
  std::vector<Block> labels;
  uint64_t bytes = 0;
  while (gb.cycles_done() < gb.total_cycles()) {
    tables.clear();
    labels.clear();
    gb.garble_next(g, tables, labels);
    bytes += tables.size();
    ev.evaluate_next(tables, labels);
  }
  if (table_bytes) *table_bytes = bytes;
  if (p.stages.empty()) return {};
  return decode_outputs(gb.output_label0(), gb.R(), ev.output_labels());
}

std::string to_hex(Block b) {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", (unsigned long long)b.hi(), (unsigned long long)b.lo());
  return buf;
}

}  // namespace gcinfer
