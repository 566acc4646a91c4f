#include "gcinfer/netlist.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "gcinfer/error.hpp"

namespace gcinfer {

const char* to_string(GateKind k) {
  switch (k) {
    case GateKind::XOR: return "XOR";
    case GateKind::XNOR: return "XNOR";
    case GateKind::AND: return "AND";
    case GateKind::OR: return "OR";
    case GateKind::NOT: return "NOT";
    case GateKind::BUF: return "BUF";
  }
  return "?";
}

bool operator==(const Netlist& a, const Netlist& b) {
  auto geq = [](const Gate& x, const Gate& y) {
    return x.kind == y.kind && x.in0 == y.in0 && x.out == y.out && (is_unary(x.kind) || x.in1 == y.in1);
  };
  if (a.num_wires != b.num_wires || a.cycles != b.cycles || a.gates.size() != b.gates.size() ||
      a.inputs.size() != b.inputs.size() || a.links.size() != b.links.size() ||
      a.registers.size() != b.registers.size() || a.outputs.size() != b.outputs.size())
    return false;
  for (size_t i = 0; i < a.gates.size(); ++i)
    if (!geq(a.gates[i], b.gates[i])) return false;
  for (size_t i = 0; i < a.inputs.size(); ++i)
    if (a.inputs[i].wire != b.inputs[i].wire || a.inputs[i].cycle != b.inputs[i].cycle ||
        a.inputs[i].party != b.inputs[i].party)
      return false;
  for (size_t i = 0; i < a.links.size(); ++i)
    if (a.links[i].wire != b.links[i].wire || a.links[i].cycle != b.links[i].cycle ||
        a.links[i].src_stage != b.links[i].src_stage || a.links[i].src_output != b.links[i].src_output)
      return false;
  for (size_t i = 0; i < a.registers.size(); ++i)
    if (a.registers[i].d != b.registers[i].d || a.registers[i].q != b.registers[i].q ||
        a.registers[i].init != b.registers[i].init)
      return false;
  for (size_t i = 0; i < a.outputs.size(); ++i)
    if (a.outputs[i].wire != b.outputs[i].wire || a.outputs[i].cycle != b.outputs[i].cycle) return false;
  return true;
}

uint64_t Program::total_cycles() const {
  uint64_t c = 0;
  for (const auto& s : stages) c += s.cycles;
  return c;
}

namespace {

enum : uint8_t { kNone = 0, kInput = 1, kReg = 2, kGate = 3 };

[[noreturn]] void fail(Errc e, const std::string& m) { throw Error(e, m); }

}  // namespace

void validate(const Netlist& n) {
  if (n.cycles < 1) fail(Errc::ParseError, "cycles must be >= 1");
  const uint32_t W = n.num_wires;
  auto chk = [&](uint32_t w, const char* what) {
    if (w >= W) fail(Errc::DanglingWire, std::string(what) + " references wire " + std::to_string(w) +
                                             " >= wire count " + std::to_string(W));
  };
  std::vector<uint8_t> drv(W, kNone);
  std::vector<uint32_t> first_cycle(W, UINT32_MAX);
  std::unordered_set<uint64_t> seen;
  auto add_slot = [&](uint32_t w, uint32_t c, const char* what) {
    chk(w, what);
    if (c >= n.cycles) fail(Errc::ParseError, std::string(what) + " cycle " + std::to_string(c) + " out of range");
    if (drv[w] != kNone && drv[w] != kInput)
      fail(Errc::MultipleDrivers, "wire " + std::to_string(w) + " is an input and has another driver");
    drv[w] = kInput;
    if (!seen.insert((uint64_t(w) << 32) | c).second)
      fail(Errc::MultipleDrivers, "wire " + std::to_string(w) + " has two input slots at cycle " + std::to_string(c));
    first_cycle[w] = std::min(first_cycle[w], c);
  };
  for (const auto& s : n.inputs) add_slot(s.wire, s.cycle, "input");
  for (const auto& l : n.links) add_slot(l.wire, l.cycle, "link");
  for (uint32_t w = 0; w < W; ++w)
    if (drv[w] == kInput && first_cycle[w] != 0)
      fail(Errc::DanglingWire, "input wire " + std::to_string(w) + " has no value at cycle 0");
  for (const auto& r : n.registers) {
    chk(r.q, "register q");
    chk(r.d, "register d");
    if (drv[r.q] != kNone) fail(Errc::MultipleDrivers, "register q wire " + std::to_string(r.q) + " already driven");
    drv[r.q] = kReg;
  }
  std::vector<uint32_t> gate_of(W, UINT32_MAX);
  for (uint32_t g = 0; g < n.gates.size(); ++g) {
    const auto& G = n.gates[g];
    chk(G.out, "gate output");
    if (drv[G.out] != kNone)
      fail(Errc::MultipleDrivers, "gate " + std::to_string(g) + " drives wire " + std::to_string(G.out) +
                                      " which already has a driver");
    drv[G.out] = kGate;
    gate_of[G.out] = g;
  }
  for (uint32_t g = 0; g < n.gates.size(); ++g) {
    const auto& G = n.gates[g];
    for (int k = 0; k < (is_unary(G.kind) ? 1 : 2); ++k) {
      uint32_t w = k ? G.in1 : G.in0;
      chk(w, "gate input");
      if (drv[w] == kNone)
        fail(Errc::DanglingWire, "gate " + std::to_string(g) + " reads undriven wire " + std::to_string(w));
      if (drv[w] == kGate && gate_of[w] >= g)
        fail(Errc::CyclicCombinationalPath,
             "gate " + std::to_string(g) + " reads wire " + std::to_string(w) + " produced by gate " +
                 std::to_string(gate_of[w]));
    }
  }
  for (const auto& r : n.registers)
    if (drv[r.d] == kNone) fail(Errc::DanglingWire, "register d wire " + std::to_string(r.d) + " undriven");
  for (const auto& o : n.outputs) {
    chk(o.wire, "output");
    if (drv[o.wire] == kNone) fail(Errc::DanglingWire, "output wire " + std::to_string(o.wire) + " undriven");
    if (o.cycle >= n.cycles) fail(Errc::ParseError, "output cycle out of range");
  }
}

void validate(const Program& p) {
  if (p.stages.empty()) fail(Errc::ParseError, "program has no stages");
  for (size_t s = 0; s < p.stages.size(); ++s) {
    const auto& st = p.stages[s];
    try {
      validate(st);
    } catch (const Error& e) {
      throw Error(e.code(), "stage " + std::to_string(s) + ": " + e.what());
    }
    for (const auto& l : st.links)
      if (l.src_stage >= s || l.src_output >= p.stages[l.src_stage].outputs.size())
        fail(Errc::DanglingWire, "stage " + std::to_string(s) + " links to missing output " +
                                     std::to_string(l.src_stage) + ":" + std::to_string(l.src_output));
  }
}

GateStats stats_per_cycle(const Netlist& n) {
  GateStats s;
  for (const auto& g : n.gates) (is_free(g.kind) ? s.xor_count : s.nonxor_count)++;
  return s;
}

GateStats stats(const Netlist& n) { return stats_per_cycle(n) * n.cycles; }

GateStats stats(const Program& p) {
  GateStats s;
  for (const auto& st : p.stages) s += stats(st);
  return s;
}

namespace {

struct Out {
  std::string buf;
  void num(uint64_t v) {
    char tmp[24];
    auto r = std::to_chars(tmp, tmp + sizeof tmp, v);
    buf.append(tmp, r.ptr);
  }
  void sp() { buf.push_back(' '); }
  void nl() { buf.push_back('\n'); }
  void str(const char* s) { buf.append(s); }
};

const char* party_code(Party p) {
  switch (p) {
    case Party::Garbler: return "G";
    case Party::Evaluator: return "E";
    case Party::Const0: return "C0";
    case Party::Const1: return "C1";
  }
  return "?";
}

void emit(Out& o, const Netlist& n) {
  o.str("NETLIST "), o.num(n.num_wires), o.sp(), o.num(n.cycles), o.nl();
  for (const auto& s : n.inputs) {
    o.str("I "), o.num(s.wire), o.sp(), o.str(party_code(s.party)), o.sp(), o.num(s.cycle), o.nl();
  }
  for (const auto& l : n.links) {
    o.str("L "), o.num(l.wire), o.sp(), o.num(l.cycle), o.sp(), o.num(l.src_stage), o.sp(), o.num(l.src_output);
    o.nl();
  }
  for (const auto& r : n.registers) o.str("R "), o.num(r.d), o.sp(), o.num(r.q), o.sp(), o.num(r.init), o.nl();
  for (size_t i = 0; i < n.gates.size(); ++i) {
    const auto& g = n.gates[i];
    o.str("G "), o.num(i), o.sp(), o.str(to_string(g.kind)), o.sp(), o.num(g.in0), o.sp();
    if (!is_unary(g.kind)) o.num(g.in1), o.sp();
    o.num(g.out), o.nl();
  }
  for (const auto& out : n.outputs) o.str("O "), o.num(out.wire), o.sp(), o.num(out.cycle), o.nl();
}

}  // namespace

std::string serialize(const Netlist& n) {
  Out o;
  emit(o, n);
  return std::move(o.buf);
}

std::string serialize(const Program& p, const std::vector<std::string>& meta) {
  Out o;
  for (const auto& m : meta) o.str("#@ "), o.buf += m, o.nl();
  for (const auto& s : p.stages) emit(o, s);
  return std::move(o.buf);
}

namespace {

struct Lexer {
  const std::string& t;
  size_t pos = 0;
  size_t line = 0;
  size_t line_end = 0;
  explicit Lexer(const std::string& s) : t(s) {}

  bool next_line() {
    pos = line_end;
    if (pos < t.size() && line > 0) ++pos;  // skip '\n'
    if (pos >= t.size()) return false;
    line_end = t.find('\n', pos);
    if (line_end == std::string::npos) line_end = t.size();
    ++line;
    return true;
  }
  [[noreturn]] void err(const std::string& m) const {
    throw Error(Errc::ParseError, "line " + std::to_string(line) + ": " + m);
  }
  void skip_ws() {
    while (pos < line_end && (t[pos] == ' ' || t[pos] == '\t' || t[pos] == '\r')) ++pos;
  }
  bool at_end() {
    skip_ws();
    return pos >= line_end;
  }
  std::string_view word() {
    skip_ws();
    size_t b = pos;
    while (pos < line_end && t[pos] != ' ' && t[pos] != '\t' && t[pos] != '\r') ++pos;
    if (b == pos) err("unexpected end of line");
    return std::string_view(t).substr(b, pos - b);
  }
  uint32_t num() {
    auto w = word();
    uint64_t v = 0;
    auto r = std::from_chars(w.data(), w.data() + w.size(), v);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size() || v > UINT32_MAX)
      err("expected integer, got '" + std::string(w) + "'");
    return uint32_t(v);
  }
};

}  // namespace

Program parse_program(const std::string& text, std::vector<std::string>* meta) {
  Program p;
  Lexer lx(text);
  Netlist* cur = nullptr;
  while (lx.next_line()) {
    lx.skip_ws();
    if (lx.pos >= lx.line_end) continue;
    if (text[lx.pos] == '#') {
      if (meta && lx.line_end - lx.pos >= 2 && text[lx.pos + 1] == '@') {
        size_t b = lx.pos + 2;
        while (b < lx.line_end && text[b] == ' ') ++b;
        meta->emplace_back(text.substr(b, lx.line_end - b));
      }
      continue;
    }
    auto tag = lx.word();
    if (tag == "NETLIST") {
      p.stages.emplace_back();
      cur = &p.stages.back();
      cur->num_wires = lx.num();
      cur->cycles = lx.num();
    } else {
      if (!cur) lx.err("record before NETLIST header");
      if (tag == "I") {
        InputSlot s;
        s.wire = lx.num();
        auto pc = lx.word();
        if (pc == "G") s.party = Party::Garbler;
        else if (pc == "E") s.party = Party::Evaluator;
        else if (pc == "C0") s.party = Party::Const0;
        else if (pc == "C1") s.party = Party::Const1;
        else lx.err("unknown party '" + std::string(pc) + "'");
        s.cycle = lx.num();
        cur->inputs.push_back(s);
      } else if (tag == "L") {
        Link l;
        l.wire = lx.num(), l.cycle = lx.num(), l.src_stage = lx.num(), l.src_output = lx.num();
        cur->links.push_back(l);
      } else if (tag == "R") {
        Register r;
        r.d = lx.num(), r.q = lx.num();
        uint32_t init = lx.num();
        if (init > 1) lx.err("register init must be 0 or 1");
        r.init = uint8_t(init);
        cur->registers.push_back(r);
      } else if (tag == "G") {
        uint32_t id = lx.num();
        if (id != cur->gates.size()) lx.err("gate id " + std::to_string(id) + " out of order");
        auto k = lx.word();
        Gate g;
        if (k == "XOR") g.kind = GateKind::XOR;
        else if (k == "XNOR") g.kind = GateKind::XNOR;
        else if (k == "AND") g.kind = GateKind::AND;
        else if (k == "OR") g.kind = GateKind::OR;
        else if (k == "NOT") g.kind = GateKind::NOT;
        else if (k == "BUF") g.kind = GateKind::BUF;
        else lx.err("unknown gate kind '" + std::string(k) + "'");
        g.in0 = lx.num();
        g.in1 = is_unary(g.kind) ? g.in0 : lx.num();
        g.out = lx.num();
        cur->gates.push_back(g);
      } else if (tag == "O") {
        OutputSlot o;
        o.wire = lx.num(), o.cycle = lx.num();
        cur->outputs.push_back(o);
      } else {
        lx.err("unknown record '" + std::string(tag) + "'");
      }
    }
    if (!lx.at_end()) lx.err("trailing tokens");
  }
  if (p.stages.empty()) throw Error(Errc::ParseError, "no NETLIST header");
  return p;
}

Netlist parse_netlist(const std::string& text) {
  auto p = parse_program(text);
  if (p.stages.size() != 1) throw Error(Errc::ParseError, "expected a single NETLIST block");
  return std::move(p.stages[0]);
}

Program load_program(const std::string& path, std::vector<std::string>* meta) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::InvalidArgument, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_program(ss.str(), meta);
}

void save_program(const Program& p, const std::string& path, const std::vector<std::string>& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::InvalidArgument, "cannot write " + path);
  f << serialize(p, meta);
}

Schedule make_schedule(const Netlist& n) {
  Schedule s;
  auto csr = [&](auto const& v, std::vector<uint32_t>& off, std::vector<uint32_t>& idx) {
    off.assign(n.cycles + 1, 0);
    for (const auto& e : v) off[e.cycle + 1]++;
    for (uint32_t c = 0; c < n.cycles; ++c) off[c + 1] += off[c];
    idx.resize(v.size());
    std::vector<uint32_t> fill(off.begin(), off.end() - 1);
    for (uint32_t i = 0; i < v.size(); ++i) idx[fill[v[i].cycle]++] = i;
  };
  csr(n.inputs, s.in_off, s.in_idx);
  csr(n.links, s.link_off, s.link_idx);
  csr(n.outputs, s.out_off, s.out_idx);
  s.slot_rank.resize(n.inputs.size());
  for (size_t i = 0; i < n.inputs.size(); ++i) {
    switch (n.inputs[i].party) {
      case Party::Garbler: s.slot_rank[i] = s.n_garbler++; break;
      case Party::Evaluator: s.slot_rank[i] = s.n_evaluator++; break;
      default: s.slot_rank[i] = s.n_const++; break;
    }
  }
  return s;
}

Netlist compose(const Netlist& a, const Netlist& b) {
  if (a.cycles != b.cycles) throw Error(Errc::InvalidArgument, "compose needs equal cycle counts");
  Netlist r = a;
  const uint32_t off = a.num_wires;
  r.num_wires += b.num_wires;
  for (auto s : b.inputs) s.wire += off, r.inputs.push_back(s);
  for (auto l : b.links) l.wire += off, r.links.push_back(l);
  for (auto g : b.gates) g.in0 += off, g.in1 += off, g.out += off, r.gates.push_back(g);
  for (auto x : b.registers) x.d += off, x.q += off, r.registers.push_back(x);
  for (auto o : b.outputs) o.wire += off, r.outputs.push_back(o);
  return r;
}

Netlist unroll(const Netlist& n) {
  Netlist r;
  r.cycles = 1;
  const uint32_t W = n.num_wires;
  std::vector<uint32_t> prev(W, UINT32_MAX), cur(W, UINT32_MAX);
  auto sched = make_schedule(n);
  std::vector<uint32_t> out_wire(n.outputs.size());
  for (uint32_t c = 0; c < n.cycles; ++c) {
    cur = prev;  // held inputs keep their previous copy
    for (uint32_t k = sched.in_off[c]; k < sched.in_off[c + 1]; ++k) {
      const auto& s = n.inputs[sched.in_idx[k]];
      cur[s.wire] = r.num_wires++;
      r.inputs.push_back({cur[s.wire], 0, s.party});
    }
    for (const auto& x : n.registers) {
      if (c == 0) {
        cur[x.q] = r.num_wires++;
        r.inputs.push_back({cur[x.q], 0, x.init ? Party::Const1 : Party::Const0});
      } else {
        cur[x.q] = prev[x.d];
      }
    }
    for (const auto& g : n.gates) {
      Gate h = g;
      h.in0 = cur[g.in0];
      h.in1 = is_unary(g.kind) ? h.in0 : cur[g.in1];
      h.out = cur[g.out] = r.num_wires++;
      r.gates.push_back(h);
    }
    for (uint32_t k = sched.out_off[c]; k < sched.out_off[c + 1]; ++k)
      out_wire[sched.out_idx[k]] = cur[n.outputs[sched.out_idx[k]].wire];
    prev = cur;
  }
  for (auto w : out_wire) r.outputs.push_back({w, 0});
  return r;
}

}  // namespace gcinfer
