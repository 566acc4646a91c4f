#include "gcinfer/compile.hpp"

#include <fstream>
#include <memory>
#include <sstream>

#include "gcinfer/builder.hpp"
#include "gcinfer/error.hpp"
#include "gcinfer/gclib.hpp"

namespace gcinfer {

const char* to_string(CompileMode m) { return m == CompileMode::Folded ? "folded" : "unrolled"; }

CompileMode parse_compile_mode(const std::string& s) {
  if (s == "unrolled") return CompileMode::Unrolled;
  if (s == "folded") return CompileMode::Folded;
  throw Error(Errc::InvalidArgument, "mode must be unrolled or folded, got '" + s + "'");
}

FxVec flat_parameters(const ModelDescriptor& m) {
  FxVec p;
  for (const auto& L : m.layers) {
    p.insert(p.end(), L.weights.begin(), L.weights.end());
    p.insert(p.end(), L.bias.begin(), L.bias.end());
  }
  return p;
}

std::string model_digest(const ModelDescriptor& m, CompileMode mode, bool outsourced) {
  return sha256_hex(architecture_string(m) + "|" + to_string(mode) + "|" + (outsourced ? "outsourced" : "direct"));
}

namespace {

bool is_mac(const LayerSpec& L) { return L.kind == LayerKind::FullyConnected || L.kind == LayerKind::Conv2D; }

uint32_t pool_shift(const LayerSpec& L) {
  uint32_t s = 0;
  while ((1u << s) < L.dims.k * L.dims.k) ++s;
  return s;
}

// one MAC term: input element (or kOne for the bias slot) times a parameter
inline constexpr uint32_t kOne = UINT32_MAX;
struct Term {
  uint32_t elem;
  uint32_t param;  // index into the layer's weights, or weights.size()+o for bias
};

// neuron -> its terms, in the order the reference accumulates them
std::vector<std::vector<Term>> mac_terms(const LayerSpec& L) {
  const auto& d = L.dims;
  std::vector<std::vector<Term>> t(L.output_size());
  const uint32_t nw = uint32_t(L.weights.size());
  if (L.kind == LayerKind::FullyConnected) {
    for (uint32_t i = 0; i < d.out; ++i) {
      for (uint32_t j = 0; j < d.in; ++j)
        if (L.kept(size_t(i) * d.in + j)) t[i].push_back({j, i * d.in + j});
      if (!L.bias.empty()) t[i].push_back({kOne, nw + i});
    }
    return t;
  }
  uint32_t oh = d.out_h(), ow = d.out_w();
  for (uint32_t o = 0; o < d.oc; ++o)
    for (uint32_t y = 0; y < oh; ++y)
      for (uint32_t x = 0; x < ow; ++x) {
        auto& v = t[(size_t(o) * oh + y) * ow + x];
        for (uint32_t c = 0; c < d.c; ++c)
          for (uint32_t ky = 0; ky < d.k; ++ky)
            for (uint32_t kx = 0; kx < d.k; ++kx) {
              uint32_t wi = ((o * d.c + c) * d.k + ky) * d.k + kx;
              uint32_t zi = (c * d.h + y * d.s + ky) * d.w + x * d.s + kx;
              if (L.kept(wi)) v.push_back({zi, wi});
            }
        if (!L.bias.empty()) v.push_back({kOne, nw + o});
      }
  return t;
}

// pools and activations on a combinational stage
std::vector<Bits> lower_simple(Builder& b, const LayerSpec& L, const std::vector<Bits>& z) {
  const auto& d = L.dims;
  std::vector<Bits> out;
  switch (L.kind) {
    case LayerKind::NonLinearity:
      for (const auto& v : z) out.push_back(gc::activation(b, L.activation, v));
      return out;
    case LayerKind::MaxPool:
    case LayerKind::MeanPool: {
      uint32_t oh = d.out_h(), ow = d.out_w(), sh = pool_shift(L);
      out.resize(size_t(d.c) * oh * ow);
      for (uint32_t c = 0; c < d.c; ++c)
        for (uint32_t y = 0; y < oh; ++y)
          for (uint32_t x = 0; x < ow; ++x) {
            Bits acc;
            for (uint32_t ky = 0; ky < d.k; ++ky)
              for (uint32_t kx = 0; kx < d.k; ++kx) {
                const Bits& v = z[(size_t(c) * d.h + y * d.s + ky) * d.w + x * d.s + kx];
                if (acc.empty()) {
                  acc = L.kind == LayerKind::MaxPool ? v : gc::resize(b, v, 16 + sh, true);
                } else if (L.kind == LayerKind::MaxPool) {
                  acc = gc::mux(b, gc::lt_signed(b, acc, v), v, acc);
                } else {
                  acc = gc::add_wrap(b, acc, gc::resize(b, v, 16 + sh, true));
                }
              }
            if (L.kind == LayerKind::MeanPool) acc = Bits(acc.begin() + sh, acc.begin() + sh + 16);
            out[(size_t(c) * oh + y) * ow + x] = acc;
          }
      return out;
    }
    default: throw Error(Errc::UnsupportedLayer, "not a combinational layer");
  }
}

struct Inputs {
  std::vector<Bits> data;
  std::vector<std::vector<Bits>> params;  // per layer, by parameter index (empty = not an input)
};

// data (or its two shares) and every referenced parameter as stage inputs
Inputs make_inputs(Builder& b, const ModelDescriptor& m, bool outsourced, CompiledCircuit& cc) {
  Inputs in;
  const size_t n = m.input_size();
  in.data.resize(n);
  for (size_t i = 0; i < n; ++i) {
    in.data[i] = b.inputs(Party::Garbler, 16);
    for (uint32_t k = 0; k < 16; ++k) cc.garbler_map.push_back(uint32_t(i * 16 + k));
  }
  if (outsourced) {
    for (size_t i = 0; i < n; ++i) {
      Bits y = b.inputs(Party::Evaluator, 16);
      for (uint32_t k = 0; k < 16; ++k) {
        cc.evaluator_map.push_back(kShareTag | uint32_t(i * 16 + k));
        in.data[i][k] = b.XOR(in.data[i][k], y[k]);
      }
    }
  }
  uint32_t base = 0;
  for (const auto& L : m.layers) {
    const size_t np = L.weights.size() + L.bias.size();
    in.params.emplace_back(np);
    for (size_t p = 0; p < np; ++p) {
      if (p < L.weights.size() && !L.kept(p)) continue;
      in.params.back()[p] = b.inputs(Party::Evaluator, 16);
      for (uint32_t k = 0; k < 16; ++k) cc.evaluator_map.push_back(uint32_t((base + p) * 16 + k));
    }
    base += uint32_t(np);
  }
  return in;
}

void finish_outputs(Builder& b, const std::vector<Bits>& final_vals, CompiledCircuit& cc) {
  cc.classes = uint32_t(final_vals.size());
  Bits idx = gc::argmax(b, final_vals);
  for (size_t k = 0; k < idx.size(); ++k) {
    b.output(idx[k]);
    cc.output_map.push_back(uint32_t(k));
  }
}

void lower_unrolled(Builder& b, const ModelDescriptor& m, bool outsourced, CompiledCircuit& cc) {
  Inputs in = make_inputs(b, m, outsourced, cc);
  std::vector<Bits> z = in.data;
  for (size_t li = 0; li < m.layers.size(); ++li) {
    const auto& L = m.layers[li];
    if (!is_mac(L)) {
      z = lower_simple(b, L, z);
      continue;
    }
    auto terms = mac_terms(L);
    std::vector<Bits> out(terms.size());
    for (size_t o = 0; o < terms.size(); ++o) {
      Bits acc;
      for (const auto& t : terms[o]) {
        const Bits& w = in.params[li][t.param];
        // bias is added directly, no multiply by 1.0
        Bits p = t.elem == kOne ? w : gc::mult_q312(b, w, z[t.elem]);
        acc = acc.empty() ? p : gc::add(b, acc, p).sum;
      }
      out[o] = acc.empty() ? b.constant(0, 16) : acc;
    }
    z = std::move(out);
  }
  finish_outputs(b, z, cc);
}

// Stage 0 holds the inputs; every FC/Conv layer gets a sequential MAC stage
// followed by a combinational stage for differencing and the next simple layers.
void lower_folded(const ModelDescriptor& m, bool outsourced, CompiledCircuit& cc) {
  auto& stages = cc.program.stages;
  auto b = std::make_unique<Builder>();
  Inputs in = make_inputs(*b, m, outsourced, cc);
  // stage-0 output indices of every parameter
  std::vector<std::vector<std::vector<uint32_t>>> param_out(m.layers.size());
  for (size_t li = 0; li < m.layers.size(); ++li) {
    param_out[li].resize(in.params[li].size());
    for (size_t p = 0; p < in.params[li].size(); ++p)
      for (Wire w : in.params[li][p]) param_out[li][p].push_back(b->output(w));
  }
  std::vector<Bits> z = in.data;
  size_t li = 0;
  for (;;) {
    while (li < m.layers.size() && !is_mac(m.layers[li])) z = lower_simple(*b, m.layers[li++], z);
    if (li == m.layers.size()) {
      finish_outputs(*b, z, cc);
      stages.push_back(b->finish());
      return;
    }
    // hand the layer input over to the MAC stage
    const uint32_t src = uint32_t(stages.size());
    std::vector<std::vector<uint32_t>> z_out(z.size());
    for (size_t e = 0; e < z.size(); ++e)
      for (Wire w : z[e]) z_out[e].push_back(b->output(w));
    stages.push_back(b->finish());

    const LayerSpec& L = m.layers[li];
    auto terms = mac_terms(L);
    Builder mb;
    Bits zw, tw;
    uint32_t t = 0;
    std::vector<std::vector<uint32_t>> p_out(terms.size());
    Bits q(16), d;
    bool built = false;
    const uint32_t one = 1u << kFracBits;
    for (size_t o = 0; o < terms.size(); ++o) {
      for (const auto& term : terms[o]) {
        for (uint32_t k = 0; k < 16; ++k) {
          const auto& po = param_out[li][term.param];
          if (t == 0) {
            tw.push_back(mb.link(0, 0, po[k]));
            zw.push_back(term.elem == kOne ? mb.input((one >> k) & 1 ? Party::Const1 : Party::Const0, 0)
                                           : mb.link(0, src, z_out[term.elem][k]));
          } else {
            mb.add_link(tw[k], t, 0, po[k]);
            if (term.elem == kOne) mb.add_slot(zw[k], (one >> k) & 1 ? Party::Const1 : Party::Const0, t);
            else mb.add_link(zw[k], t, src, z_out[term.elem][k]);
          }
        }
        if (!built) {
          for (auto& w : q) w = mb.reg(0);
          d = gc::add_wrap(mb, q, gc::mult_q312(mb, tw, zw));
          for (size_t k = 0; k < 16; ++k) mb.set_d(q[k], d[k]);
          built = true;
        }
        ++t;
      }
      if (!terms[o].empty())
        for (Wire w : d) p_out[o].push_back(mb.output(w, t - 1));
    }
    const uint32_t mac = uint32_t(stages.size());
    if (t > 0) stages.push_back(mb.finish(t));

    // differences of the prefix sums
    b = std::make_unique<Builder>();
    std::vector<Bits> y(terms.size());
    Bits prev;
    for (size_t o = 0; o < terms.size(); ++o) {
      if (p_out[o].empty()) {
        y[o] = b->constant(0, 16);
        continue;
      }
      Bits p;
      for (uint32_t idx : p_out[o]) p.push_back(b->link(0, mac, idx));
      y[o] = prev.empty() ? p : gc::sub_wrap(*b, p, prev);
      prev = p;
    }
    z = std::move(y);
    ++li;
  }
}

std::string runs(const std::vector<uint32_t>& v) {
  std::ostringstream s;
  for (size_t i = 0; i < v.size();) {
    size_t j = i + 1;
    while (j < v.size() && v[j] == v[j - 1] + 1) ++j;
    s << ' ' << v[i] << '+' << (j - i);
    i = j;
  }
  return s.str();
}

std::vector<uint32_t> parse_runs(std::istringstream& in) {
  std::vector<uint32_t> v;
  std::string tok;
  while (in >> tok) {
    auto plus = tok.find('+');
    if (plus == std::string::npos) throw Error(Errc::ParseError, "bad map run '" + tok + "'");
    uint32_t a = uint32_t(std::stoul(tok.substr(0, plus)));
    uint32_t n = uint32_t(std::stoul(tok.substr(plus + 1)));
    for (uint32_t i = 0; i < n; ++i) v.push_back(a + i);
  }
  return v;
}

}  // namespace

std::vector<std::string> CompiledCircuit::meta() const {
  return {"digest " + digest,
          std::string("mode ") + to_string(mode),
          std::string("outsourced ") + (outsourced ? "1" : "0"),
          "data_inputs " + std::to_string(data_inputs),
          "classes " + std::to_string(classes),
          "gmap" + runs(garbler_map),
          "emap" + runs(evaluator_map),
          "omap" + runs(output_map)};
}

CompiledCircuit compile(const ModelDescriptor& m, CompileMode mode, bool outsourced) {
  validate(m);
  CompiledCircuit cc;
  cc.mode = mode;
  cc.outsourced = outsourced;
  cc.data_inputs = uint32_t(m.input_size());
  cc.digest = model_digest(m, mode, outsourced);
  if (mode == CompileMode::Unrolled) {
    Builder b;
    lower_unrolled(b, m, outsourced, cc);
    cc.program.stages.push_back(b.finish());
  } else {
    lower_folded(m, outsourced, cc);
  }
  return cc;
}

GateStats compile_stats(const ModelDescriptor& m, CompileMode mode, bool outsourced) {
  if (mode == CompileMode::Folded) return stats(compile(m, mode, outsourced).program);
  validate(m);
  Builder b(false);
  CompiledCircuit cc;
  lower_unrolled(b, m, outsourced, cc);
  return b.stats();
}

void save_compiled(const CompiledCircuit& c, const std::string& path) { save_program(c.program, path, c.meta()); }

static CompiledCircuit from_meta(Program p, const std::vector<std::string>& meta) {
  CompiledCircuit c;
  c.program = std::move(p);
  bool have_digest = false;
  for (const auto& line : meta) {
    std::istringstream in(line);
    std::string key;
    in >> key;
    if (key == "digest") in >> c.digest, have_digest = true;
    else if (key == "mode") {
      std::string v;
      in >> v;
      c.mode = parse_compile_mode(v);
    } else if (key == "outsourced") {
      int v = 0;
      in >> v;
      c.outsourced = v != 0;
    } else if (key == "data_inputs") in >> c.data_inputs;
    else if (key == "classes") in >> c.classes;
    else if (key == "gmap") c.garbler_map = parse_runs(in);
    else if (key == "emap") c.evaluator_map = parse_runs(in);
    else if (key == "omap") c.output_map = parse_runs(in);
  }
  if (!have_digest) throw Error(Errc::ParseError, "netlist carries no compile metadata");
  return c;
}

CompiledCircuit parse_compiled(const std::string& text) {
  std::vector<std::string> meta;
  Program p = parse_program(text, &meta);
  return from_meta(std::move(p), meta);
}

CompiledCircuit load_compiled(const std::string& path) {
  std::vector<std::string> meta;
  Program p = load_program(path, &meta);
  return from_meta(std::move(p), meta);
}

std::vector<uint8_t> garbler_inputs(const CompiledCircuit& c, const FxVec& x) {
  if (x.size() != c.data_inputs)
    throw Error(c.outsourced ? Errc::ShareSizeMismatch : Errc::ShapeMismatch, "input has " +
                    std::to_string(x.size()) + " elements, circuit expects " + std::to_string(c.data_inputs));
  std::vector<uint8_t> g(c.garbler_map.size());
  for (size_t i = 0; i < g.size(); ++i) {
    uint32_t id = c.garbler_map[i];
    g[i] = uint8_t((uint16_t(x[id / 16].raw) >> (id % 16)) & 1);
  }
  return g;
}

std::vector<uint8_t> evaluator_inputs(const CompiledCircuit& c, const ModelDescriptor& m, const FxVec& masked_x) {
  FxVec params = flat_parameters(m);
  if (c.outsourced && masked_x.size() != c.data_inputs) throw Error(Errc::ShareSizeMismatch, "share size");
  std::vector<uint8_t> e(c.evaluator_map.size());
  for (size_t i = 0; i < e.size(); ++i) {
    uint32_t id = c.evaluator_map[i];
    uint16_t v;
    if (id & kShareTag) {
      id &= ~kShareTag;
      v = uint16_t(masked_x.at(id / 16).raw);
    } else {
      if (id / 16 >= params.size()) throw Error(Errc::ShapeMismatch, "model has fewer parameters than the circuit");
      v = uint16_t(params[id / 16].raw);
    }
    e[i] = uint8_t((v >> (id % 16)) & 1);
  }
  return e;
}

size_t decode_label(const CompiledCircuit& c, const std::vector<uint8_t>& out) {
  size_t label = 0;
  for (size_t i = 0; i < c.output_map.size(); ++i) label |= size_t(out.at(i) & 1) << c.output_map[i];
  return label;
}

ModelDescriptor apply_sparsity(const ModelDescriptor& m, const std::vector<std::vector<uint8_t>>& masks) {
  if (masks.size() > m.layers.size()) throw Error(Errc::ShapeMismatch, "more masks than layers");
  ModelDescriptor r = m;
  for (size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].empty()) continue;
    auto& L = r.layers[i];
    if (masks[i].size() != L.weights.size())
      throw Error(Errc::ShapeMismatch, "mask for layer " + std::to_string(i) + " has wrong size");
    L.mask = masks[i];
    for (size_t k = 0; k < L.weights.size(); ++k)
      if (!L.mask[k]) L.weights[k] = Fixed16();
  }
  return r;
}

}  // namespace gcinfer
