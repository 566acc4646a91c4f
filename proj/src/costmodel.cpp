#include "gcinfer/costmodel.hpp"

#include <functional>

#include "gcinfer/builder.hpp"
#include "gcinfer/error.hpp"
#include "gcinfer/gclib.hpp"
#include "json.hpp"

namespace gcinfer {

void CostParams::validate() const {
  auto pos = [](double v, const char* name) {
    if (!(v > 0)) throw Error(Errc::InvalidArgument, std::string(name) + " must be positive");
  };
  pos(f_cpu, "f_cpu");
  pos(clk_xor, "clk_xor");
  pos(clk_nonxor, "clk_nonxor");
  pos(n_bits, "n_bits");
  if (bw_net) pos(*bw_net, "bw_net");
}

namespace {

double seconds(const GateStats& s, const CostParams& p) {
  return (double(s.xor_count) * p.clk_xor + double(s.nonxor_count) * p.clk_nonxor) / p.f_cpu;
}

// counts of one instance, built on fresh inputs
GateStats count(const std::function<void(Builder&)>& f) {
  Builder b(false);
  f(b);
  return b.stats();
}

Bits in(Builder& b, Party p, size_t n = 16) { return b.inputs(p, n); }

struct Components {
  GateStats mult, add, add_wrap, sub_wrap;
  Components() {
    mult = count([](Builder& b) { gc::mult_q312(b, in(b, Party::Evaluator), in(b, Party::Garbler)); });
    add = count([](Builder& b) { gc::add(b, in(b, Party::Garbler), in(b, Party::Evaluator)); });
    add_wrap = count([](Builder& b) { gc::add_wrap(b, in(b, Party::Garbler), in(b, Party::Evaluator)); });
    sub_wrap = count([](Builder& b) { gc::sub_wrap(b, in(b, Party::Garbler), in(b, Party::Evaluator)); });
  }
};

const Components& components() {
  static const Components c;
  return c;
}

uint32_t pool_shift(const LayerSpec& L) {
  uint32_t s = 0;
  while ((1u << s) < L.dims.k * L.dims.k) ++s;
  return s;
}

// MAC terms of every output neuron: kept weights plus the bias slot
std::vector<uint64_t> row_terms(const LayerSpec& L) {
  const auto& d = L.dims;
  std::vector<uint64_t> t(L.output_size(), 0);
  const uint64_t bias = L.bias.empty() ? 0 : 1;
  if (L.kind == LayerKind::FullyConnected) {
    for (uint32_t i = 0; i < d.out; ++i) {
      for (uint32_t j = 0; j < d.in; ++j) t[i] += L.kept(size_t(i) * d.in + j);
      t[i] += bias;
    }
    return t;
  }
  const size_t per_oc = size_t(d.c) * d.k * d.k, positions = size_t(d.out_h()) * d.out_w();
  for (uint32_t o = 0; o < d.oc; ++o) {
    uint64_t k = bias;
    for (size_t i = 0; i < per_oc; ++i) k += L.kept(o * per_oc + i);
    for (size_t p = 0; p < positions; ++p) t[o * positions + p] = k;
  }
  return t;
}

std::string layer_label(size_t i, const LayerSpec& L) {
  const auto& d = L.dims;
  std::string s = std::to_string(i) + ":";
  switch (L.kind) {
    case LayerKind::FullyConnected: return s + "FC " + std::to_string(d.in) + "x" + std::to_string(d.out);
    case LayerKind::Conv2D:
      return s + "Conv " + std::to_string(d.oc) + "x" + std::to_string(d.c) + "x" + std::to_string(d.k) + "x" +
             std::to_string(d.k);
    case LayerKind::NonLinearity: return s + "NL " + to_string(L.activation) + " x" + std::to_string(d.n);
    case LayerKind::MaxPool: return s + "MaxPool " + std::to_string(d.k);
    case LayerKind::MeanPool: return s + "MeanPool " + std::to_string(d.k);
  }
  return s;
}

LayerCost layer_cost(size_t i, const LayerSpec& L, CompileMode mode) {
  const auto& c = components();
  LayerCost lc;
  lc.label = layer_label(i, L);
  switch (L.kind) {
    case LayerKind::FullyConnected:
    case LayerKind::Conv2D: {
      auto terms = row_terms(L);
      const uint64_t bias = L.bias.empty() ? 0 : 1;
      uint64_t total = 0, rows = 0, products = 0;
      for (auto t : terms) total += t, rows += t ? 1 : 0, products += t - bias;
      if (mode == CompileMode::Unrolled) {
        // bias is added directly, so only kept weights are multiplied
        lc.mult = c.mult * products;
        lc.add = c.add * (total - rows);
      } else {
        // one MAC cycle per term (bias multiplied by 1.0), then prefix-sum differencing
        lc.mult = c.mult * total;
        lc.add = c.add_wrap * total + c.sub_wrap * (rows ? rows - 1 : 0);
      }
      break;
    }
    case LayerKind::NonLinearity:
      lc.act = activation_stats(L.activation) * L.dims.n;
      break;
    case LayerKind::MaxPool: {
      const uint64_t outs = uint64_t(L.dims.c) * L.dims.out_h() * L.dims.out_w();
      auto step = count([](Builder& b) {
        Bits x = in(b, Party::Garbler), y = in(b, Party::Evaluator);
        gc::mux(b, gc::lt_signed(b, x, y), y, x);
      });
      lc.other = step * (outs * (uint64_t(L.dims.k) * L.dims.k - 1));
      break;
    }
    case LayerKind::MeanPool: {
      const uint64_t outs = uint64_t(L.dims.c) * L.dims.out_h() * L.dims.out_w();
      const size_t w = 16 + pool_shift(L);
      auto step = count([w](Builder& b) { gc::add_wrap(b, in(b, Party::Garbler, w), in(b, Party::Evaluator, w)); });
      lc.other = step * (outs * (uint64_t(L.dims.k) * L.dims.k - 1));
      break;
    }
  }
  lc.gates = lc.mult + lc.add + lc.act + lc.other;
  return lc;
}

std::vector<LayerCost> breakdown(const ModelDescriptor& m, CompileMode mode) {
  validate(m);
  std::vector<LayerCost> out;
  for (size_t i = 0; i < m.layers.size(); ++i) out.push_back(layer_cost(i, m.layers[i], mode));
  LayerCost am;
  am.label = std::to_string(m.layers.size()) + ":argmax " + std::to_string(m.output_size());
  am.other = build_argmax(m.output_size()).declared;
  am.gates = am.other;
  out.push_back(am);
  return out;
}

}  // namespace

GateStats activation_stats(Activation a) {
  return count([a](Builder& b) { gc::activation(b, a, in(b, Party::Garbler)); });
}

CostReport estimate(const GateStats& s, const CostParams& p) {
  p.validate();
  CostReport r;
  r.xor_count = s.xor_count;
  r.nonxor_count = s.nonxor_count;
  r.t_comp = seconds(s, p);
  r.comm_bytes = s.nonxor_count * 2 * p.n_bits / 8;
  if (p.bw_net) r.t_comm = double(r.comm_bytes) * 8 / *p.bw_net;
  return r;
}

GateStats analytic_stats(const ModelDescriptor& m, CompileMode mode) {
  GateStats s;
  for (const auto& L : breakdown(m, mode)) s += L.gates;
  return s;
}

CostReport estimate_model(const ModelDescriptor& m, CompileMode mode, bool analytic, const CostParams& p) {
  auto layers = breakdown(m, mode);
  GateStats total;
  for (const auto& L : layers) total += L.gates;
  if (!analytic) total = compile_stats(m, mode);
  CostReport r = estimate(total, p);
  for (auto& L : layers) {
    L.t_comp = seconds(L.gates, p);
    r.beta_mult += seconds(L.mult, p);
    r.beta_add += seconds(L.add, p);
    r.beta_act += seconds(L.act, p);
    r.beta_other += seconds(L.other, p);
  }
  r.layers = std::move(layers);
  return r;
}

const std::vector<PublishedBenchmark>& published_benchmarks() {
  static const std::vector<PublishedBenchmark> b = {
      {"benchmark1", "28x28-5C2-ReLu-100FC-ReLu-10FC-Softmax", 43100000, 24700000, 791, 1.98, 9.67},
      {"benchmark2", "28x28-300FC-Sigmoid-100FC-Sigmoid-10FC-Softmax", 109000000, 62300000, 1990, 4.99, 24.37},
      {"benchmark3", "617-50FC-Tanh-26FC-Softmax", 13200000, 7540000, 241, 0.60, 2.95},
      {"benchmark4", "5625-2000FC-Tanh-500FC-Tanh-19FC-Softmax", 4890000000ull, 2810000000ull, 89800, 224.50,
       1098.3},
  };
  return b;
}

std::string cost_report_json(const CostReport& r, const CostParams& p, int indent) {
  nlohmann::json j;
  j["xor_count"] = r.xor_count;
  j["nonxor_count"] = r.nonxor_count;
  j["t_comp"] = r.t_comp;
  j["comm_bytes"] = r.comm_bytes;
  j["comm_mb"] = double(r.comm_bytes) / 1e6;
  j["t_comm"] = r.t_comm ? nlohmann::json(*r.t_comm) : nlohmann::json(nullptr);
  j["beta"] = {{"mult", r.beta_mult}, {"add", r.beta_add}, {"act", r.beta_act}, {"other", r.beta_other}};
  j["params"] = {{"f_cpu", p.f_cpu},
                 {"clk_xor", p.clk_xor},
                 {"clk_nonxor", p.clk_nonxor},
                 {"n_bits", p.n_bits},
                 {"bw_net", p.bw_net ? nlohmann::json(*p.bw_net) : nlohmann::json(nullptr)}};
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& L : r.layers)
    layers.push_back({{"label", L.label},
                      {"xor_count", L.gates.xor_count},
                      {"nonxor_count", L.gates.nonxor_count},
                      {"t_comp", L.t_comp}});
  return j.dump(indent);
}

}  // namespace gcinfer
