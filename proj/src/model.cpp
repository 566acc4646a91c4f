#include "gcinfer/model.hpp"

#include <sodium.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "gcinfer/error.hpp"
#include "json.hpp"

namespace gcinfer {

using nlohmann::json;

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool: return "MaxPool";
    case LayerKind::MeanPool: return "MeanPool";
    case LayerKind::FullyConnected: return "FullyConnected";
    case LayerKind::NonLinearity: return "NonLinearity";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& s) {
  if (s == "Conv2D") return LayerKind::Conv2D;
  if (s == "MaxPool") return LayerKind::MaxPool;
  if (s == "MeanPool") return LayerKind::MeanPool;
  if (s == "FullyConnected" || s == "FC") return LayerKind::FullyConnected;
  if (s == "NonLinearity" || s == "NL") return LayerKind::NonLinearity;
  throw Error(Errc::UnsupportedLayer, "layer kind '" + s + "'");
}

size_t LayerSpec::input_size() const {
  switch (kind) {
    case LayerKind::FullyConnected: return dims.in;
    case LayerKind::NonLinearity: return dims.n;
    default: return size_t(dims.c) * dims.h * dims.w;
  }
}

size_t LayerSpec::output_size() const {
  switch (kind) {
    case LayerKind::FullyConnected: return dims.out;
    case LayerKind::NonLinearity: return dims.n;
    case LayerKind::Conv2D: return size_t(dims.oc) * dims.out_h() * dims.out_w();
    default: return size_t(dims.c) * dims.out_h() * dims.out_w();
  }
}

size_t LayerSpec::weight_count() const {
  switch (kind) {
    case LayerKind::FullyConnected: return size_t(dims.in) * dims.out;
    case LayerKind::Conv2D: return size_t(dims.oc) * dims.c * dims.k * dims.k;
    default: return 0;
  }
}

size_t ModelDescriptor::input_size() const {
  size_t n = 1;
  for (auto d : input_shape) n *= d;
  return input_shape.empty() ? 0 : n;
}

size_t ModelDescriptor::output_size() const {
  return layers.empty() ? input_size() : layers.back().output_size();
}

void validate(const ModelDescriptor& m) {
  auto fail = [](size_t i, const std::string& why) {
    throw Error(Errc::ShapeMismatch, "layer " + std::to_string(i) + ": " + why);
  };
  if (m.input_size() == 0) throw Error(Errc::ShapeMismatch, "empty input_shape");
  size_t cur = m.input_size();
  for (size_t i = 0; i < m.layers.size(); ++i) {
    const auto& L = m.layers[i];
    const auto& d = L.dims;
    if (L.kind == LayerKind::Conv2D || L.kind == LayerKind::MaxPool || L.kind == LayerKind::MeanPool) {
      if (d.k == 0 || d.s == 0 || d.k > d.h || d.k > d.w || d.c == 0) fail(i, "bad kernel/stride");
      if (L.kind == LayerKind::Conv2D && d.oc == 0) fail(i, "oc = 0");
      if (L.kind == LayerKind::MeanPool) {
        uint32_t kk = d.k * d.k;
        if (kk & (kk - 1)) throw Error(Errc::UnsupportedLayer, "MeanPool needs power-of-two k*k");
      }
    }
    if (L.kind == LayerKind::FullyConnected && (d.in == 0 || d.out == 0)) fail(i, "zero FC dims");
    if (L.kind == LayerKind::NonLinearity && d.n == 0) fail(i, "zero NL size");
    if (L.input_size() != cur)
      fail(i, "expects " + std::to_string(L.input_size()) + " inputs, got " + std::to_string(cur));
    if (L.weights.size() != L.weight_count())
      fail(i, "weights " + std::to_string(L.weights.size()) + " != " + std::to_string(L.weight_count()));
    if (!L.mask.empty() && L.mask.size() != L.weights.size()) fail(i, "mask shape differs from weights");
    if (!L.bias.empty()) {
      size_t nb = L.kind == LayerKind::Conv2D ? d.oc : L.kind == LayerKind::FullyConnected ? d.out : 0;
      if (nb == 0 || L.bias.size() != nb) fail(i, "bias size");
    }
    if (L.kind == LayerKind::NonLinearity && L.activation.fn != ActFn::ReLU &&
        L.activation.fn != ActFn::Softmax && L.activation.variant == ActVariant::None)
      throw Error(Errc::UnsupportedLayer, "tanh/sigmoid need a variant");
    cur = L.output_size();
  }
}

namespace {

FxVec raw_array(const json& j) {
  FxVec v;
  v.reserve(j.size());
  for (const auto& e : j) v.push_back(from_raw(e.get<int64_t>()));
  return v;
}

json dims_json(const LayerSpec& L) {
  const auto& d = L.dims;
  switch (L.kind) {
    case LayerKind::FullyConnected: return {{"in", d.in}, {"out", d.out}};
    case LayerKind::NonLinearity: return {{"n", d.n}};
    case LayerKind::Conv2D: return {{"c", d.c}, {"h", d.h}, {"w", d.w}, {"oc", d.oc}, {"k", d.k}, {"s", d.s}};
    default: return {{"c", d.c}, {"h", d.h}, {"w", d.w}, {"k", d.k}, {"s", d.s}};
  }
}

}  // namespace

ModelDescriptor parse_model_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(Errc::ParseError, std::string("model json: ") + e.what());
  }
  ModelDescriptor m;
  try {
    m.name = j.value("name", "");
    m.input_shape = j.at("input_shape").get<std::vector<uint32_t>>();
    for (const auto& jl : j.at("layers")) {
      LayerSpec L;
      L.kind = parse_layer_kind(jl.at("kind").get<std::string>());
      const auto& d = jl.at("dims");
      L.dims.in = d.value("in", 0u);
      L.dims.out = d.value("out", 0u);
      L.dims.c = d.value("c", 0u);
      L.dims.h = d.value("h", 0u);
      L.dims.w = d.value("w", 0u);
      L.dims.oc = d.value("oc", 0u);
      L.dims.k = d.value("k", 0u);
      L.dims.s = d.value("s", L.dims.k ? L.dims.k : 1u);
      L.dims.n = d.value("n", 0u);
      if (L.kind == LayerKind::Conv2D && !d.contains("s")) L.dims.s = 1;
      if (jl.contains("activation") && !jl["activation"].is_null())
        L.activation = parse_activation(jl["activation"].get<std::string>());
      if (jl.contains("weights")) L.weights = raw_array(jl["weights"]);
      if (jl.contains("mask") && !jl["mask"].is_null())
        for (const auto& b : jl["mask"]) L.mask.push_back(b.is_boolean() ? b.get<bool>() : b.get<int>() != 0);
      if (jl.contains("bias") && !jl["bias"].is_null()) L.bias = raw_array(jl["bias"]);
      m.layers.push_back(std::move(L));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::ParseError, std::string("model json: ") + e.what());
  }
  return m;
}

std::string model_to_json(const ModelDescriptor& m, int indent) {
  json j;
  j["name"] = m.name;
  j["input_shape"] = m.input_shape;
  j["layers"] = json::array();
  for (const auto& L : m.layers) {
    json jl;
    jl["kind"] = to_string(L.kind);
    jl["dims"] = dims_json(L);
    if (L.kind == LayerKind::NonLinearity) jl["activation"] = to_string(L.activation);
    if (L.weight_count()) {
      std::vector<int> w;
      w.reserve(L.weights.size());
      for (auto x : L.weights) w.push_back(x.raw);
      jl["weights"] = w;
    }
    if (!L.mask.empty()) {
      std::vector<int> mk(L.mask.begin(), L.mask.end());
      jl["mask"] = mk;
    }
    if (!L.bias.empty()) {
      std::vector<int> b;
      for (auto x : L.bias) b.push_back(x.raw);
      jl["bias"] = b;
    }
    j["layers"].push_back(std::move(jl));
  }
  return j.dump(indent);
}

ModelDescriptor load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::InvalidArgument, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_model_json(ss.str());
}

void save_model(const ModelDescriptor& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(Errc::InvalidArgument, "cannot write " + path);
  f << model_to_json(m) << "\n";
}

std::string sha256_hex(const std::string& data) {
  if (sodium_init() < 0) throw Error(Errc::InvalidArgument, "libsodium init failed");
  unsigned char h[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(h, reinterpret_cast<const unsigned char*>(data.data()), data.size());
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char c : h) out += hex[c >> 4], out += hex[c & 15];
  return out;
}

std::string architecture_string(const ModelDescriptor& m) {
  std::ostringstream s;
  s << "input";
  for (auto d : m.input_shape) s << ':' << d;
  for (const auto& L : m.layers) {
    s << '|' << to_string(L.kind) << ' ' << dims_json(L).dump();
    if (L.kind == LayerKind::NonLinearity) s << ' ' << to_string(L.activation);
    if (!L.bias.empty()) s << " bias";
    if (!L.mask.empty()) {
      std::string bits(L.mask.size(), '0');
      for (size_t i = 0; i < L.mask.size(); ++i)
        if (L.mask[i]) bits[i] = '1';
      s << " mask:" << sha256_hex(bits);
    }
  }
  return s.str();
}

FxVec ref_layer_eval(const LayerSpec& L, const FxVec& z) {
  if (z.size() != L.input_size())
    throw Error(Errc::ShapeMismatch, "layer input " + std::to_string(z.size()) + " != " +
                                         std::to_string(L.input_size()));
  const auto& d = L.dims;
  FxVec out(L.output_size());
  switch (L.kind) {
    case LayerKind::FullyConnected:
      for (uint32_t i = 0; i < d.out; ++i) {
        Fixed16 acc;
        for (uint32_t j = 0; j < d.in; ++j) {
          size_t wi = size_t(i) * d.in + j;
          if (L.kept(wi)) acc = fx_add(acc, fx_mul(L.weights[wi], z[j]));
        }
        if (!L.bias.empty()) acc = fx_add(acc, L.bias[i]);
        out[i] = acc;
      }
      break;
    case LayerKind::Conv2D: {
      uint32_t oh = d.out_h(), ow = d.out_w();
      for (uint32_t o = 0; o < d.oc; ++o)
        for (uint32_t y = 0; y < oh; ++y)
          for (uint32_t x = 0; x < ow; ++x) {
            Fixed16 acc;
            for (uint32_t c = 0; c < d.c; ++c)
              for (uint32_t ky = 0; ky < d.k; ++ky)
                for (uint32_t kx = 0; kx < d.k; ++kx) {
                  size_t wi = ((size_t(o) * d.c + c) * d.k + ky) * d.k + kx;
                  size_t zi = (size_t(c) * d.h + y * d.s + ky) * d.w + x * d.s + kx;
                  if (L.kept(wi)) acc = fx_add(acc, fx_mul(L.weights[wi], z[zi]));
                }
            if (!L.bias.empty()) acc = fx_add(acc, L.bias[o]);
            out[(size_t(o) * oh + y) * ow + x] = acc;
          }
      break;
    }
    case LayerKind::MaxPool:
    case LayerKind::MeanPool: {
      uint32_t oh = d.out_h(), ow = d.out_w();
      int shift = 0;
      while ((1u << shift) < d.k * d.k) ++shift;
      for (uint32_t c = 0; c < d.c; ++c)
        for (uint32_t y = 0; y < oh; ++y)
          for (uint32_t x = 0; x < ow; ++x) {
            int32_t best = INT32_MIN, sum = 0;
            for (uint32_t ky = 0; ky < d.k; ++ky)
              for (uint32_t kx = 0; kx < d.k; ++kx) {
                int32_t v = z[(size_t(c) * d.h + y * d.s + ky) * d.w + x * d.s + kx].raw;
                if (v > best) best = v;
                sum += v;
              }
            out[(size_t(c) * oh + y) * ow + x] =
                L.kind == LayerKind::MaxPool ? Fixed16(int16_t(best)) : from_raw(sum >> shift);
          }
      break;
    }
    case LayerKind::NonLinearity:
      for (size_t i = 0; i < z.size(); ++i) out[i] = act_eval(L.activation, z[i]);
      break;
  }
  return out;
}

FxVec ref_forward(const ModelDescriptor& m, const FxVec& x) {
  if (x.size() != m.input_size())
    throw Error(Errc::ShapeMismatch, "input size " + std::to_string(x.size()) + " != " +
                                         std::to_string(m.input_size()));
  FxVec z = x;
  for (const auto& L : m.layers) z = ref_layer_eval(L, z);
  return z;
}

size_t ref_network_eval(const ModelDescriptor& m, const FxVec& x) { return fx_argmax(ref_forward(m, x)); }

std::vector<size_t> ref_network_eval_batch_serial(const ModelDescriptor& m, const std::vector<FxVec>& xs) {
  std::vector<size_t> out(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) out[i] = ref_network_eval(m, xs[i]);
  return out;
}

std::vector<size_t> ref_network_eval_batch(const ModelDescriptor& m, const std::vector<FxVec>& xs) {
  std::vector<size_t> out(xs.size());
  const long n = long(xs.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) out[i] = ref_network_eval(m, xs[i]);
  return out;
}

ModelDescriptor make_fc_model(const std::vector<uint32_t>& topo, Activation hidden, uint64_t seed,
                              double weight_scale, bool with_bias) {
  ModelDescriptor m;
  std::ostringstream nm;
  for (size_t i = 0; i < topo.size(); ++i) nm << (i ? "-" : "fc-") << topo[i];
  m.name = nm.str();
  m.input_shape = {topo.at(0)};
  std::mt19937_64 rng(seed);
  for (size_t l = 0; l + 1 < topo.size(); ++l) {
    LayerSpec L;
    L.kind = LayerKind::FullyConnected;
    L.dims.in = topo[l];
    L.dims.out = topo[l + 1];
    double lim = weight_scale / std::sqrt(double(topo[l]));
    std::uniform_real_distribution<double> U(-lim, lim);
    L.weights.resize(L.weight_count());
    for (auto& w : L.weights) w = encode(U(rng));
    if (with_bias) {
      L.bias.resize(L.dims.out);
      for (auto& b : L.bias) b = encode(U(rng));
    }
    m.layers.push_back(std::move(L));
    LayerSpec A;
    A.kind = LayerKind::NonLinearity;
    A.dims.n = topo[l + 1];
    A.activation = (l + 2 < topo.size()) ? hidden : Activation{ActFn::Softmax, ActVariant::None};
    m.layers.push_back(std::move(A));
  }
  return m;
}

}  // namespace gcinfer
