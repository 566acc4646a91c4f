#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gcinfer/activation.hpp"
#include "gcinfer/fixed.hpp"

namespace gcinfer {

enum class LayerKind : uint8_t { Conv2D, MaxPool, MeanPool, FullyConnected, NonLinearity };

const char* to_string(LayerKind k);
LayerKind parse_layer_kind(const std::string& s);

// FC uses in/out. Conv2D uses c,h,w,oc,k,s. Pools use c,h,w,k,s. NL uses n.
struct Dims {
  uint32_t in = 0, out = 0;
  uint32_t c = 0, h = 0, w = 0, oc = 0, k = 0, s = 1;
  uint32_t n = 0;
  uint32_t out_h() const { return (h - k) / s + 1; }
  uint32_t out_w() const { return (w - k) / s + 1; }
};

struct LayerSpec {
  LayerKind kind = LayerKind::FullyConnected;
  Dims dims;
  Activation activation;
  FxVec weights;              // FC: [out][in]; Conv2D: [oc][c][k][k]
  std::vector<uint8_t> mask;  // 1 = kept, 0 = pruned; empty = dense
  FxVec bias;                 // optional, one per output neuron / channel

  size_t input_size() const;
  size_t output_size() const;
  size_t weight_count() const;
  bool kept(size_t i) const { return mask.empty() || mask[i] != 0; }
  Fixed16 weight(size_t i) const { return kept(i) ? weights[i] : Fixed16(); }
};

struct ModelDescriptor {
  std::string name;
  std::vector<uint32_t> input_shape;
  std::vector<LayerSpec> layers;

  size_t input_size() const;
  size_t output_size() const;
};

// Throws ShapeMismatch on inconsistent dims, weights, mask or bias.
void validate(const ModelDescriptor& m);

ModelDescriptor parse_model_json(const std::string& text);
std::string model_to_json(const ModelDescriptor& m, int indent = -1);
ModelDescriptor load_model(const std::string& path);
void save_model(const ModelDescriptor& m, const std::string& path);

// topology + activations + masks, no weight values
std::string architecture_string(const ModelDescriptor& m);
std::string sha256_hex(const std::string& data);

FxVec ref_layer_eval(const LayerSpec& layer, const FxVec& z);
FxVec ref_forward(const ModelDescriptor& m, const FxVec& x);
size_t ref_network_eval(const ModelDescriptor& m, const FxVec& x);

// Batch variants used by tests and the benchmark. The OpenMP one
// parallelises over samples; the serial one is the reference.
std::vector<size_t> ref_network_eval_batch_serial(const ModelDescriptor& m, const std::vector<FxVec>& xs);
std::vector<size_t> ref_network_eval_batch(const ModelDescriptor& m, const std::vector<FxVec>& xs);

// Dense FC stack helper used by fixtures and tests.
// topology e.g. {617, 50, 26}; activation applied between FC layers.
ModelDescriptor make_fc_model(const std::vector<uint32_t>& topology, Activation hidden, uint64_t seed,
                              double weight_scale = 1.0, bool with_bias = false);

}  // namespace gcinfer
