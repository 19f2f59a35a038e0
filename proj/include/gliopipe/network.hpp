#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gliopipe/layers.hpp"
#include "gliopipe/volume.hpp"

namespace gliopipe {

/// Three dense encoder modules, two convolution decoder modules, logistic head.
struct NetworkSpec {
  int height = 240;
  int width = 240;
  int in_channels = 4;
  std::array<int, 3> encoder_maps = {64, 128, 256};
  int dense_block_depth = 3;
  int kernel_size = 3;

  /// Decoder widths mirror the first two encoder levels in reverse.
  std::array<int, 2> decoder_maps() const { return {encoder_maps[1], encoder_maps[0]}; }
  /// Per-layer growth inside dense module i; the 1x1 transition projects the
  /// concatenation to encoder_maps[i].
  int growth(int level) const { return std::max(1, encoder_maps[level] / 4); }

  void validate() const;
  std::string fingerprint() const;
};

/// Reconstructs a spec from its fingerprint string (weight files are
/// self-describing through it).
NetworkSpec spec_from_fingerprint(const std::string& fp);

struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;

  std::size_t count() const {
    std::size_t n = 1;
    for (int d : shape) n *= std::size_t(d);
    return n;
  }
};

/// Named parameter tensors plus the spec fingerprint they belong to.
struct WeightSet {
  std::string fingerprint;
  std::string stage;           // cascade provenance: WT/NCR/ED/ET or empty
  std::string parent_checksum; // checksum of the WT weight file for subregions
  std::vector<ParamTensor> tensors;
};

void save_weights(const WeightSet& w, const std::string& path);
WeightSet load_weights(const std::string& path);
/// FNV-1a checksum over the tensor payload, hex string.
std::string weights_checksum(const WeightSet& w);

/// Per-layer description, exposed for architecture conformance checks.
struct LayerInfo {
  std::string name;
  std::string kind;  // conv/pool/upsample/concat/sigmoid
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
};

/// Gradients aligned with Network::params() ordering.
struct GradBuffer {
  std::vector<std::vector<float>> g;
  void zero() {
    for (auto& t : g) std::fill(t.begin(), t.end(), 0.f);
  }
};

class Network {
 public:
  /// Deterministic He-normal initialization from the seed.
  Network(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<ParamTensor>& params() const { return params_; }
  std::vector<ParamTensor>& mutable_params() { return params_; }
  const std::vector<LayerInfo>& layers() const { return layers_; }

  /// Output widths of the five modules in forward order.
  std::vector<int> module_channels() const;

  /// Per-sample activations retained for backward.
  struct Context {
    std::vector<FeatureMap> acts;
    std::vector<std::vector<std::int32_t>> pool_idx;
  };

  /// Maps a 4xHxW slice to a 1xHxW probability map. ctx may be null for
  /// inference-only calls.
  FeatureMap forward(const FeatureMap& input, Context* ctx) const;

  /// Backpropagates d(loss)/d(output) and accumulates parameter gradients.
  void backward(const Context& ctx, const FeatureMap& dout, GradBuffer& grads) const;

  GradBuffer make_grad_buffer() const;

  WeightSet get_weights() const;
  void set_weights(const WeightSet& w);

 private:
  struct Node {
    enum Kind { Input, Conv, Relu, MaxPool, Upsample, Concat, Sigmoid } kind;
    std::vector<int> inputs;
    int param = -1;  // index of weight tensor; bias is param+1
    int out_c = 0;
    int k = 0;
  };

  int add_conv(int input, const std::string& name, int in_c, int out_c, int k);
  int add_simple(Node::Kind kind, int input, const std::string& name, int out_c);
  int add_concat(const std::vector<int>& inputs, const std::string& name);

  NetworkSpec spec_;
  std::vector<Node> nodes_;
  std::vector<ParamTensor> params_;
  std::vector<LayerInfo> layers_;
  int output_node_ = -1;
};

}  // namespace gliopipe
