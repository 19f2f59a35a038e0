#include "gliopipe/network.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gliopipe/errors.hpp"

namespace gliopipe {

using json = nlohmann::json;

void NetworkSpec::validate() const {
  if (height <= 0 || width <= 0) throw ShapeError("non-positive input shape");
  if (height % 4 || width % 4)
    throw ShapeError("input height/width must be divisible by 4 (two pooling stages)");
  if (!(encoder_maps[0] < encoder_maps[1] && encoder_maps[1] < encoder_maps[2]))
    throw ConfigError("encoder maps must be strictly increasing");
  if (dense_block_depth < 1) throw ConfigError("dense_block_depth must be >= 1");
  if (kernel_size != 3) throw ConfigError("only 3x3 kernels are supported");
  if (in_channels != 4) throw ConfigError("network expects 4 modality channels");
}

std::string NetworkSpec::fingerprint() const {
  std::ostringstream os;
  os << "in:" << height << "x" << width << "x" << in_channels
     << ";enc:" << encoder_maps[0] << "," << encoder_maps[1] << "," << encoder_maps[2]
     << ";depth:" << dense_block_depth << ";k:" << kernel_size;
  return os.str();
}

NetworkSpec spec_from_fingerprint(const std::string& fp) {
  NetworkSpec s;
  int c = 0;
  if (std::sscanf(fp.c_str(), "in:%dx%dx%d;enc:%d,%d,%d;depth:%d;k:%d", &s.height,
                  &s.width, &c, &s.encoder_maps[0], &s.encoder_maps[1],
                  &s.encoder_maps[2], &s.dense_block_depth, &s.kernel_size) != 8)
    throw IncompatibleWeights("unparseable spec fingerprint: " + fp);
  s.in_channels = c;
  return s;
}

int Network::add_conv(int input, const std::string& name, int in_c, int out_c, int k) {
  ParamTensor w;
  w.name = name + ".w";
  w.shape = {out_c, in_c, k, k};
  ParamTensor b;
  b.name = name + ".b";
  b.shape = {out_c};
  int pidx = int(params_.size());
  params_.push_back(std::move(w));
  params_.push_back(std::move(b));

  Node n;
  n.kind = Node::Conv;
  n.inputs = {input};
  n.param = pidx;
  n.out_c = out_c;
  n.k = k;
  nodes_.push_back(n);
  layers_.push_back({name, "conv", in_c, out_c, k});
  return int(nodes_.size()) - 1;
}

int Network::add_simple(Node::Kind kind, int input, const std::string& name, int out_c) {
  Node n;
  n.kind = kind;
  n.inputs = {input};
  n.out_c = out_c;
  nodes_.push_back(n);
  const char* kind_name = kind == Node::Relu      ? "relu"
                          : kind == Node::MaxPool ? "pool"
                          : kind == Node::Upsample ? "upsample"
                                                   : "sigmoid";
  layers_.push_back({name, kind_name, out_c, out_c, 0});
  return int(nodes_.size()) - 1;
}

int Network::add_concat(const std::vector<int>& inputs, const std::string& name) {
  Node n;
  n.kind = Node::Concat;
  n.inputs = inputs;
  for (int i : inputs) n.out_c += nodes_[i].out_c;
  nodes_.push_back(n);
  layers_.push_back({name, "concat", n.out_c, n.out_c, 0});
  return int(nodes_.size()) - 1;
}

Network::Network(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();

  Node input;
  input.kind = Node::Input;
  input.out_c = spec_.in_channels;
  nodes_.push_back(input);
  layers_.push_back({"input", "input", 0, spec_.in_channels, 0});

  int cur = 0;
  std::array<int, 2> skips{};

  // encoder: dense module (densely connected 3x3 convs + 1x1 transition),
  // max-pool after levels 0 and 1
  for (int lvl = 0; lvl < 3; ++lvl) {
    const std::string mod = "enc" + std::to_string(lvl);
    const int g = spec_.growth(lvl);
    std::vector<int> feats = {cur};
    int feat_c = nodes_[cur].out_c;
    for (int l = 0; l < spec_.dense_block_depth; ++l) {
      int x = feats.size() == 1 ? feats[0]
                                : add_concat(feats, mod + ".cat" + std::to_string(l));
      add_conv(x, mod + ".dense" + std::to_string(l), feat_c, g, 3);
      int r = add_simple(Node::Relu, int(nodes_.size()) - 1, mod + ".dense" + std::to_string(l) + ".relu", g);
      feats.push_back(r);
      feat_c += g;
    }
    int cat = add_concat(feats, mod + ".cat_out");
    add_conv(cat, mod + ".trans", nodes_[cat].out_c, spec_.encoder_maps[lvl], 1);
    cur = add_simple(Node::Relu, int(nodes_.size()) - 1, mod + ".trans.relu",
                     spec_.encoder_maps[lvl]);
    if (lvl < 2) {
      skips[lvl] = cur;
      cur = add_simple(Node::MaxPool, cur, mod + ".pool", spec_.encoder_maps[lvl]);
    }
  }

  // decoder: upsample + conv, skip concatenation, two-conv module
  const auto dec_maps = spec_.decoder_maps();
  for (int j = 0; j < 2; ++j) {
    const std::string mod = "dec" + std::to_string(j);
    int up = add_simple(Node::Upsample, cur, mod + ".up", nodes_[cur].out_c);
    add_conv(up, mod + ".upconv", nodes_[up].out_c, dec_maps[j], 3);
    up = add_simple(Node::Relu, int(nodes_.size()) - 1, mod + ".upconv.relu", dec_maps[j]);
    int cat = add_concat({up, skips[1 - j]}, mod + ".skipcat");
    add_conv(cat, mod + ".conv0", nodes_[cat].out_c, dec_maps[j], 3);
    int r0 = add_simple(Node::Relu, int(nodes_.size()) - 1, mod + ".conv0.relu", dec_maps[j]);
    add_conv(r0, mod + ".conv1", dec_maps[j], dec_maps[j], 3);
    cur = add_simple(Node::Relu, int(nodes_.size()) - 1, mod + ".conv1.relu", dec_maps[j]);
  }

  add_conv(cur, "head", nodes_[cur].out_c, 1, 1);
  output_node_ = add_simple(Node::Sigmoid, int(nodes_.size()) - 1, "head.sigmoid", 1);

  // He-normal initialization, biases zero
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.f, 1.f);
  for (auto& p : params_) {
    p.data.assign(p.count(), 0.f);
    if (p.shape.size() == 4) {
      const int fan_in = p.shape[1] * p.shape[2] * p.shape[3];
      const float stddev = std::sqrt(2.f / float(fan_in));
      for (auto& v : p.data) v = normal(rng) * stddev;
    }
  }
}

std::vector<int> Network::module_channels() const {
  std::vector<int> out;
  for (const auto& l : layers_)
    if (l.name == "enc0.trans" || l.name == "enc1.trans" || l.name == "enc2.trans" ||
        l.name == "dec0.conv1" || l.name == "dec1.conv1")
      out.push_back(l.out_channels);
  return out;
}

FeatureMap Network::forward(const FeatureMap& input, Context* ctx) const {
  if (input.c != spec_.in_channels || input.h != spec_.height || input.w != spec_.width)
    throw ShapeError("input does not match network spec shape");
  for (float x : input.v)
    if (!std::isfinite(x)) throw InvalidInput("non-finite network input");

  Context local;
  Context& c = ctx ? *ctx : local;
  c.acts.assign(nodes_.size(), {});
  c.pool_idx.assign(nodes_.size(), {});
  c.acts[0] = input;

  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    const FeatureMap& x = c.acts[n.inputs[0]];
    switch (n.kind) {
      case Node::Conv:
        nn::conv_forward(x, params_[n.param].data, params_[n.param + 1].data, n.out_c,
                         n.k, c.acts[i]);
        break;
      case Node::Relu:
        nn::relu_forward(x, c.acts[i]);
        break;
      case Node::MaxPool:
        nn::maxpool2_forward(x, c.acts[i], c.pool_idx[i]);
        break;
      case Node::Upsample:
        nn::upsample2_forward(x, c.acts[i]);
        break;
      case Node::Concat: {
        std::vector<const FeatureMap*> xs;
        for (int in : n.inputs) xs.push_back(&c.acts[in]);
        nn::concat_forward(xs, c.acts[i]);
        break;
      }
      case Node::Sigmoid:
        nn::sigmoid_forward(x, c.acts[i]);
        break;
      case Node::Input:
        break;
    }
  }
  return c.acts[output_node_];
}

void Network::backward(const Context& ctx, const FeatureMap& dout, GradBuffer& grads) const {
  std::vector<FeatureMap> dacts(nodes_.size());
  dacts[output_node_] = dout;

  auto accumulate = [](FeatureMap& dst, FeatureMap&& src) {
    if (dst.v.empty()) {
      dst = std::move(src);
    } else {
      for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
    }
  };

  for (int i = int(nodes_.size()) - 1; i >= 1; --i) {
    if (dacts[i].v.empty()) continue;  // node not on the output path
    const Node& n = nodes_[i];
    const FeatureMap& dy = dacts[i];
    switch (n.kind) {
      case Node::Conv: {
        FeatureMap dx;
        nn::conv_backward(ctx.acts[n.inputs[0]], params_[n.param].data, n.out_c, n.k, dy,
                          dx, grads.g[n.param], grads.g[n.param + 1]);
        accumulate(dacts[n.inputs[0]], std::move(dx));
        break;
      }
      case Node::Relu: {
        FeatureMap dx;
        nn::relu_backward(ctx.acts[i], dy, dx);
        accumulate(dacts[n.inputs[0]], std::move(dx));
        break;
      }
      case Node::MaxPool: {
        FeatureMap dx;
        const FeatureMap& x = ctx.acts[n.inputs[0]];
        nn::maxpool2_backward(dy, ctx.pool_idx[i], x.h, x.w, dx);
        accumulate(dacts[n.inputs[0]], std::move(dx));
        break;
      }
      case Node::Upsample: {
        FeatureMap dx;
        nn::upsample2_backward(dy, dx);
        accumulate(dacts[n.inputs[0]], std::move(dx));
        break;
      }
      case Node::Concat: {
        std::vector<FeatureMap> parts;
        std::vector<FeatureMap*> ptrs;
        for (int in : n.inputs) {
          const FeatureMap& x = ctx.acts[in];
          parts.emplace_back(x.c, x.h, x.w);
        }
        for (auto& p : parts) ptrs.push_back(&p);
        nn::concat_backward(dy, ptrs);
        for (std::size_t k2 = 0; k2 < n.inputs.size(); ++k2)
          accumulate(dacts[n.inputs[k2]], std::move(parts[k2]));
        break;
      }
      case Node::Sigmoid: {
        FeatureMap dx;
        nn::sigmoid_backward(ctx.acts[i], dy, dx);
        accumulate(dacts[n.inputs[0]], std::move(dx));
        break;
      }
      case Node::Input:
        break;
    }
    dacts[i] = {};  // free as we go
  }
}

GradBuffer Network::make_grad_buffer() const {
  GradBuffer gb;
  gb.g.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i)
    gb.g[i].assign(params_[i].count(), 0.f);
  return gb;
}

WeightSet Network::get_weights() const {
  WeightSet w;
  w.fingerprint = spec_.fingerprint();
  w.tensors = params_;
  return w;
}

void Network::set_weights(const WeightSet& w) {
  if (w.fingerprint != spec_.fingerprint())
    throw IncompatibleWeights("weight fingerprint '" + w.fingerprint +
                              "' does not match network spec '" + spec_.fingerprint() + "'");
  if (w.tensors.size() != params_.size())
    throw IncompatibleWeights("tensor count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (w.tensors[i].name != params_[i].name || w.tensors[i].shape != params_[i].shape)
      throw IncompatibleWeights("tensor '" + w.tensors[i].name + "' mismatches network");
    params_[i].data = w.tensors[i].data;
  }
}

namespace {
constexpr char kWeightMagic[4] = {'G', 'L', 'W', 'T'};
}

void save_weights(const WeightSet& w, const std::string& path) {
  json header;
  header["fingerprint"] = w.fingerprint;
  header["stage"] = w.stage;
  header["parent"] = w.parent_checksum;
  json tensors = json::array();
  for (const auto& t : w.tensors) tensors.push_back({{"name", t.name}, {"shape", t.shape}});
  header["tensors"] = tensors;
  const std::string hs = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot create weight file: " + path);
    out.write(kWeightMagic, 4);
    std::uint32_t hlen = std::uint32_t(hs.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(hs.data(), std::streamsize(hs.size()));
    for (const auto& t : w.tensors)
      out.write(reinterpret_cast<const char*>(t.data.data()),
                std::streamsize(t.data.size() * sizeof(float)));
    if (!out) throw IoError("failed writing weight file: " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot finalize weight file: " + path);
}

WeightSet load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kWeightMagic, 4) != 0)
    throw IoError("not a weight file: " + path);
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 4);
  if (!in || hlen == 0 || hlen > (64u << 20)) throw IoError("corrupt weight header: " + path);
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (!in) throw IoError("truncated weight file: " + path);

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception&) {
    throw IoError("corrupt weight header: " + path);
  }

  WeightSet w;
  w.fingerprint = header.at("fingerprint").get<std::string>();
  w.stage = header.value("stage", "");
  w.parent_checksum = header.value("parent", "");
  for (const auto& tj : header.at("tensors")) {
    ParamTensor t;
    t.name = tj.at("name").get<std::string>();
    t.shape = tj.at("shape").get<std::vector<int>>();
    t.data.resize(t.count());
    in.read(reinterpret_cast<char*>(t.data.data()),
            std::streamsize(t.data.size() * sizeof(float)));
    if (!in) throw IoError("truncated weight file: " + path);
    w.tensors.push_back(std::move(t));
  }
  return w;
}

std::string weights_checksum(const WeightSet& w) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  mix(w.fingerprint.data(), w.fingerprint.size());
  for (const auto& t : w.tensors) {
    mix(t.name.data(), t.name.size());
    mix(t.data.data(), t.data.size() * sizeof(float));
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace gliopipe
