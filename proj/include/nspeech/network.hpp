#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "nspeech/architecture.hpp"
#include "nspeech/common.hpp"
#include "nspeech/conv.hpp"
#include "nspeech/layers.hpp"
#include "nspeech/pool.hpp"
#include "nspeech/rng.hpp"
#include "nspeech/tensor.hpp"

namespace nspeech {

// One convolutional classifier path: a layer schedule plus its parameters
// and the per-sample forward context needed for backpropagation.
class Cnn {
 public:
  explicit Cnn(ArchitectureConfig arch) : arch_(std::move(arch)) {
    validate_architecture(arch_);
    shapes_ = propagate_shapes(arch_);
    states_.resize(arch_.layers.size());
    allocate_params();
  }

  Cnn(ArchitectureConfig arch, uint64_t seed) : Cnn(std::move(arch)) { init_params(seed); }

  const ArchitectureConfig& arch() const { return arch_; }
  const std::vector<Shape3>& shapes() const { return shapes_; }
  int class_count() const { return arch_.class_count; }

  // Glorot-uniform weights from per-layer derived streams, zero biases.
  void init_params(uint64_t seed) {
    init_seed_ = seed;
    for (size_t i = 0; i < arch_.layers.size(); ++i) {
      const LayerDef& l = arch_.layers[i];
      LayerState& st = states_[i];
      if (l.kind == LayerKind::kPool) continue;
      size_t fan_in, fan_out;
      if (l.kind == LayerKind::kConv) {
        const ConvSpec& c = l.conv;
        size_t in_c = i == 0 ? arch_.input_c : shapes_[i - 1].c;
        fan_in = static_cast<size_t>(c.kernel_h) * c.kernel_w * in_c;
        fan_out = static_cast<size_t>(c.kernel_h) * c.kernel_w * c.filter_count;
      } else {
        fan_in = st.w.shape[0];
        fan_out = st.w.shape[1];
      }
      double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      Rng rng(derive_seed(seed, "layer" + std::to_string(i) + "/weights"));
      for (double& x : st.w.v) x = rng.uniform(-limit, limit);
      for (double& x : st.b.v) x = 0.0;
    }
  }

  // Runs the net on one H x W x C sample, retaining per-layer context for a
  // following backward() call. Returns the raw class logits.
  const std::vector<double>& forward(const Tensor& input) {
    if (input.shape.size() != 3 || static_cast<int>(input.shape[0]) != arch_.input_h ||
        static_cast<int>(input.shape[1]) != arch_.input_w ||
        static_cast<int>(input.shape[2]) != arch_.input_c)
      throw ConfigError("net: input shape " + input.shape_str() + " does not match configured " +
                        std::to_string(arch_.input_h) + "x" + std::to_string(arch_.input_w) + "x" +
                        std::to_string(arch_.input_c));
    if (!input.all_finite()) throw NumericError("net: non-finite input sample");
    input_ = input;
    const Tensor* cur = &input_;
    for (size_t i = 0; i < arch_.layers.size(); ++i) {
      const LayerDef& l = arch_.layers[i];
      LayerState& st = states_[i];
      switch (l.kind) {
        case LayerKind::kConv:
          st.pre = conv2d_forward(*cur, l.conv, st.w, st.b, &st.conv_cache);
          break;
        case LayerKind::kPool:
          st.pre = max_pool_forward(*cur, l.pool, &st.pool_cache);
          break;
        case LayerKind::kFc:
          st.pre = fully_connected_forward(*cur, st.w, st.b);
          break;
      }
      switch (l.act) {
        case Activation::kTanh: st.post = tanh_forward(st.pre); break;
        case Activation::kRelu: st.post = relu_forward(st.pre); break;
        case Activation::kNone: st.post = st.pre; break;
      }
      cur = &st.post;
    }
    logits_ = cur->v;
    return logits_;
  }

  // Accumulates parameter gradients from a gradient over the logits. Must
  // follow a forward() on the same sample.
  void backward(const std::vector<double>& dlogits) {
    if (states_.empty() || states_.back().post.size() != dlogits.size())
      throw NumericError("net: backward without matching forward");
    Tensor d(states_.back().post.shape);
    d.v = dlogits;
    for (size_t ri = arch_.layers.size(); ri-- > 0;) {
      const LayerDef& l = arch_.layers[ri];
      LayerState& st = states_[ri];
      switch (l.act) {
        case Activation::kTanh: d = tanh_backward(st.post, d); break;
        case Activation::kRelu: d = relu_backward(st.pre, d); break;
        case Activation::kNone: break;
      }
      const Tensor& layer_in = ri == 0 ? input_ : states_[ri - 1].post;
      switch (l.kind) {
        case LayerKind::kConv:
          d = conv2d_backward(st.conv_cache, l.conv, st.w, st.b, d);
          break;
        case LayerKind::kPool:
          d = max_pool_backward(st.pool_cache, d);
          break;
        case LayerKind::kFc:
          d = fully_connected_backward(layer_in, st.w, st.b, d);
          break;
      }
    }
  }

  std::vector<Tensor*> params() {
    std::vector<Tensor*> out;
    for (size_t i = 0; i < arch_.layers.size(); ++i) {
      if (arch_.layers[i].kind == LayerKind::kPool) continue;
      out.push_back(&states_[i].w);
      out.push_back(&states_[i].b);
    }
    return out;
  }

  std::vector<const Tensor*> params() const {
    std::vector<const Tensor*> out;
    for (size_t i = 0; i < arch_.layers.size(); ++i) {
      if (arch_.layers[i].kind == LayerKind::kPool) continue;
      out.push_back(&states_[i].w);
      out.push_back(&states_[i].b);
    }
    return out;
  }

  size_t param_count() const {
    size_t n = 0;
    for (const Tensor* p : params()) n += p->size();
    return n;
  }

  // Hash over the layer schedule and the exact parameter bit patterns.
  uint64_t content_hash() const {
    uint64_t h = fnv1a64(emit_architecture(arch_));
    for (const Tensor* p : params())
      h = fnv1a64(p->v.data(), p->v.size() * sizeof(double), h);
    return h;
  }

  uint64_t init_seed() const { return init_seed_; }
  long long iterations() const { return iterations_; }
  void set_iterations(long long n) { iterations_ = n; }

  std::string shapes_line() const {
    std::string s;
    for (size_t i = 0; i < shapes_.size(); ++i) {
      if (i) s += ",";
      s += shapes_[i].str();
    }
    return s;
  }

  // Checkpoint layout: text header (magic, layer schedule, shape chain, init
  // seed, iteration count, parameter count) followed by the raw
  // little-endian doubles of every parameter tensor in schedule order.
  // Round-trips bit-exactly.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("net: cannot open checkpoint for writing: " + path);
    out << "nspeech-net v1\n";
    out << emit_architecture(arch_);
    out << "end-arch\n";
    out << "shapes " << shapes_line() << "\n";
    out << "seed " << init_seed_ << "\n";
    out << "iterations " << iterations_ << "\n";
    out << "params " << param_count() << "\n";
    for (const Tensor* p : params())
      out.write(reinterpret_cast<const char*>(p->v.data()),
                static_cast<std::streamsize>(p->v.size() * sizeof(double)));
    if (!out) throw DataError("net: short write on checkpoint: " + path);
  }

  static Cnn load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("net: cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "nspeech-net v1")
      throw DataError("net: bad checkpoint magic in " + path);
    std::string arch_text;
    while (std::getline(in, line) && line != "end-arch") arch_text += line + "\n";
    if (line != "end-arch") throw DataError("net: truncated checkpoint header in " + path);
    Cnn net(parse_architecture_text(arch_text, path));
    if (!std::getline(in, line) || line.rfind("shapes ", 0) != 0)
      throw DataError("net: missing shape chain in " + path);
    if (line.substr(7) != net.shapes_line())
      throw DataError("net: checkpoint shape chain '" + line.substr(7) + "' disagrees with schedule ('" +
                      net.shapes_line() + "') in " + path);
    if (!std::getline(in, line) || line.rfind("seed ", 0) != 0)
      throw DataError("net: missing seed in " + path);
    net.init_seed_ = std::stoull(line.substr(5));
    if (!std::getline(in, line) || line.rfind("iterations ", 0) != 0)
      throw DataError("net: missing iteration count in " + path);
    net.iterations_ = std::stoll(line.substr(11));
    if (!std::getline(in, line) || line.rfind("params ", 0) != 0)
      throw DataError("net: missing parameter count in " + path);
    size_t declared = std::stoull(line.substr(7));
    if (net.param_count() != declared)
      throw DataError("net: checkpoint declares " + std::to_string(declared) + " params, schedule needs " +
                      std::to_string(net.param_count()));
    for (Tensor* p : net.params()) {
      in.read(reinterpret_cast<char*>(p->v.data()),
              static_cast<std::streamsize>(p->v.size() * sizeof(double)));
      if (static_cast<size_t>(in.gcount()) != p->v.size() * sizeof(double))
        throw DataError("net: truncated parameter payload in " + path);
    }
    char extra;
    if (in.read(&extra, 1)) throw DataError("net: trailing bytes after parameters in " + path);
    return net;
  }

 private:
  struct LayerState {
    Tensor w, b;
    ConvCache conv_cache;
    PoolCache pool_cache;
    Tensor pre;   // before the activation
    Tensor post;  // after the activation
  };

  void allocate_params() {
    for (size_t i = 0; i < arch_.layers.size(); ++i) {
      const LayerDef& l = arch_.layers[i];
      LayerState& st = states_[i];
      if (l.kind == LayerKind::kConv) {
        size_t in_c = i == 0 ? arch_.input_c : shapes_[i - 1].c;
        st.w = Tensor({static_cast<size_t>(l.conv.kernel_h), static_cast<size_t>(l.conv.kernel_w), in_c,
                       static_cast<size_t>(l.conv.filter_count)});
        st.b = Tensor({static_cast<size_t>(l.conv.filter_count)});
      } else if (l.kind == LayerKind::kFc) {
        size_t in_n = i == 0 ? static_cast<size_t>(arch_.input_h) * arch_.input_w * arch_.input_c
                             : shapes_[i - 1].count();
        st.w = Tensor({in_n, static_cast<size_t>(l.fc_width)});
        st.b = Tensor({static_cast<size_t>(l.fc_width)});
      }
    }
  }

  ArchitectureConfig arch_;
  std::vector<Shape3> shapes_;
  std::vector<LayerState> states_;
  Tensor input_;
  std::vector<double> logits_;
  uint64_t init_seed_ = 0;
  long long iterations_ = 0;
};

}  // namespace nspeech
