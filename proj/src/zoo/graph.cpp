// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/zoo/graph.hpp"

#include <cmath>
#include <string>

#include "fsa/common/errors.hpp"

namespace fsa::zoo {

using ndgrad::shape_numel;
using ndgrad::shape_str;

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::kTimbre: return "timbre";
    case Arch::kVgg: return "vgg";
    case Arch::kSbcnn: return "sbcnn";
    case Arch::kProtoVgg: return "proto_vgg";
    case Arch::kVggishLike: return "vggish_like";
    case Arch::kTransferSoftmax: return "transfer_softmax";
    case Arch::kTransferProto: return "transfer_proto";
    case Arch::kCustom: return "custom";
  }
  return "unknown";
}

Arch arch_from_name(std::string_view name) {
  for (Arch a : {Arch::kTimbre, Arch::kVgg, Arch::kSbcnn, Arch::kProtoVgg, Arch::kVggishLike,
                 Arch::kTransferSoftmax, Arch::kTransferProto, Arch::kCustom}) {
    if (arch_name(a) == name) return a;
  }
  throw ArgumentError("unknown architecture '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Shape inference.

namespace {

Shape layer_output_shape(const LayerDesc& l, const Shape& in) {
  auto need_rank = [&](std::size_t r) {
    if (in.size() != r) {
      throw DimensionError("layer '" + l.name + "' expects rank-" + std::to_string(r) +
                           " input, got " + shape_str(in));
    }
  };
  switch (l.kind) {
    case LayerKind::kCompress:
    case LayerKind::kActivation:
    case LayerKind::kDropout:
    case LayerKind::kBatchNorm:
      return in;
    case LayerKind::kConv: {
      need_rank(3);
      const Shape out = ndgrad::conv2d_output_shape({1, in[0], in[1], in[2]},
                                                    {l.units, in[0], l.kernel_h, l.kernel_w},
                                                    l.padding);
      return {out[1], out[2], out[3]};
    }
    case LayerKind::kMaxPool: {
      need_rank(3);
      const Shape out =
          ndgrad::maxpool2d_output_shape({1, in[0], in[1], in[2]}, l.pool_h, l.pool_w);
      return {out[1], out[2], out[3]};
    }
    case LayerKind::kGlobalMax:
      need_rank(3);
      return {in[0]};
    case LayerKind::kFlatten:
      return {shape_numel(in)};
    case LayerKind::kDense:
      need_rank(1);
      return {l.units};
  }
  return in;
}

std::size_t layer_parameter_count(const LayerDesc& l, const Shape& in) {
  switch (l.kind) {
    case LayerKind::kCompress:
      return 2;
    case LayerKind::kConv:
      return l.units * in[0] * l.kernel_h * l.kernel_w + l.units;
    case LayerKind::kBatchNorm:
      return 2 * in[0];
    case LayerKind::kDense:
      return in[0] * l.units + l.units;
    default:
      return 0;
  }
}

}  // namespace

std::vector<Shape> infer_shapes(const GraphDesc& desc) {
  std::vector<Shape> shapes;
  Shape cur = desc.input;
  for (const LayerDesc& l : desc.layers) {
    cur = layer_output_shape(l, cur);
    shapes.push_back(cur);
  }
  return shapes;
}

std::size_t count_parameters(const GraphDesc& desc) {
  std::size_t total = 0;
  Shape cur = desc.input;
  for (const LayerDesc& l : desc.layers) {
    total += layer_parameter_count(l, cur);
    cur = layer_output_shape(l, cur);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Layers.

class Layer {
 public:
  explicit Layer(LayerDesc desc) : desc_(std::move(desc)) {}
  virtual ~Layer() = default;
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual Tensor forward(const Tensor& x, Mode mode, SeededRng* rng) = 0;
  virtual Tensor infer(const Tensor& x) const = 0;
  virtual Tensor backward(const Tensor& grad_output, bool need_input_grad) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual std::vector<ModelGraph::StateView> state() { return {}; }

  const LayerDesc& desc() const { return desc_; }

 protected:
  LayerDesc desc_;
};

namespace {

Parameter make_weight(const std::string& name, Shape shape, std::size_t fan_in,
                      std::size_t fan_out, const LayerDesc& d, SeededRng& rng) {
  const double limit = d.init == Init::kHeUniform
                           ? std::sqrt(6.0 / static_cast<double>(fan_in))
                           : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Parameter p{name, Tensor(std::move(shape)), ndgrad::LrGroup::kFast, d.weight_decay};
  for (double& v : p.tensor.values()) v = rng.uniform(-limit, limit);
  return p;
}

Parameter make_bias(const std::string& name, std::size_t n, double weight_decay,
                    double fill = 0.0) {
  return Parameter{name, Tensor({n}, fill), ndgrad::LrGroup::kFast, weight_decay};
}

class CompressLayer final : public Layer {
 public:
  explicit CompressLayer(LayerDesc d) : Layer(std::move(d)) {
    compression_ = frontend::LogCompression::log_learn();
    compression_.pre_alpha.name = desc_.name + ".pre_alpha";
    compression_.pre_beta.name = desc_.name + ".pre_beta";
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<CompressLayer>(*this); }
  Tensor forward(const Tensor& x, Mode, SeededRng*) override {
    input_ = x;
    return frontend::compress(x, compression_);
  }
  Tensor infer(const Tensor& x) const override { return frontend::compress(x, compression_); }
  Tensor backward(const Tensor& g, bool) override {
    frontend::compress_backward(input_, compression_, g);
    return {};
  }
  std::vector<Parameter*> parameters() override {
    return {&compression_.pre_alpha, &compression_.pre_beta};
  }

 private:
  frontend::LogCompression compression_;
  Tensor input_;
};

class ConvLayer final : public Layer {
 public:
  ConvLayer(LayerDesc d, std::size_t in_channels, SeededRng& rng) : Layer(std::move(d)) {
    const std::size_t k = desc_.kernel_h * desc_.kernel_w;
    kernel_ = make_weight(desc_.name + ".kernel",
                          {desc_.units, in_channels, desc_.kernel_h, desc_.kernel_w},
                          in_channels * k, desc_.units * k, desc_, rng);
    bias_ = make_bias(desc_.name + ".bias", desc_.units, desc_.weight_decay);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvLayer>(*this); }
  Tensor forward(const Tensor& x, Mode, SeededRng*) override {
    input_ = x;
    return ndgrad::conv2d(x, kernel_, bias_, desc_.padding);
  }
  Tensor infer(const Tensor& x) const override {
    return ndgrad::conv2d(x, kernel_, bias_, desc_.padding);
  }
  Tensor backward(const Tensor& g, bool need) override {
    return ndgrad::conv2d_backward(input_, kernel_, bias_, desc_.padding, g, need);
  }
  std::vector<Parameter*> parameters() override { return {&kernel_, &bias_}; }

 private:
  Parameter kernel_, bias_;
  Tensor input_;
};

class BatchNormLayer final : public Layer {
 public:
  BatchNormLayer(LayerDesc d, std::size_t channels)
      : Layer(std::move(d)),
        gamma_(make_bias(desc_.name + ".gamma", channels, 0.0, 1.0)),
        beta_(make_bias(desc_.name + ".beta", channels, 0.0)),
        stats_(channels) {}
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNormLayer>(*this); }
  Tensor forward(const Tensor& x, Mode mode, SeededRng*) override {
    return ndgrad::batchnorm(x, gamma_, beta_, mode, stats_, &cache_);
  }
  Tensor infer(const Tensor& x) const override {
    return ndgrad::batchnorm_infer(x, gamma_, beta_, stats_);
  }
  Tensor backward(const Tensor& g, bool need) override {
    return ndgrad::batchnorm_backward(cache_, gamma_, beta_, g, need);
  }
  std::vector<Parameter*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<ModelGraph::StateView> state() override {
    return {{desc_.name + ".running_mean", &stats_.mean},
            {desc_.name + ".running_var", &stats_.var}};
  }

 private:
  Parameter gamma_, beta_;
  ndgrad::RunningStats stats_;
  ndgrad::BatchNormCache cache_;
};

class ActivationLayer final : public Layer {
 public:
  using Layer::Layer;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<ActivationLayer>(*this);
  }
  Tensor forward(const Tensor& x, Mode, SeededRng*) override {
    output_ = ndgrad::activation(x, desc_.activation);
    return output_;
  }
  Tensor infer(const Tensor& x) const override { return ndgrad::activation(x, desc_.activation); }
  Tensor backward(const Tensor& g, bool) override {
    return ndgrad::activation_backward(output_, desc_.activation, g);
  }

 private:
  Tensor output_;
};

class MaxPoolLayer final : public Layer {
 public:
  using Layer::Layer;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPoolLayer>(*this); }
  Tensor forward(const Tensor& x, Mode, SeededRng*) override {
    input_shape_ = x.shape();
    auto r = ndgrad::maxpool2d(x, desc_.pool_h, desc_.pool_w);
    argmax_ = std::move(r.argmax);
    return std::move(r.output);
  }
  Tensor infer(const Tensor& x) const override {
    return ndgrad::maxpool2d(x, desc_.pool_h, desc_.pool_w).output;
  }
  Tensor backward(const Tensor& g, bool) override {
    return ndgrad::maxpool2d_backward(input_shape_, argmax_, g);
  }

 private:
  Shape input_shape_;
  std::vector<std::uint32_t> argmax_;
};

class GlobalMaxLayer final : public Layer {
 public:
  using Layer::Layer;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<GlobalMaxLayer>(*this);
  }
  Tensor forward(const Tensor& x, Mode, SeededRng*) override {
    input_shape_ = x.shape();
    auto r = ndgrad::global_max(x);
    argmax_ = std::move(r.argmax);
    return std::move(r.output);
  }
  Tensor infer(const Tensor& x) const override { return ndgrad::global_max(x).output; }
  Tensor backward(const Tensor& g, bool) override {
    return ndgrad::maxpool2d_backward(input_shape_, argmax_, g);
  }

 private:
  Shape input_shape_;
  std::vector<std::uint32_t> argmax_;
};

class FlattenLayer final : public Layer {
 public:
  using Layer::Layer;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<FlattenLayer>(*this); }
  Tensor forward(const Tensor& x, Mode, SeededRng*) override {
    input_shape_ = x.shape();
    return infer(x);
  }
  Tensor infer(const Tensor& x) const override {
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
  }
  Tensor backward(const Tensor& g, bool) override { return g.reshaped(input_shape_); }

 private:
  Shape input_shape_;
};

class DropoutLayer final : public Layer {
 public:
  using Layer::Layer;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DropoutLayer>(*this); }
  Tensor forward(const Tensor& x, Mode mode, SeededRng* rng) override {
    if (mode == Mode::kTrain && desc_.dropout > 0.0 && rng == nullptr) {
      throw StateError("dropout layer '" + desc_.name + "' needs an rng in train mode");
    }
    SeededRng unused(0);
    return ndgrad::dropout(x, desc_.dropout, mode, rng ? *rng : unused, &mask_);
  }
  Tensor infer(const Tensor& x) const override { return x; }
  Tensor backward(const Tensor& g, bool) override { return ndgrad::dropout_backward(mask_, g); }

 private:
  std::vector<double> mask_;
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(LayerDesc d, std::size_t d_in, SeededRng& rng) : Layer(std::move(d)) {
    weight_ = make_weight(desc_.name + ".weight", {d_in, desc_.units}, d_in, desc_.units, desc_,
                          rng);
    bias_ = make_bias(desc_.name + ".bias", desc_.units, desc_.weight_decay);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }
  Tensor forward(const Tensor& x, Mode, SeededRng*) override {
    input_ = x;
    return ndgrad::dense(x, weight_, bias_);
  }
  Tensor infer(const Tensor& x) const override { return ndgrad::dense(x, weight_, bias_); }
  Tensor backward(const Tensor& g, bool need) override {
    return ndgrad::dense_backward(input_, weight_, bias_, g, need);
  }
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }

 private:
  Parameter weight_, bias_;
  Tensor input_;
};

}  // namespace

// ---------------------------------------------------------------------------
// ModelGraph.

ModelGraph::ModelGraph(GraphDesc desc, std::uint64_t seed) : desc_(std::move(desc)) {
  if (desc_.input.size() != 3) {
    throw DimensionError("graph input must be [C,H,W], got " + shape_str(desc_.input));
  }
  const std::vector<Shape> shapes = infer_shapes(desc_);
  Shape in = desc_.input;
  for (std::size_t i = 0; i < desc_.layers.size(); ++i) {
    const LayerDesc& l = desc_.layers[i];
    SeededRng rng(derive_seed(seed, {i}));
    switch (l.kind) {
      case LayerKind::kCompress:
        if (i != 0) throw ArgumentError("compression must be the first layer");
        layers_.push_back(std::make_unique<CompressLayer>(l));
        break;
      case LayerKind::kConv:
        layers_.push_back(std::make_unique<ConvLayer>(l, in[0], rng));
        break;
      case LayerKind::kBatchNorm:
        layers_.push_back(std::make_unique<BatchNormLayer>(l, in[0]));
        break;
      case LayerKind::kActivation:
        layers_.push_back(std::make_unique<ActivationLayer>(l));
        break;
      case LayerKind::kMaxPool:
        layers_.push_back(std::make_unique<MaxPoolLayer>(l));
        break;
      case LayerKind::kGlobalMax:
        layers_.push_back(std::make_unique<GlobalMaxLayer>(l));
        break;
      case LayerKind::kFlatten:
        layers_.push_back(std::make_unique<FlattenLayer>(l));
        break;
      case LayerKind::kDropout:
        layers_.push_back(std::make_unique<DropoutLayer>(l));
        break;
      case LayerKind::kDense:
        layers_.push_back(std::make_unique<DenseLayer>(l, in[0], rng));
        break;
    }
    in = shapes[i];
  }
  if (in.size() != 1) {
    throw DimensionError("graph output must be a vector per sample, got " + shape_str(in));
  }
}

ModelGraph::~ModelGraph() = default;
ModelGraph::ModelGraph(ModelGraph&&) noexcept = default;
ModelGraph& ModelGraph::operator=(ModelGraph&&) noexcept = default;

ModelGraph::ModelGraph(const ModelGraph& other) : desc_(other.desc_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

ModelGraph& ModelGraph::operator=(const ModelGraph& other) {
  if (this != &other) {
    ModelGraph copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::size_t ModelGraph::n_outputs() const { return infer_shapes(desc_).back()[0]; }

Tensor ModelGraph::prepare_input(const Tensor& x) const {
  const Shape& want = desc_.input;
  if (x.rank() == 3 && want[0] == 1 && x.dim(1) == want[1] && x.dim(2) == want[2]) {
    return x.reshaped({x.dim(0), 1, x.dim(1), x.dim(2)});
  }
  if (x.rank() != 4 || x.dim(1) != want[0] || x.dim(2) != want[1] || x.dim(3) != want[2]) {
    throw DimensionError(std::string(arch_name(desc_.arch)) + " expects input [N," +
                         shape_str(want).substr(1) + " but got " + shape_str(x.shape()));
  }
  return x;
}

Tensor ModelGraph::forward(const Tensor& x, Mode mode, SeededRng* rng) {
  Tensor cur = prepare_input(x);
  for (auto& layer : layers_) cur = layer->forward(cur, mode, rng);
  return cur;
}

Tensor ModelGraph::infer(const Tensor& x) const {
  Tensor cur = prepare_input(x);
  for (const auto& layer : layers_) cur = layer->infer(cur);
  return cur;
}

void ModelGraph::backward(const Tensor& grad_output) {
  Tensor g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g, i > 0);
  }
}

std::vector<Parameter*> ModelGraph::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    for (Parameter* p : l->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const Parameter*> ModelGraph::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& l : layers_) {
    for (Parameter* p : l->parameters()) out.push_back(p);
  }
  return out;
}

Parameter* ModelGraph::find_parameter(std::string_view name) {
  for (Parameter* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

std::vector<ModelGraph::StateView> ModelGraph::state() {
  std::vector<StateView> out;
  for (auto& l : layers_) {
    for (auto& s : l->state()) out.push_back(s);
  }
  return out;
}

std::vector<ModelGraph::ConstStateView> ModelGraph::state() const {
  std::vector<ConstStateView> out;
  for (const auto& l : layers_) {
    for (auto& s : l->state()) out.push_back({s.name, s.values});
  }
  return out;
}

std::size_t ModelGraph::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->tensor.size();
  return n;
}

void ModelGraph::zero_grad() {
  for (Parameter* p : parameters()) {
    p->tensor.ensure_grad();
    p->tensor.zero_grad();
  }
}

Tensor as_batch(const Tensor& window) {
  return window.reshaped({1, 1, window.dim(0), window.dim(1)});
}

Tensor stack_batch(const std::vector<const Tensor*>& windows) {
  if (windows.empty()) throw ArgumentError("stack_batch: no windows");
  const Shape& s = windows.front()->shape();
  Tensor out({windows.size(), 1, s.at(0), s.at(1)});
  const std::size_t per = windows.front()->size();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    ndgrad::require_same_shape(windows[i]->shape(), s, "stack_batch");
    std::copy(windows[i]->raw(), windows[i]->raw() + per, out.raw() + i * per);
  }
  return out;
}

}  // namespace fsa::zoo
