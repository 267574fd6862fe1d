// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fsa/common/rng.hpp"
#include "fsa/frontend/compression.hpp"
#include "fsa/ndgrad/ops.hpp"
#include "fsa/ndgrad/parameter.hpp"
#include "fsa/ndgrad/tensor.hpp"

namespace fsa::zoo {

using ndgrad::Activation;
using ndgrad::Mode;
using ndgrad::Padding;
using ndgrad::Parameter;
using ndgrad::Shape;
using ndgrad::Tensor;

enum class Arch : std::uint32_t {
  kTimbre = 1,
  kVgg = 2,
  kSbcnn = 3,
  kProtoVgg = 4,
  kVggishLike = 5,
  kTransferSoftmax = 6,  // vggish_like backbone + softmax head
  kTransferProto = 7,    // vggish_like backbone + linear embedding head
  kCustom = 100,         // hand-assembled graphs (tests, probes)
};

std::string_view arch_name(Arch arch);
Arch arch_from_name(std::string_view name);

enum class OutputKind : std::uint32_t { kSoftmax = 0, kLinearEmbedding = 1 };

enum class LayerKind : std::uint32_t {
  kCompress,
  kConv,
  kBatchNorm,
  kActivation,
  kMaxPool,
  kGlobalMax,
  kFlatten,
  kDropout,
  kDense,
};

enum class Init : std::uint32_t { kHeUniform, kGlorotUniform };

struct LayerDesc {
  LayerKind kind = LayerKind::kFlatten;
  std::string name;
  std::size_t units = 0;  // conv filters or dense outputs
  std::size_t kernel_h = 0, kernel_w = 0;
  Padding padding = Padding::kValid;
  Activation activation = Activation::kLinear;
  std::size_t pool_h = 0, pool_w = 0;
  double dropout = 0.0;
  double weight_decay = 0.0;
  Init init = Init::kHeUniform;
};

// Everything needed to rebuild a graph's structure. Parameter values live in
// the graph (or a checkpoint), never here.
struct GraphDesc {
  Arch arch = Arch::kCustom;
  Shape input;  // per-sample shape [C, H, W]
  std::vector<LayerDesc> layers;
  OutputKind output_kind = OutputKind::kSoftmax;
};

// Per-sample output shape after every layer; throws DimensionError when the
// descriptor cannot be applied to its input shape.
std::vector<Shape> infer_shapes(const GraphDesc& desc);
// Closed-form trainable parameter count (running statistics excluded).
std::size_t count_parameters(const GraphDesc& desc);

class Layer;

// Ordered layer list with its parameters and a forward/backward contract.
//
// forward() caches what backward() needs; infer() is const, caches nothing
// and is safe to call from several threads at once. A graph under training is
// owned by a single thread.
class ModelGraph {
 public:
  ModelGraph(GraphDesc desc, std::uint64_t seed);
  ~ModelGraph();
  ModelGraph(ModelGraph&&) noexcept;
  ModelGraph& operator=(ModelGraph&&) noexcept;
  ModelGraph(const ModelGraph& other);
  ModelGraph& operator=(const ModelGraph& other);

  const GraphDesc& desc() const { return desc_; }
  Arch arch() const { return desc_.arch; }
  OutputKind output_kind() const { return desc_.output_kind; }
  std::size_t n_outputs() const;
  const Shape& input_shape() const { return desc_.input; }

  // x is [N, C, H, W] (or [N, H, W] for single-channel inputs).
  Tensor forward(const Tensor& x, Mode mode, SeededRng* rng = nullptr);
  Tensor infer(const Tensor& x) const;
  // Accumulates parameter gradients for the last forward() call.
  void backward(const Tensor& grad_output);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter* find_parameter(std::string_view name);

  // Non-trainable buffers (batch-norm running statistics) by name.
  struct StateView {
    std::string name;
    std::vector<double>* values;
  };
  std::vector<StateView> state();
  struct ConstStateView {
    std::string name;
    const std::vector<double>* values;
  };
  std::vector<ConstStateView> state() const;

  std::size_t parameter_count() const;
  void zero_grad();

 private:
  Tensor prepare_input(const Tensor& x) const;

  GraphDesc desc_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Wraps a single-channel [bins, frames] window into a [1, 1, bins, frames]
// batch.
Tensor as_batch(const Tensor& window);
// Stacks equally-shaped [bins, frames] windows into [N, 1, bins, frames].
Tensor stack_batch(const std::vector<const Tensor*>& windows);

}  // namespace fsa::zoo
