// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/zoo/builders.hpp"

#include <string>

#include "fsa/common/errors.hpp"

namespace fsa::zoo {
namespace {

LayerDesc conv(std::string name, std::size_t filters, std::size_t kh, std::size_t kw,
               Padding padding, double wd, Init init = Init::kHeUniform) {
  LayerDesc l;
  l.kind = LayerKind::kConv;
  l.name = std::move(name);
  l.units = filters;
  l.kernel_h = kh;
  l.kernel_w = kw;
  l.padding = padding;
  l.weight_decay = wd;
  l.init = init;
  return l;
}

LayerDesc dense(std::string name, std::size_t units, double wd, Init init) {
  LayerDesc l;
  l.kind = LayerKind::kDense;
  l.name = std::move(name);
  l.units = units;
  l.weight_decay = wd;
  l.init = init;
  return l;
}

LayerDesc simple(LayerKind kind, std::string name) {
  LayerDesc l;
  l.kind = kind;
  l.name = std::move(name);
  return l;
}

LayerDesc act(std::string name, Activation a) {
  LayerDesc l = simple(LayerKind::kActivation, std::move(name));
  l.activation = a;
  return l;
}

LayerDesc pool(std::string name, std::size_t ph, std::size_t pw) {
  LayerDesc l = simple(LayerKind::kMaxPool, std::move(name));
  l.pool_h = ph;
  l.pool_w = pw;
  return l;
}

LayerDesc drop(std::string name, double rate) {
  LayerDesc l = simple(LayerKind::kDropout, std::move(name));
  l.dropout = rate;
  return l;
}

void add_compression(GraphDesc& g, const BuildOptions& opts) {
  if (opts.compression == frontend::CompressionKind::kLogLearn) {
    g.layers.push_back(simple(LayerKind::kCompress, "compress"));
  }
}

void require_classes(std::size_t n_classes) {
  if (n_classes < 2) throw ArgumentError("a classifier needs at least 2 classes");
}

// Five conv/bn/elu/pool blocks shared by the softmax VGG and the embedding VGG.
void add_vgg_blocks(GraphDesc& g, std::size_t filters, double wd) {
  for (int i = 1; i <= 5; ++i) {
    const std::string p = "block" + std::to_string(i);
    g.layers.push_back(conv(p + ".conv", filters, 3, 3, Padding::kSame, wd));
    g.layers.push_back(simple(LayerKind::kBatchNorm, p + ".bn"));
    g.layers.push_back(act(p + ".elu", Activation::kElu));
    g.layers.push_back(pool(p + ".pool", 2, 2));
  }
  g.layers.push_back(simple(LayerKind::kFlatten, "flatten"));
}

}  // namespace

Shape patch128_input() { return {1, 128, 128}; }
Shape transfer64_input() { return {1, 64, 96}; }

GraphDesc build_timbre(std::size_t n_classes, BuildOptions opts) {
  require_classes(n_classes);
  GraphDesc g;
  g.arch = Arch::kTimbre;
  g.input = patch128_input();
  add_compression(g, opts);
  g.layers.push_back(conv("timbre.conv", n_classes, 108, 7, Padding::kValid, kL2Penalty));
  g.layers.push_back(act("timbre.relu", Activation::kRelu));
  g.layers.push_back(simple(LayerKind::kGlobalMax, "timbre.max"));
  return g;
}

GraphDesc build_vgg(std::size_t n_classes, std::size_t filters_per_layer, BuildOptions opts) {
  require_classes(n_classes);
  if (filters_per_layer == 0) throw ArgumentError("vgg needs at least one filter per layer");
  GraphDesc g;
  g.arch = Arch::kVgg;
  g.input = patch128_input();
  add_compression(g, opts);
  add_vgg_blocks(g, filters_per_layer, kL2Penalty);
  g.layers.push_back(drop("head.dropout", kDenseDropout));
  g.layers.push_back(dense("head.dense", n_classes, kL2Penalty, Init::kGlorotUniform));
  return g;
}

GraphDesc build_sbcnn(std::size_t n_classes, BuildOptions opts) {
  require_classes(n_classes);
  GraphDesc g;
  g.arch = Arch::kSbcnn;
  g.input = patch128_input();
  add_compression(g, opts);
  g.layers.push_back(conv("conv1", 24, 5, 5, Padding::kValid, kL2Penalty));
  g.layers.push_back(act("relu1", Activation::kRelu));
  g.layers.push_back(pool("pool1", 4, 2));
  g.layers.push_back(conv("conv2", 48, 5, 5, Padding::kValid, kL2Penalty));
  g.layers.push_back(act("relu2", Activation::kRelu));
  g.layers.push_back(pool("pool2", 4, 2));
  g.layers.push_back(conv("conv3", 48, 5, 5, Padding::kValid, kL2Penalty));
  g.layers.push_back(act("relu3", Activation::kRelu));
  g.layers.push_back(simple(LayerKind::kFlatten, "flatten"));
  g.layers.push_back(drop("dense1.dropout", kDenseDropout));
  g.layers.push_back(dense("dense1", 64, kL2Penalty, Init::kHeUniform));
  g.layers.push_back(act("dense1.relu", Activation::kRelu));
  g.layers.push_back(drop("dense2.dropout", kDenseDropout));
  g.layers.push_back(dense("dense2", n_classes, kL2Penalty, Init::kGlorotUniform));
  return g;
}

GraphDesc build_proto_vgg(const ProtoVggOptions& opts) {
  if (opts.embed_dim < 1) throw ArgumentError("embedding dimension must be >= 1");
  if (opts.filters_per_layer == 0) throw ArgumentError("proto_vgg needs filters");
  const double wd = opts.regularize ? kL2Penalty : 0.0;
  GraphDesc g;
  g.arch = Arch::kProtoVgg;
  g.input = patch128_input();
  g.output_kind = OutputKind::kLinearEmbedding;
  add_compression(g, opts.build);
  add_vgg_blocks(g, opts.filters_per_layer, wd);
  if (opts.regularize) g.layers.push_back(drop("embed.dropout", kDenseDropout));
  g.layers.push_back(dense("embed.dense", opts.embed_dim, wd, Init::kGlorotUniform));
  return g;
}

VggishOptions VggishOptions::desk_scale() {
  VggishOptions o;
  o.conv_widths = {8, 16, 16, 16, 32, 32};
  o.dense_widths = {64, 64, 128};
  return o;
}

GraphDesc build_vggish_like(const VggishOptions& opts) {
  if (opts.conv_widths.size() != 6) throw ArgumentError("vggish_like has six conv layers");
  if (opts.dense_widths.empty()) throw ArgumentError("vggish_like needs dense layers");
  GraphDesc g;
  g.arch = Arch::kVggishLike;
  g.input = transfer64_input();
  g.output_kind = OutputKind::kLinearEmbedding;
  add_compression(g, opts.build);
  // Pools after conv1, conv2, conv4, conv6: 64x96 -> 4x6.
  constexpr bool kPoolAfter[6] = {true, true, false, true, false, true};
  int pools = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const std::string p = "conv" + std::to_string(i + 1);
    g.layers.push_back(conv(p, opts.conv_widths[i], 3, 3, Padding::kSame, 0.0));
    g.layers.push_back(act(p + ".relu", Activation::kRelu));
    if (kPoolAfter[i]) g.layers.push_back(pool("pool" + std::to_string(++pools), 2, 2));
  }
  g.layers.push_back(simple(LayerKind::kFlatten, "flatten"));
  for (std::size_t i = 0; i < opts.dense_widths.size(); ++i) {
    const bool last = i + 1 == opts.dense_widths.size();
    const std::string p = "fc" + std::to_string(i + 1);
    g.layers.push_back(dense(p, opts.dense_widths[i], 0.0,
                             last ? Init::kGlorotUniform : Init::kHeUniform));
    if (!last) g.layers.push_back(act(p + ".relu", Activation::kRelu));
  }
  return g;
}

}  // namespace fsa::zoo
