// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// Builders for the evaluated architectures. Each returns a descriptor; pair it
// with a seed via ModelGraph(desc, seed) to get initialized weights.

#pragma once

#include <cstdint>
#include <vector>

#include "fsa/frontend/compression.hpp"
#include "fsa/zoo/graph.hpp"

namespace fsa::zoo {

inline constexpr double kL2Penalty = 0.001;
inline constexpr double kDenseDropout = 0.5;

struct BuildOptions {
  // log_learn prepends a trainable compression layer; the model then expects
  // raw mel energies. log_eps models expect already-compressed input.
  frontend::CompressionKind compression = frontend::CompressionKind::kLogEps;
};

// Single conv layer with n_classes vertical 108x7 filters over 128x128 input,
// ReLU, global max per map. The maxima are the logits.
GraphDesc build_timbre(std::size_t n_classes, BuildOptions opts = {});

// 5 x (3x3 same conv -> batch norm -> ELU -> 2x2 max-pool), dropout 0.5,
// dense softmax head.
GraphDesc build_vgg(std::size_t n_classes, std::size_t filters_per_layer = 32,
                    BuildOptions opts = {});

// conv5x5(24) -> pool(4,2) -> conv5x5(48) -> pool(4,2) -> conv5x5(48) ->
// dense(64) -> dense(n_classes), ReLU, dropout 0.5 before each dense layer.
GraphDesc build_sbcnn(std::size_t n_classes, BuildOptions opts = {});

struct ProtoVggOptions {
  std::size_t embed_dim = 10;
  std::size_t filters_per_layer = 128;
  // The embedding network carries no L2 or dropout unless asked.
  bool regularize = false;
  BuildOptions build;
};
// VGG skeleton with a final linear embedding layer instead of a softmax.
GraphDesc build_proto_vgg(const ProtoVggOptions& opts = {});

struct VggishOptions {
  // Six 3x3 conv layers; a 2x2 max-pool follows layers 1, 2, 4 and 6.
  std::vector<std::size_t> conv_widths{64, 128, 256, 256, 512, 512};
  // Dense stack; the last entry is the feature (transfer) output.
  std::vector<std::size_t> dense_widths{4096, 4096, 128};
  BuildOptions build;

  // A scaled-down topology with the same layer pattern, cheap enough to
  // pre-train on one CPU core in seconds.
  static VggishOptions desk_scale();
};
// 64x96 input; final layer is linear and produces the transfer features.
GraphDesc build_vggish_like(const VggishOptions& opts = {});

// Input [C,H,W] a builder expects for a compression choice.
Shape patch128_input();
Shape transfer64_input();

}  // namespace fsa::zoo
