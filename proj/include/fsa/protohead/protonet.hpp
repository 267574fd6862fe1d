// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// Prototypical-network head: class prototypes are means of embedded support
// patches, and a query's posterior is a softmax over negative distances to
// them.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fsa/frontend/clip.hpp"
#include "fsa/ndgrad/sgd.hpp"
#include "fsa/zoo/graph.hpp"

namespace fsa::protohead {

using frontend::LabeledClip;
using frontend::MelPatch;
using ndgrad::Tensor;
using zoo::ModelGraph;

enum class DistanceKind { kEuclidean, kCosine };

struct DistanceConfig {
  DistanceKind kind = DistanceKind::kEuclidean;
  bool squared = false;  // euclidean only
};

// euclidean: sqrt(sum (a-b)^2) (or the plain sum when squared).
// cosine: 1 - a.b / (|a||b|); a zero vector is at distance 1 from anything.
double distance(std::span<const double> a, std::span<const double> b,
                const DistanceConfig& cfg = {});

// Fixed support patches, patches[k] holding class k's shots.
struct SupportSet {
  std::vector<std::vector<MelPatch>> patches;

  std::size_t n_classes() const { return patches.size(); }
  std::size_t shots() const { return patches.empty() ? 0 : patches.front().size(); }
  std::vector<std::string> source_clip_ids() const;
  // Throws ArgumentError unless every class has the same nonzero shot count
  // and every patch is labelled with its class.
  void validate() const;
};

inline constexpr std::size_t kSupportShots = 5;
inline constexpr std::size_t kQueriesPerClass = 5;

// Draws `shots` patches per class from the training clips. Clips of a class
// are visited round-robin in a shuffled order, so with a single clip all
// shots come from it.
SupportSet sample_support(std::span<const LabeledClip> train, std::size_t n_classes,
                          std::size_t patch_frames, SeededRng& rng,
                          std::size_t shots = kSupportShots);

struct PrototypeSet {
  Tensor mu;  // [K, D]
  DistanceConfig distance;

  std::size_t n_classes() const { return mu.dim(0); }
  std::size_t embed_dim() const { return mu.dim(1); }
  std::span<const double> row(std::size_t k) const {
    return {mu.raw() + k * embed_dim(), embed_dim()};
  }
};

// Prototypes from embeddings [K*S, D] ordered class by class.
PrototypeSet prototypes_from_embeddings(const Tensor& embeddings, std::size_t n_classes,
                                        const DistanceConfig& cfg);
// Embeds the support in eval mode and averages per class.
PrototypeSet compute_prototypes(const SupportSet& support, const ModelGraph& embed,
                                const DistanceConfig& cfg = {});

// softmax(-d) with max-subtraction.
std::vector<double> posterior_from_distances(std::span<const double> distances);
std::vector<double> classify_embedding(std::span<const double> embedding,
                                       const PrototypeSet& protos);
std::vector<double> classify_query(const MelPatch& x, const PrototypeSet& protos,
                                   const ModelGraph& embed);

// Episodic objective over one batch: the first K*S rows of `embeddings` are
// support (class by class), the rest are queries with `query_labels`.
struct EpisodeLoss {
  double loss = 0.0;  // mean -log p_true over queries
  std::size_t correct = 0;
  Tensor grad;  // d loss / d embeddings, same shape as embeddings
};
EpisodeLoss episode_loss(const Tensor& embeddings, std::size_t n_classes, std::size_t shots,
                         std::span<const int> query_labels, const DistanceConfig& cfg);

struct StepResult {
  double loss = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

// Forwards support and queries together in train mode, backpropagates the
// episodic loss through both, and takes one SGD step.
StepResult proto_train_step(ModelGraph& embed, const SupportSet& support,
                            std::span<const MelPatch> queries, const ndgrad::OptimizerConfig& opt,
                            const DistanceConfig& cfg, SeededRng& rng);
// The loss alone, for gradient checks; accumulates gradients when `backward`.
StepResult proto_episode(ModelGraph& embed, const SupportSet& support,
                         std::span<const MelPatch> queries, const DistanceConfig& cfg,
                         SeededRng& rng, bool backward);

}  // namespace fsa::protohead
