// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// Non-neural reference classifiers.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fsa/common/rng.hpp"
#include "fsa/ndgrad/tensor.hpp"

namespace fsa::baselines {

using ndgrad::Tensor;

// Uniform class index in [0, k). Throws ArgumentError when k < 2.
int random_guess(std::size_t k, SeededRng& rng);

enum class Metric { kCosine };

// Labelled reference vectors for nearest-neighbor lookup.
class FeatureIndex {
 public:
  explicit FeatureIndex(std::size_t dim, Metric metric = Metric::kCosine);

  // Throws DimensionError on a length mismatch.
  void add(std::span<const double> vector, int label);
  void add(const Tensor& vector, int label) { add(vector.data(), label); }

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  Metric metric() const { return metric_; }
  std::span<const double> vector(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  int label(std::size_t i) const { return labels_[i]; }

 private:
  std::size_t dim_;
  Metric metric_;
  std::vector<double> data_;
  std::vector<double> norms_;
  std::vector<int> labels_;

  friend std::size_t nearest(std::span<const double> query, const FeatureIndex& index);
};

// 1 - cos(a, b); a zero vector is at distance 1 from everything.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// Position of the closest index vector; ties go to the lowest position.
// Throws StateError on an empty index and DimensionError on a length mismatch.
std::size_t nearest(std::span<const double> query, const FeatureIndex& index);

int nn_classify(std::span<const double> query, const FeatureIndex& index);
inline int nn_classify(const Tensor& query, const FeatureIndex& index) {
  return nn_classify(query.data(), index);
}

// Plurality vote over per-window labels; ties go to the lowest class.
// Throws ArgumentError when empty.
int plurality_vote(std::span<const int> votes);

// nn_classify on every window followed by a plurality vote.
int nn_classify_voted(std::span<const Tensor> clip_features, const FeatureIndex& index);

}  // namespace fsa::baselines
