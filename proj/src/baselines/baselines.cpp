// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/baselines/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "fsa/common/errors.hpp"

namespace fsa::baselines {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine_from(double ab, double na, double nb) {
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - ab / (na * nb);
}

}  // namespace

int random_guess(std::size_t k, SeededRng& rng) {
  if (k < 2) throw ArgumentError("random_guess needs at least 2 classes");
  return static_cast<int>(rng.below(k));
}

FeatureIndex::FeatureIndex(std::size_t dim, Metric metric) : dim_(dim), metric_(metric) {
  if (dim == 0) throw ArgumentError("FeatureIndex dimension must be positive");
}

void FeatureIndex::add(std::span<const double> v, int label) {
  if (v.size() != dim_)
    throw DimensionError("FeatureIndex expects " + std::to_string(dim_) + " values, got " +
                         std::to_string(v.size()));
  data_.insert(data_.end(), v.begin(), v.end());
  norms_.push_back(std::sqrt(dot(v, v)));
  labels_.push_back(label);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_distance: length mismatch");
  return cosine_from(dot(a, b), std::sqrt(dot(a, a)), std::sqrt(dot(b, b)));
}

std::size_t nearest(std::span<const double> query, const FeatureIndex& index) {
  if (index.size() == 0) throw StateError("nearest-neighbor lookup on an empty index");
  if (query.size() != index.dim())
    throw DimensionError("query has " + std::to_string(query.size()) + " values, index " +
                         std::to_string(index.dim()));
  const double nq = std::sqrt(dot(query, query));
  std::size_t best = 0;
  double best_d = 0.0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    const double d = cosine_from(dot(query, index.vector(i)), nq, index.norms_[i]);
    if (i == 0 || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

int nn_classify(std::span<const double> query, const FeatureIndex& index) {
  return index.label(nearest(query, index));
}

int plurality_vote(std::span<const int> votes) {
  if (votes.empty()) throw ArgumentError("plurality_vote needs at least one vote");
  std::map<int, std::size_t> counts;
  for (int v : votes) ++counts[v];
  // std::map iterates in ascending class order, so the first maximum wins ties.
  int best = counts.begin()->first;
  std::size_t best_n = 0;
  for (const auto& [label, n] : counts) {
    if (n > best_n) {
      best = label;
      best_n = n;
    }
  }
  return best;
}

int nn_classify_voted(std::span<const Tensor> clip_features, const FeatureIndex& index) {
  if (clip_features.empty()) throw ArgumentError("nn_classify_voted needs at least one window");
  std::vector<int> votes;
  votes.reserve(clip_features.size());
  for (const auto& f : clip_features) votes.push_back(nn_classify(f, index));
  return plurality_vote(votes);
}

}  // namespace fsa::baselines
