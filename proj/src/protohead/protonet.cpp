// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/protohead/protonet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fsa/common/errors.hpp"
#include "fsa/zoo/predict.hpp"
#include "fsa/zoo/trainer.hpp"

namespace fsa::protohead {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Adds scale * d(distance)/d(a) into ga and scale * d(distance)/d(b) into gb.
void distance_grad(std::span<const double> a, std::span<const double> b, double d,
                   const DistanceConfig& cfg, double scale, double* ga, double* gb) {
  const std::size_t n = a.size();
  if (cfg.kind == DistanceKind::kEuclidean) {
    if (cfg.squared) {
      for (std::size_t i = 0; i < n; ++i) {
        const double g = scale * 2.0 * (a[i] - b[i]);
        ga[i] += g;
        gb[i] -= g;
      }
      return;
    }
    if (d == 0.0) return;  // subgradient 0 at the cusp
    for (std::size_t i = 0; i < n; ++i) {
      const double g = scale * (a[i] - b[i]) / d;
      ga[i] += g;
      gb[i] -= g;
    }
    return;
  }
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return;  // constant distance 1
  const double cos = dot(a, b) / (na * nb);
  for (std::size_t i = 0; i < n; ++i) {
    ga[i] -= scale * (b[i] / (na * nb) - cos * a[i] / (na * na));
    gb[i] -= scale * (a[i] / (na * nb) - cos * b[i] / (nb * nb));
  }
}

Tensor support_and_queries(const SupportSet& support, std::span<const MelPatch> queries) {
  std::vector<MelPatch> all;
  all.reserve(support.n_classes() * support.shots() + queries.size());
  for (const auto& cls : support.patches) all.insert(all.end(), cls.begin(), cls.end());
  all.insert(all.end(), queries.begin(), queries.end());
  return zoo::patch_batch(all);
}

}  // namespace

double distance(std::span<const double> a, std::span<const double> b, const DistanceConfig& cfg) {
  if (a.size() != b.size()) {
    throw ArgumentError("distance: dimensions " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()) + " differ");
  }
  if (cfg.kind == DistanceKind::kEuclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return cfg.squared ? s : std::sqrt(s);
  }
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot(a, b) / (na * nb);
}

std::vector<std::string> SupportSet::source_clip_ids() const {
  std::vector<std::string> ids;
  for (const auto& cls : patches)
    for (const auto& p : cls) ids.push_back(p.clip_id);
  return ids;
}

void SupportSet::validate() const {
  if (patches.size() < 2) throw ArgumentError("support set needs at least 2 classes");
  const std::size_t s = shots();
  for (std::size_t k = 0; k < patches.size(); ++k) {
    if (patches[k].empty()) throw ArgumentError("empty support for class " + std::to_string(k));
    if (patches[k].size() != s) throw ArgumentError("uneven support shot counts");
    for (const auto& p : patches[k]) {
      if (p.label != static_cast<int>(k)) {
        throw ArgumentError("support patch from " + p.clip_id + " is labelled " +
                            std::to_string(p.label) + " in class " + std::to_string(k));
      }
    }
  }
}

SupportSet sample_support(std::span<const LabeledClip> train, std::size_t n_classes,
                          std::size_t patch_frames, SeededRng& rng, std::size_t shots) {
  const auto groups = [&] {
    std::vector<std::vector<const LabeledClip*>> g(n_classes);
    for (const auto& c : train) {
      if (c.label < 0 || static_cast<std::size_t>(c.label) >= n_classes) {
        throw DataError("clip " + c.clip_id + " has an out-of-range label");
      }
      g[static_cast<std::size_t>(c.label)].push_back(&c);
    }
    return g;
  }();
  SupportSet s;
  s.patches.resize(n_classes);
  for (std::size_t k = 0; k < n_classes; ++k) {
    auto clips = groups[k];
    if (clips.empty()) throw DataError("no training clips for class " + std::to_string(k));
    for (std::size_t i = clips.size(); i > 1; --i) std::swap(clips[i - 1], clips[rng.below(i)]);
    for (std::size_t j = 0; j < shots; ++j) {
      s.patches[k].push_back(frontend::sample_clip_patch(*clips[j % clips.size()], patch_frames, rng));
    }
  }
  return s;
}

PrototypeSet prototypes_from_embeddings(const Tensor& embeddings, std::size_t n_classes,
                                        const DistanceConfig& cfg) {
  if (embeddings.rank() != 2 || n_classes == 0 || embeddings.dim(0) % n_classes != 0) {
    throw ArgumentError("prototypes: embeddings " + ndgrad::shape_str(embeddings.shape()) +
                        " do not split evenly into " + std::to_string(n_classes) + " classes");
  }
  const std::size_t shots = embeddings.dim(0) / n_classes, d = embeddings.dim(1);
  PrototypeSet p{Tensor({n_classes, d}), cfg};
  for (std::size_t k = 0; k < n_classes; ++k) {
    for (std::size_t j = 0; j < shots; ++j) {
      const double* e = embeddings.raw() + (k * shots + j) * d;
      for (std::size_t i = 0; i < d; ++i) p.mu[k * d + i] += e[i];
    }
    for (std::size_t i = 0; i < d; ++i) p.mu[k * d + i] /= static_cast<double>(shots);
  }
  return p;
}

PrototypeSet compute_prototypes(const SupportSet& support, const ModelGraph& embed,
                                const DistanceConfig& cfg) {
  if (embed.output_kind() != zoo::OutputKind::kLinearEmbedding) {
    throw ArgumentError("compute_prototypes: model is not an embedding network");
  }
  support.validate();
  const Tensor e = embed.infer(support_and_queries(support, {}));
  return prototypes_from_embeddings(e, support.n_classes(), cfg);
}

std::vector<double> posterior_from_distances(std::span<const double> distances) {
  if (distances.empty()) throw ArgumentError("posterior over zero classes");
  const double dmin = *std::min_element(distances.begin(), distances.end());
  std::vector<double> p(distances.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = std::exp(-(distances[k] - dmin));
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> classify_embedding(std::span<const double> embedding,
                                       const PrototypeSet& protos) {
  std::vector<double> d(protos.n_classes());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = distance(embedding, protos.row(k), protos.distance);
  return posterior_from_distances(d);
}

std::vector<double> classify_query(const MelPatch& x, const PrototypeSet& protos,
                                   const ModelGraph& embed) {
  const Tensor e = embed.infer(zoo::as_batch(x.values));
  if (e.dim(1) != protos.embed_dim()) {
    throw DimensionError("classify_query: embedding size " + std::to_string(e.dim(1)) +
                         " vs prototype size " + std::to_string(protos.embed_dim()));
  }
  return classify_embedding(e.data(), protos);
}

EpisodeLoss episode_loss(const Tensor& embeddings, std::size_t n_classes, std::size_t shots,
                         std::span<const int> query_labels, const DistanceConfig& cfg) {
  const std::size_t n_support = n_classes * shots, q = query_labels.size();
  if (embeddings.rank() != 2 || embeddings.dim(0) != n_support + q || q == 0) {
    throw DimensionError("episode_loss: embeddings " + ndgrad::shape_str(embeddings.shape()) +
                         " for " + std::to_string(n_support) + " support and " +
                         std::to_string(q) + " queries");
  }
  const std::size_t d = embeddings.dim(1);
  Tensor head({n_support, d});
  std::copy_n(embeddings.raw(), n_support * d, head.raw());
  const PrototypeSet protos = prototypes_from_embeddings(head, n_classes, cfg);

  EpisodeLoss out;
  out.grad = Tensor(embeddings.shape());
  Tensor grad_mu({n_classes, d});
  std::vector<double> dist(n_classes);
  for (std::size_t i = 0; i < q; ++i) {
    const int y = query_labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
      throw ArgumentError("episode_loss: query label " + std::to_string(y) + " out of range");
    }
    const std::span<const double> e(embeddings.raw() + (n_support + i) * d, d);
    for (std::size_t k = 0; k < n_classes; ++k) dist[k] = distance(e, protos.row(k), cfg);
    const auto p = posterior_from_distances(dist);
    const double dmin = *std::min_element(dist.begin(), dist.end());
    double lse = 0.0;
    for (double dk : dist) lse += std::exp(-(dk - dmin));
    out.loss += dist[static_cast<std::size_t>(y)] - dmin + std::log(lse);
    if (zoo::argmax(p) == static_cast<std::size_t>(y)) ++out.correct;

    double* ge = out.grad.raw() + (n_support + i) * d;
    for (std::size_t k = 0; k < n_classes; ++k) {
      // d loss / d dist = -(d loss / d logit) = (onehot - p) / Q
      const double g = ((static_cast<int>(k) == y ? 1.0 : 0.0) - p[k]) / static_cast<double>(q);
      distance_grad(e, protos.row(k), dist[k], cfg, g, ge, grad_mu.raw() + k * d);
    }
  }
  out.loss /= static_cast<double>(q);
  for (std::size_t k = 0; k < n_classes; ++k) {
    for (std::size_t j = 0; j < shots; ++j) {
      double* gs = out.grad.raw() + (k * shots + j) * d;
      for (std::size_t c = 0; c < d; ++c) gs[c] = grad_mu[k * d + c] / static_cast<double>(shots);
    }
  }
  return out;
}

StepResult proto_episode(ModelGraph& embed, const SupportSet& support,
                         std::span<const MelPatch> queries, const DistanceConfig& cfg,
                         SeededRng& rng, bool backward) {
  support.validate();
  std::vector<int> labels;
  labels.reserve(queries.size());
  for (const auto& qp : queries) labels.push_back(qp.label);
  const Tensor e = embed.forward(support_and_queries(support, queries), ndgrad::Mode::kTrain, &rng);
  EpisodeLoss ep = episode_loss(e, support.n_classes(), support.shots(), labels, cfg);
  if (backward) embed.backward(ep.grad);
  return {ep.loss, ep.correct, queries.size()};
}

StepResult proto_train_step(ModelGraph& embed, const SupportSet& support,
                            std::span<const MelPatch> queries, const ndgrad::OptimizerConfig& opt,
                            const DistanceConfig& cfg, SeededRng& rng) {
  embed.zero_grad();
  const StepResult r = proto_episode(embed, support, queries, cfg, rng, true);
  auto params = embed.parameters();
  ndgrad::sgd_step(params, opt);
  return r;
}

}  // namespace fsa::protohead
