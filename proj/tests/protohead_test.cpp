// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "fsa/common/errors.hpp"
#include "fsa/protohead/plateau.hpp"
#include "fsa/protohead/protonet.hpp"
#include "fsa/zoo/builders.hpp"
#include "fsa/zoo/predict.hpp"
#include "gradcheck.hpp"

using namespace fsa;
using namespace fsa::protohead;
using fsa::testing::random_tensor;
using ndgrad::Shape;

namespace {

const DistanceConfig kEuclid{};
const DistanceConfig kSquared{DistanceKind::kEuclidean, true};
const DistanceConfig kCos{DistanceKind::kCosine, false};

zoo::GraphDesc small_embedder(std::size_t bins, std::size_t frames, std::size_t dim = 10) {
  zoo::GraphDesc d;
  d.arch = zoo::Arch::kCustom;
  d.input = {1, bins, frames};
  d.output_kind = zoo::OutputKind::kLinearEmbedding;
  using zoo::LayerKind;
  d.layers.push_back({.kind = LayerKind::kConv, .name = "conv", .units = 4, .kernel_h = 3,
                      .kernel_w = 3, .padding = ndgrad::Padding::kSame});
  d.layers.push_back({.kind = LayerKind::kBatchNorm, .name = "bn"});
  d.layers.push_back({.kind = LayerKind::kActivation, .name = "elu",
                      .activation = ndgrad::Activation::kElu});
  d.layers.push_back({.kind = LayerKind::kMaxPool, .name = "pool", .pool_h = 2, .pool_w = 2});
  d.layers.push_back({.kind = LayerKind::kFlatten, .name = "flatten"});
  d.layers.push_back({.kind = LayerKind::kDense, .name = "embed", .units = dim,
                      .init = zoo::Init::kGlorotUniform});
  return d;
}

// Class k lights up a band of rows; everything else is noise.
std::vector<LabeledClip> banded_clips(std::size_t classes, std::size_t per_class, std::size_t bins,
                                      std::size_t frames, SeededRng& rng, const std::string& tag) {
  std::vector<LabeledClip> clips;
  const std::size_t band = bins / classes;
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      LabeledClip c{tag + std::to_string(k) + "_" + std::to_string(i), static_cast<int>(k),
                    Tensor({bins, frames})};
      for (std::size_t r = 0; r < bins; ++r)
        for (std::size_t t = 0; t < frames; ++t) {
          const bool on = r / band == k;
          c.spec[r * frames + t] = (on ? 1.0 : 0.0) + 0.3 * rng.uniform(-1, 1);
        }
      clips.push_back(std::move(c));
    }
  }
  return clips;
}

MelPatch patch_of(Tensor values, int label, std::string id = "clip") {
  MelPatch p;
  p.values = std::move(values);
  p.label = label;
  p.clip_id = std::move(id);
  return p;
}

}  // namespace

TEST_CASE("distance examples") {
  SeededRng rng(1);
  const Tensor x = random_tensor({7}, rng);
  CHECK(distance(x.data(), x.data(), kEuclid) == 0.0);
  const std::vector<double> o{0, 0}, p{3, 4};
  CHECK(distance(o, p, kEuclid) == 5.0);
  CHECK(distance(o, p, kSquared) == 25.0);
  CHECK(distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}, kCos) == 1.0);
  CHECK(distance(std::vector<double>{1, 0}, std::vector<double>{2, 0}, kCos) == 0.0);
  CHECK(distance(o, p, kCos) == 1.0);
  CHECK(distance(p, o, kCos) == 1.0);
  CHECK_THROWS_AS(distance(o, std::vector<double>{1, 2, 3}, kEuclid), ArgumentError);
}

TEST_CASE("prototype means") {
  const Tensor one({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto p1 = prototypes_from_embeddings(one, 2, kEuclid);
  CHECK(p1.mu.values() == one.values());

  const Tensor pair({2, 2}, {1, 3, 3, 5});
  const auto p2 = prototypes_from_embeddings(pair, 1, kEuclid);
  CHECK(p2.mu.values() == std::vector<double>{2, 4});
}

TEST_CASE("compute_prototypes matches brute-force re-embedding") {
  SeededRng rng(2);
  zoo::ModelGraph g(small_embedder(8, 8), 5);
  SupportSet s;
  s.patches.resize(3);
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 4; ++j) s.patches[k].push_back(patch_of(random_tensor({8, 8}, rng), k));
  const PrototypeSet p = compute_prototypes(s, g);
  CHECK(p.mu.shape() == Shape{3, 10});
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> mean(10, 0.0);
    for (const auto& patch : s.patches[k]) {
      const Tensor e = g.infer(zoo::as_batch(patch.values));
      for (std::size_t i = 0; i < 10; ++i) mean[i] += e[i] / 4.0;
    }
    for (std::size_t i = 0; i < 10; ++i) CHECK(std::abs(p.mu[k * 10 + i] - mean[i]) < 1e-12);
  }

  SupportSet empty;
  empty.patches.resize(2);
  empty.patches[0].push_back(patch_of(random_tensor({8, 8}, rng), 0));
  CHECK_THROWS_AS(compute_prototypes(empty, g), ArgumentError);
  zoo::ModelGraph softmax_model(zoo::build_timbre(3), 1);
  CHECK_THROWS_AS(compute_prototypes(s, softmax_model), ArgumentError);
}

TEST_CASE("posterior formula") {
  PrototypeSet p{Tensor({2, 1}, {0.0, 1.0}), kEuclid};
  const auto post = classify_embedding(std::vector<double>{0.0}, p);
  CHECK(post[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(std::abs(post[0] - 0.73106) < 1e-5);

  SeededRng rng(3);
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = 1 + rng.below(4), k = 2 + rng.below(4);
    const DistanceConfig cfg = t % 3 == 0 ? kCos : (t % 3 == 1 ? kSquared : kEuclid);
    PrototypeSet ps{random_tensor({k, d}, rng, 2.0), cfg};
    const Tensor e = random_tensor({d}, rng, 2.0);
    const auto got = classify_embedding(e.data(), ps);
    double z = 0.0;
    std::vector<double> num(k);
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0, ab = 0.0, aa = 0.0, bb = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double m = ps.mu[c * d + i];
        s += (e[i] - m) * (e[i] - m);
        ab += e[i] * m;
        aa += e[i] * e[i];
        bb += m * m;
      }
      const double dist = cfg.kind == DistanceKind::kCosine ? 1.0 - ab / std::sqrt(aa * bb)
                                                            : (cfg.squared ? s : std::sqrt(s));
      num[c] = std::exp(-dist);
      z += num[c];
    }
    for (std::size_t c = 0; c < k; ++c) CHECK(std::abs(got[c] - num[c] / z) < 1e-9);
  }
}

TEST_CASE("posterior invariants") {
  SeededRng rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + rng.below(6), k = 2 + rng.below(6);
    PrototypeSet ps{random_tensor({k, d}, rng, 3.0), kEuclid};
    const Tensor e = random_tensor({d}, rng, 3.0);
    const auto post = classify_embedding(e.data(), ps);
    double sum = 0.0;
    for (double v : post) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-9);

    std::vector<double> dist(k);
    for (std::size_t c = 0; c < k; ++c) dist[c] = distance(e.data(), ps.row(c), kEuclid);
    std::vector<double> shifted(dist);
    const double shift = rng.uniform(-50, 50);
    for (double& v : shifted) v -= shift;
    const auto a = posterior_from_distances(dist), b = posterior_from_distances(shifted);
    for (std::size_t c = 0; c < k; ++c) CHECK(std::abs(a[c] - b[c]) < 1e-9);

    const auto nearest = std::min_element(dist.begin(), dist.end()) - dist.begin();
    CHECK(zoo::argmax(post) == static_cast<std::size_t>(nearest));

    const Tensor v = random_tensor({d}, rng, 10.0);
    PrototypeSet moved = ps;
    Tensor e2 = e;
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t i = 0; i < d; ++i) moved.mu[c * d + i] += v[i];
    for (std::size_t i = 0; i < d; ++i) e2[i] += v[i];
    const auto post2 = classify_embedding(e2.data(), moved);
    for (std::size_t c = 0; c < k; ++c) CHECK(std::abs(post2[c] - post[c]) < 1e-9);
  }
  PrototypeSet eq{Tensor({4, 2}, {1, 0, 0, 1, -1, 0, 0, -1}), kEuclid};
  const auto u = classify_embedding(std::vector<double>{0, 0}, eq);
  for (double v : u) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(zoo::argmax(u) == 0);
}

TEST_CASE("classify_query runs the embedding") {
  SeededRng rng(5);
  zoo::ModelGraph g(small_embedder(8, 8), 1);
  const MelPatch q = patch_of(random_tensor({8, 8}, rng), 0);
  const Tensor e = g.infer(zoo::as_batch(q.values));
  PrototypeSet ps{random_tensor({3, 10}, rng), kEuclid};
  CHECK(classify_query(q, ps, g) == classify_embedding(e.data(), ps));
  PrototypeSet wrong{random_tensor({3, 4}, rng), kEuclid};
  CHECK_THROWS_AS(classify_query(q, wrong, g), DimensionError);
}

TEST_CASE("episode loss on perfectly clustered embeddings") {
  // Two classes, one shot, queries equal to their prototype; classes 100 apart.
  const Tensor e({4, 2}, {0, 0, 100, 0, 0, 0, 100, 0});
  const std::vector<int> labels{0, 1};
  const auto r = episode_loss(e, 2, 1, labels, kEuclid);
  CHECK(r.loss < 1e-40);
  CHECK(r.correct == 2);
}

TEST_CASE("episode loss equals the classify_query recomputation") {
  SeededRng rng(6);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 2 + rng.below(4), shots = 1 + rng.below(5), q = 1 + rng.below(10);
    const std::size_t d = 1 + rng.below(10);
    const DistanceConfig cfg = t % 3 == 0 ? kCos : (t % 3 == 1 ? kSquared : kEuclid);
    const Tensor e = random_tensor({k * shots + q, d}, rng, 2.0);
    std::vector<int> labels(q);
    for (int& y : labels) y = static_cast<int>(rng.below(k));
    const auto r = episode_loss(e, k, shots, labels, cfg);

    Tensor head({k * shots, d});
    std::copy_n(e.raw(), k * shots * d, head.raw());
    const auto protos = prototypes_from_embeddings(head, k, cfg);
    double loss = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      const auto post = classify_embedding({e.raw() + (k * shots + i) * d, d}, protos);
      loss -= std::log(post[static_cast<std::size_t>(labels[i])]);
    }
    CHECK(std::abs(r.loss - loss / static_cast<double>(q)) < 1e-10);

    auto f = [&](Tensor& x) { return episode_loss(x, k, shots, labels, cfg).loss; };
    Tensor x = e;
    const auto numeric = fsa::testing::numeric_gradient(x.data(), [&] { return f(x); });
    CHECK(fsa::testing::relative_error(r.grad.data(), numeric) < 1e-6);
  }
}

TEST_CASE("episodic gradients through the embedding graph") {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) worst = std::max(worst, fsa::testing::gradcheck_episode(s));
  CHECK(worst < 1e-5);
}

TEST_CASE("plateau stopper") {
  PlateauStopper a(200);
  std::size_t stop_at = 0;
  for (std::size_t e = 1; e <= 1000; ++e) {
    const double acc = e < 37 ? 0.5 + 0.01 * static_cast<double>(e) : (e == 37 ? 1.0 : 0.9);
    if (a.update(e, acc)) {
      stop_at = e;
      break;
    }
  }
  CHECK(stop_at == 237);
  CHECK(a.best_epoch() == 37);

  PlateauStopper b(5);
  for (std::size_t e = 1; e <= 100; ++e) CHECK_FALSE(b.update(e, static_cast<double>(e)));

  PlateauStopper ties(3);
  CHECK_FALSE(ties.update(1, 0.5));
  CHECK_FALSE(ties.update(2, 0.5));
  CHECK_FALSE(ties.update(3, 0.5));
  CHECK(ties.update(4, 0.5));
  CHECK_THROWS_AS(PlateauStopper(0), ArgumentError);
}

TEST_CASE("support sampling and provenance") {
  SeededRng rng(7);
  auto clips = banded_clips(3, 1, 8, 20, rng, "one");
  const SupportSet s = sample_support(clips, 3, 8, rng);
  CHECK(s.n_classes() == 3);
  CHECK(s.shots() == 5);
  for (std::size_t k = 0; k < 3; ++k)
    for (const auto& p : s.patches[k]) {
      CHECK(p.clip_id == clips[k].clip_id);
      CHECK(p.label == static_cast<int>(k));
    }

  auto many = banded_clips(2, 7, 8, 20, rng, "many");
  const SupportSet m = sample_support(many, 2, 8, rng);
  for (const auto& cls : m.patches) {
    std::set<std::string> ids;
    for (const auto& p : cls) ids.insert(p.clip_id);
    CHECK(ids.size() == 5);
  }
  auto missing = banded_clips(2, 2, 8, 20, rng, "x");
  CHECK_THROWS_AS(sample_support(missing, 3, 8, rng), DataError);
}

TEST_CASE("plateau training on a separable set reaches full train accuracy") {
  SeededRng data(8);
  const auto train = banded_clips(3, 4, 8, 24, data, "tr");
  const auto test = banded_clips(3, 4, 8, 24, data, "te");
  zoo::ModelGraph g(small_embedder(8, 8), 3);
  SeededRng rng(9);
  const SupportSet support = sample_support(train, 3, 8, rng);
  ProtoTrainConfig cfg;
  cfg.patience = 30;
  cfg.patch_frames = 8;
  cfg.predict_hop = 8;
  frontend::ProvenanceAudit audit(test);
  const auto r = train_until_plateau(g, train, support, cfg, rng, &audit, test);
  CHECK_FALSE(r.hit_max_epochs);
  CHECK(r.best_train_acc == 1.0);
  CHECK(r.epochs == r.best_epoch + 30);
  CHECK(r.trace.size() == r.epochs);
  CHECK(audit.checked() >= r.epochs * 15);

  // After the first epoch at 100% train accuracy, the monitor never falls
  // more than 5 points under its running maximum.
  std::size_t first = 0;
  while (r.trace[first].train_acc < 1.0) ++first;
  double running = 0.0;
  for (std::size_t i = first; i < r.trace.size(); ++i) {
    running = std::max(running, *r.trace[i].test_acc);
    CHECK(*r.trace[i].test_acc >= running - 0.05);
  }

  std::ostringstream csv;
  write_trace_csv(csv, r.trace);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,train_acc,test_acc");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == r.trace.size());
}

TEST_CASE("training refuses held-out clips") {
  SeededRng data(10);
  const auto train = banded_clips(2, 2, 8, 16, data, "tr");
  zoo::ModelGraph g(small_embedder(8, 8), 3);
  SeededRng rng(1);
  const SupportSet support = sample_support(train, 2, 8, rng);
  frontend::ProvenanceAudit audit;
  audit.forbid(train[3].clip_id);
  ProtoTrainConfig cfg;
  cfg.patch_frames = 8;
  cfg.predict_hop = 8;
  cfg.patience = 2;
  CHECK_THROWS_AS(train_until_plateau(g, train, support, cfg, rng, &audit), StateError);
}

TEST_CASE("identical seeds give identical training traces") {
  auto run = [] {
    SeededRng data(11);
    const auto train = banded_clips(2, 3, 8, 16, data, "tr");
    zoo::ModelGraph g(small_embedder(8, 8), 3);
    SeededRng rng(12);
    const SupportSet support = sample_support(train, 2, 8, rng);
    ProtoTrainConfig cfg;
    cfg.patch_frames = 8;
    cfg.predict_hop = 8;
    cfg.patience = 5;
    const auto r = train_until_plateau(g, train, support, cfg, rng);
    std::vector<double> out;
    for (const auto& e : r.trace) out.push_back(e.loss);
    for (auto* p : g.parameters()) out.insert(out.end(), p->tensor.values().begin(), p->tensor.values().end());
    return out;
  };
  CHECK(run() == run());
}
