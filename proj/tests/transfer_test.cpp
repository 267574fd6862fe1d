// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "fsa/common/errors.hpp"
#include "fsa/labctl/synth.hpp"
#include "fsa/transfer/checkpoint.hpp"
#include "fsa/transfer/finetune.hpp"
#include "fsa/zoo/builders.hpp"

using namespace fsa;
using namespace fsa::transfer;
using fsa::frontend::LabeledClip;
using fsa::zoo::GraphDesc;
using fsa::ndgrad::Tensor;

namespace fs = std::filesystem;

namespace {

zoo::VggishOptions micro_backbone() {
  zoo::VggishOptions o;
  o.conv_widths = {2, 2, 4, 4, 4, 4};
  o.dense_widths = {16, 16, 8};
  return o;
}

Checkpoint micro_checkpoint(std::uint64_t seed = 3) {
  return make_checkpoint(ModelGraph(zoo::build_vggish_like(micro_backbone()), seed),
                         frontend::PresetId::kTransfer64, "micro");
}

// Random running statistics, so state blobs are not all 0/1.
void scramble_state(ModelGraph& g, std::uint64_t seed) {
  SeededRng rng(seed);
  for (auto& s : g.state())
    for (auto& v : *s.values) v = rng.uniform(0.1, 2.0);
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void check_same_values(const ModelGraph& a, const ModelGraph& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->tensor.shape() == pb[i]->tensor.shape());
    CHECK(bitwise_equal(pa[i]->tensor.values(), pb[i]->tensor.values()));
  }
  const auto sa = a.state();
  const auto sb = b.state();
  REQUIRE(sa.size() == sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sa[i].name == sb[i].name);
    CHECK(bitwise_equal(*sa[i].values, *sb[i].values));
  }
}

std::vector<LabeledClip> synth_model_clips(std::size_t classes, std::size_t per_class,
                                           std::uint64_t seed) {
  labctl::SynthConfig cfg;
  cfg.classes = classes;
  cfg.clips_per_class = per_class;
  cfg.seed = seed;
  cfg.folds = 1;
  cfg.max_seconds = 3.0;
  const auto audio = labctl::synth_clips(cfg);
  return labctl::model_clips(audio, frontend::kTransfer64, frontend::CompressionKind::kLogEps);
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("fsa_transfer_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

TEST_CASE("checkpoint round trip is bitwise lossless for every architecture") {
  const zoo::BuildOptions learn{frontend::CompressionKind::kLogLearn};
  const GraphDesc vggish = zoo::build_vggish_like(micro_backbone());
  zoo::ProtoVggOptions proto{.embed_dim = 10, .filters_per_layer = 4, .regularize = false, .build = {}};
  const std::vector<GraphDesc> descs{
      zoo::build_timbre(10),
      zoo::build_timbre(4, learn),
      zoo::build_vgg(10),
      zoo::build_vgg(3, 4, learn),
      zoo::build_sbcnn(10),
      zoo::build_proto_vgg(proto),
      zoo::build_vggish_like(zoo::VggishOptions::desk_scale()),
      transfer_softmax_desc(vggish, 5),
      transfer_proto_desc(vggish),
  };
  TempDir tmp;
  std::uint64_t seed = 100;
  for (const auto& d : descs) {
    CAPTURE(zoo::arch_name(d.arch));
    ModelGraph g(d, ++seed);
    scramble_state(g, seed);
    const Checkpoint c = make_checkpoint(g, frontend::PresetId::kPatch128, "note");
    const auto bytes = encode_checkpoint(c);
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back.arch == d.arch);
    CHECK(back.preset == frontend::PresetId::kPatch128);
    CHECK(back.note == "note");
    CHECK(encode_checkpoint(back) == bytes);
    check_same_values(g, instantiate(back, d.arch));

    const fs::path file = tmp.path() / "model.ckpt";
    save_checkpoint(g, file, frontend::PresetId::kPatch128, "note");
    const ModelGraph loaded = load_checkpoint(file, d.arch);
    check_same_values(g, loaded);
    CHECK(loaded.desc().layers.size() == d.layers.size());
    // The reloaded graph computes the same outputs.
    const Tensor x(ndgrad::Shape{1, d.input[0], d.input[1], d.input[2]}, 0.25);
    CHECK(bitwise_equal(g.infer(x).values(), loaded.infer(x).values()));
  }
}

TEST_CASE("wrong arch is rejected") {
  const Checkpoint c = make_checkpoint(ModelGraph(zoo::build_timbre(3), 1),
                                       frontend::PresetId::kPatch128);
  CHECK_THROWS_AS(instantiate(c, zoo::Arch::kVgg), CheckpointError);
  CHECK_NOTHROW(instantiate(c, zoo::Arch::kTimbre));
}

TEST_CASE("shape mismatch names the first offending blob and writes nothing") {
  ModelGraph g(zoo::build_vgg(3, 4), 7);
  Checkpoint c = make_checkpoint(g, frontend::PresetId::kPatch128);
  for (auto& b : c.blobs)
    for (auto& v : b.values) v += 1.0;
  REQUIRE(c.blobs.size() > 6);
  c.blobs[4].shape.push_back(1);  // same element count, different rank
  c.blobs[6].shape = {c.blobs[6].values.size() + 1};
  c.blobs[6].values.push_back(0.0);

  ModelGraph target(zoo::build_vgg(3, 4), 8);
  const Checkpoint before = make_checkpoint(target, frontend::PresetId::kPatch128);
  try {
    load_into(c, target);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("'" + c.blobs[4].name + "'") != std::string::npos);
    CHECK(msg.find(c.blobs[6].name) == std::string::npos);
  }
  const Checkpoint after = make_checkpoint(target, frontend::PresetId::kPatch128);
  CHECK(encode_checkpoint(after) == encode_checkpoint(before));
  CHECK_THROWS_AS(instantiate(c, zoo::Arch::kVgg), CheckpointError);
}

TEST_CASE("missing and unknown blobs are named") {
  const Checkpoint full = make_checkpoint(ModelGraph(zoo::build_timbre(3), 1),
                                          frontend::PresetId::kPatch128);
  Checkpoint missing = full;
  const std::string gone = missing.blobs.back().name;
  missing.blobs.pop_back();
  try {
    instantiate(missing, zoo::Arch::kTimbre);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find(gone) != std::string::npos);
  }
  Checkpoint extra = full;
  extra.blobs.push_back({"ghost.weight", false, {2}, {1.0, 2.0}});
  CHECK_THROWS_WITH_AS(instantiate(extra, zoo::Arch::kTimbre), doctest::Contains("ghost.weight"),
                       CheckpointError);
}

TEST_CASE("every truncation of a checkpoint raises a format error") {
  GraphDesc d;
  d.arch = zoo::Arch::kCustom;
  d.input = {1, 2, 3};
  d.layers.push_back({.kind = zoo::LayerKind::kFlatten, .name = "flat"});
  d.layers.push_back({.kind = zoo::LayerKind::kDense, .name = "out", .units = 3});
  const auto bytes = encode_checkpoint(make_checkpoint(ModelGraph(d, 1), frontend::PresetId::kPatch128));
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    CAPTURE(n);
    CHECK_THROWS_AS(decode_checkpoint(std::span(bytes).first(n)), FormatError);
  }
  CHECK_NOTHROW(decode_checkpoint(bytes));

  // Larger model: sampled prefixes and single-byte corruptions.
  const auto big = encode_checkpoint(micro_checkpoint());
  SeededRng rng(4);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = rng.below(big.size());
    CHECK_THROWS_AS(decode_checkpoint(std::span(big).first(n)), FormatError);
    auto bad = big;
    bad[rng.below(bad.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  }
  auto trailing = big;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(trailing), FormatError);
  auto magic = big;
  magic[0] = 'X';
  CHECK_THROWS_WITH_AS(decode_checkpoint(magic), doctest::Contains("magic"), FormatError);

  TempDir tmp;
  const fs::path file = tmp.path() / "cut.ckpt";
  {
    std::ofstream out(file, std::ios::binary);
    out.write(reinterpret_cast<const char*>(big.data()), static_cast<std::streamsize>(big.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(file, zoo::Arch::kVggishLike), FormatError);
  CHECK_THROWS_AS(load_checkpoint(tmp.path() / "absent.ckpt", zoo::Arch::kVggishLike), FormatError);
}

TEST_CASE("restored parameters are slow and new ones fast") {
  const Checkpoint c = micro_checkpoint();
  std::set<std::string> names;
  for (const auto& b : c.blobs) names.insert(b.name);
  for (const auto& desc : {transfer_softmax_desc(c.desc, 4), transfer_proto_desc(c.desc)}) {
    ModelGraph m = attach_head(c, desc, 9);
    std::size_t slow = 0, fast = 0;
    for (const auto* p : std::as_const(m).parameters()) {
      const bool restored = names.contains(p->name);
      CHECK((p->group == ndgrad::LrGroup::kSlow) == restored);
      CHECK(restored != (p->name.rfind(std::string(kHeadLayer) + ".", 0) == 0));
      (restored ? slow : fast) += 1;
      if (restored) CHECK(bitwise_equal(p->tensor.values(), c.find(p->name)->values));
    }
    CHECK(slow == names.size());
    CHECK(fast == 2);
  }
  CHECK(ModelGraph(transfer_proto_desc(c.desc), 1).n_outputs() == kProtoEmbedDim);
}

TEST_CASE("fine-tuning rejects incompatible checkpoints") {
  const Checkpoint timbre = make_checkpoint(ModelGraph(zoo::build_timbre(3), 1),
                                            frontend::PresetId::kPatch128);
  const std::vector<LabeledClip> none;
  CHECK_THROWS_AS(fine_tune_softmax(timbre, none, 3, {}), CheckpointError);
  CHECK_THROWS_AS(attach_head(timbre, transfer_proto_desc(timbre.desc), 1), CheckpointError);
}

TEST_CASE("one step with equal gradients moves the head 1e4 times further") {
  ModelGraph m = attach_head(micro_checkpoint(), transfer_softmax_desc(micro_checkpoint().desc, 3), 2);
  std::map<std::string, std::vector<double>> before;
  for (auto* p : m.parameters()) {
    before[p->name] = p->tensor.values();
    auto g = p->tensor.ensure_grad();
    std::fill(g.begin(), g.end(), 1e-4);
  }
  FineTuneConfig cfg;
  auto params = m.parameters();
  const auto stats = ndgrad::sgd_step(params, cfg.opt);
  REQUIRE(stats.scale == 1.0);
  double head = -1, backbone = -1;
  for (auto* p : m.parameters()) {
    const auto& b = before[p->name];
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double d = std::abs(p->tensor[i] - b[i]);
      double& slot = p->group == ndgrad::LrGroup::kSlow ? backbone : head;
      slot = std::max(slot, d);
    }
  }
  CHECK(head / backbone == doctest::Approx(1e4).epsilon(1e-6));
}

TEST_CASE("clipping uses one global norm across both rate groups") {
  ModelGraph m = attach_head(micro_checkpoint(), transfer_softmax_desc(micro_checkpoint().desc, 3), 2);
  SeededRng rng(6);
  std::map<std::string, std::vector<double>> before, grads;
  double sq = 0.0;
  for (auto* p : m.parameters()) {
    before[p->name] = p->tensor.values();
    auto g = p->tensor.ensure_grad();
    for (auto& v : g) {
      v = rng.uniform(-1.0, 1.0);
      sq += v * v;
    }
    grads[p->name].assign(g.begin(), g.end());
  }
  FineTuneConfig cfg;
  auto params = m.parameters();
  const auto stats = ndgrad::sgd_step(params, cfg.opt);
  const double scale = cfg.opt.clip_norm / std::sqrt(sq);
  REQUIRE(scale < 1.0);
  CHECK(stats.scale == doctest::Approx(scale).epsilon(1e-12));
  for (auto* p : m.parameters()) {
    const double lr = p->group == ndgrad::LrGroup::kSlow ? cfg.opt.slow_lr : cfg.opt.base_lr;
    const auto& b = before[p->name];
    const auto& g = grads[p->name];
    for (std::size_t i = 0; i < b.size(); ++i)
      CHECK(b[i] - p->tensor[i] == doctest::Approx(lr * scale * g[i]).epsilon(1e-6).scale(1e-12));
  }
}

TEST_CASE("slow rate zero freezes the backbone bitwise") {
  const auto clips = synth_model_clips(3, 2, 5);
  const Checkpoint c = micro_checkpoint();
  FineTuneConfig cfg;
  cfg.epochs = 3;
  cfg.opt.slow_lr = 0.0;
  const auto ft = fine_tune_softmax(c, clips, 3, cfg);
  CHECK(ft.train.steps == 3);
  bool head_moved = false;
  const ModelGraph fresh = attach_head(c, transfer_softmax_desc(c.desc, 3), derive_seed(cfg.seed, {1}));
  const auto fresh_params = fresh.parameters();
  for (const auto* p : ft.model.parameters()) {
    if (const Blob* b = c.find(p->name)) {
      CHECK(bitwise_equal(p->tensor.values(), b->values));
    } else {
      for (const auto* q : fresh_params)
        if (q->name == p->name) head_moved |= !bitwise_equal(q->tensor.values(), p->tensor.values());
    }
  }
  CHECK(head_moved);
}

TEST_CASE("pretext pre-training is reproducible and checkpoints the backbone") {
  const auto source = synth_model_clips(3, 3, 11);
  PretrainConfig cfg;
  cfg.backbone = micro_backbone();
  cfg.epochs = 2;
  cfg.seed = 5;
  const auto a = pretext_pretrain(source, 3, cfg);
  const auto b = pretext_pretrain(source, 3, cfg);
  CHECK(encode_checkpoint(a.checkpoint) == encode_checkpoint(b.checkpoint));
  CHECK(a.checkpoint.arch == zoo::Arch::kVggishLike);
  CHECK(a.checkpoint.preset == frontend::PresetId::kTransfer64);
  CHECK(a.checkpoint.find(std::string(kHeadLayer) + ".weight") == nullptr);
  CHECK(a.train.epoch_loss.size() == 2);
  CHECK_NOTHROW(instantiate(a.checkpoint, zoo::Arch::kVggishLike));
  cfg.seed = 6;
  CHECK(encode_checkpoint(pretext_pretrain(source, 3, cfg).checkpoint) !=
        encode_checkpoint(a.checkpoint));
}

TEST_CASE("prototypical fine-tuning stops on the plateau rule") {
  const auto clips = synth_model_clips(2, 3, 13);
  ProtoFineTuneConfig cfg;
  cfg.train.patience = 4;
  cfg.train.max_epochs = 300;
  const auto r = fine_tune_proto(micro_checkpoint(), clips, 2, cfg);
  CHECK(r.model.n_outputs() == 10);
  CHECK(r.model.output_kind() == zoo::OutputKind::kLinearEmbedding);
  CHECK(r.support.shots() == protohead::kSupportShots);
  CHECK_FALSE(r.train.hit_max_epochs);
  CHECK(r.train.epochs == r.train.best_epoch + cfg.train.patience);
  CHECK(r.train.epochs != FineTuneConfig{}.epochs);
  CHECK(ProtoFineTuneConfig::default_train().patience == 200);
}

TEST_CASE("prototypical fine-tuning lowers the episode loss") {
  const auto clips = synth_model_clips(3, 3, 17);
  std::vector<double> first, fiftieth;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ProtoFineTuneConfig cfg;
    cfg.seed = seed;
    cfg.train.max_epochs = 50;
    cfg.train.patience = 1000;
    const auto r = fine_tune_proto(micro_checkpoint(seed + 1), clips, 3, cfg);
    REQUIRE(r.train.trace.size() == 50);
    CHECK(std::isfinite(r.train.trace.front().loss));
    first.push_back(r.train.trace.front().loss);
    fiftieth.push_back(r.train.trace.back().loss);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  CHECK(median(fiftieth) < median(first));
}
