// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/transfer/finetune.hpp"

#include <map>

#include "fsa/common/errors.hpp"
#include "fsa/zoo/predict.hpp"

namespace fsa::transfer {

using ndgrad::LrGroup;
using ndgrad::Parameter;

namespace {

zoo::GraphDesc with_head(const zoo::GraphDesc& backbone, Arch arch, std::size_t units,
                         zoo::OutputKind kind) {
  if (units == 0) throw ArgumentError("transfer head needs at least one unit");
  zoo::GraphDesc g = backbone;
  g.arch = arch;
  g.output_kind = kind;
  zoo::LayerDesc head;
  head.kind = zoo::LayerKind::kDense;
  head.name = kHeadLayer;
  head.units = units;
  head.init = zoo::Init::kGlorotUniform;
  g.layers.push_back(head);
  return g;
}

const frontend::FrontendPreset& transfer_preset() { return frontend::kTransfer64; }

}  // namespace

zoo::GraphDesc transfer_softmax_desc(const zoo::GraphDesc& backbone, std::size_t n_classes) {
  return with_head(backbone, Arch::kTransferSoftmax, n_classes, zoo::OutputKind::kSoftmax);
}

zoo::GraphDesc transfer_proto_desc(const zoo::GraphDesc& backbone, std::size_t embed_dim) {
  return with_head(backbone, Arch::kTransferProto, embed_dim, zoo::OutputKind::kLinearEmbedding);
}

ModelGraph attach_head(const Checkpoint& backbone, const zoo::GraphDesc& combined,
                       std::uint64_t seed) {
  if (backbone.arch != Arch::kVggishLike)
    throw CheckpointError("fine-tuning needs a vggish_like checkpoint, got " +
                          std::string(zoo::arch_name(backbone.arch)));
  if (backbone.desc.input != combined.input)
    throw CheckpointError("checkpoint input " + ndgrad::shape_str(backbone.desc.input) +
                          " does not match the model input " + ndgrad::shape_str(combined.input));
  ModelGraph model(combined, seed);
  const auto restored = load_into(backbone, model);
  std::map<std::string, bool, std::less<>> slow;
  for (const auto& name : restored) slow[name] = true;
  for (Parameter* p : model.parameters())
    p->group = slow.contains(p->name) ? LrGroup::kSlow : LrGroup::kFast;
  return model;
}

ModelGraph extract_backbone(const ModelGraph& combined, const zoo::GraphDesc& backbone) {
  ModelGraph out(backbone, 0);
  std::map<std::string, const Parameter*, std::less<>> src;
  for (const Parameter* p : combined.parameters()) src.emplace(p->name, p);
  for (Parameter* p : out.parameters()) {
    auto it = src.find(p->name);
    if (it == src.end() || it->second->tensor.shape() != p->tensor.shape())
      throw StateError("combined graph has no backbone parameter '" + p->name + "'");
    p->tensor.values() = it->second->tensor.values();
    p->group = LrGroup::kFast;
  }
  return out;
}

PretrainResult pretext_pretrain(std::span<const LabeledClip> source, std::size_t n_classes,
                                const PretrainConfig& cfg) {
  if (n_classes < 2) throw ArgumentError("pretext_pretrain needs at least 2 source classes");
  const zoo::GraphDesc backbone = zoo::build_vggish_like(cfg.backbone);
  ModelGraph model(transfer_softmax_desc(backbone, n_classes), derive_seed(cfg.seed, {1}));
  SeededRng rng(derive_seed(cfg.seed, {2}));
  const auto& preset = transfer_preset();
  PretrainResult r;
  r.train = zoo::train_softmax(model, source, {cfg.epochs, preset.patch_frames, cfg.opt}, rng);
  const auto post = zoo::clip_posteriors(model, source, preset.patch_frames, preset.predict_hop,
                                         zoo::softmax_posterior);
  r.train_accuracy = zoo::accuracy(post, source);
  r.checkpoint = make_checkpoint(extract_backbone(model, backbone), preset.id, cfg.note);
  return r;
}

SoftmaxFineTune fine_tune_softmax(const Checkpoint& ckpt, std::span<const LabeledClip> train,
                                  std::size_t n_classes, const FineTuneConfig& cfg,
                                  const frontend::ProvenanceAudit* audit) {
  SoftmaxFineTune out{attach_head(ckpt, transfer_softmax_desc(ckpt.desc, n_classes),
                                  derive_seed(cfg.seed, {1})),
                      {}};
  SeededRng rng(derive_seed(cfg.seed, {2}));
  out.train = zoo::train_softmax(out.model, train,
                                 {cfg.epochs, transfer_preset().patch_frames, cfg.opt}, rng, audit);
  return out;
}

protohead::ProtoTrainConfig ProtoFineTuneConfig::default_train() {
  protohead::ProtoTrainConfig c;
  c.patch_frames = frontend::kTransfer64.patch_frames;
  c.predict_hop = frontend::kTransfer64.predict_hop;
  c.opt = FineTuneConfig{}.opt;
  return c;
}

ProtoFineTune fine_tune_proto(const Checkpoint& ckpt, std::span<const LabeledClip> train,
                              std::size_t n_classes, const ProtoFineTuneConfig& cfg,
                              const frontend::ProvenanceAudit* audit,
                              std::span<const LabeledClip> monitor) {
  ProtoFineTune out{attach_head(ckpt, transfer_proto_desc(ckpt.desc, cfg.embed_dim),
                                derive_seed(cfg.seed, {1})),
                    {},
                    {}};
  SeededRng rng(derive_seed(cfg.seed, {2}));
  out.support = protohead::sample_support(train, n_classes, cfg.train.patch_frames, rng, cfg.shots);
  if (audit)
    for (const auto& id : out.support.source_clip_ids()) audit->check(id);
  out.train = protohead::train_until_plateau(out.model, train, out.support, cfg.train, rng, audit,
                                             monitor);
  return out;
}

}  // namespace fsa::transfer
