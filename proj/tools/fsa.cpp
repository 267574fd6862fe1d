// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// fsa: synthetic data, experiment grids, pre-training and fine-tuning from
// the command line. Worker threads for `run` and `baseline` come from the
// FSA_WORKERS environment variable.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsa/common/errors.hpp"
#include "fsa/labctl/experiment.hpp"
#include "fsa/labctl/synth.hpp"
#include "fsa/transfer/finetune.hpp"
#include "fsa/zoo/predict.hpp"

namespace fs = std::filesystem;
using namespace fsa;
using namespace fsa::labctl;

namespace {

const std::map<std::string, protohead::DistanceKind> kDistances{
    {"euclidean", protohead::DistanceKind::kEuclidean},
    {"cosine", protohead::DistanceKind::kCosine}};
const std::map<std::string, frontend::CompressionKind> kCompressions{
    {"log-eps", frontend::CompressionKind::kLogEps},
    {"log-learn", frontend::CompressionKind::kLogLearn}};

struct RunOptions {
  std::string manifest;
  std::vector<std::string> strategies;
  std::vector<std::size_t> ns{1};
  std::size_t m = 0;
  std::string distance = "euclidean";
  std::string compression = "log-eps";
  std::uint64_t seed = 1;
  std::string checkpoint;
  std::vector<int> folds;
  ModelScale scale;
  std::string out = "results.csv";
};

void add_run_options(CLI::App* cmd, RunOptions& o, bool baselines_only) {
  cmd->add_option("--manifest", o.manifest, "dataset manifest CSV")->required();
  auto* strat = cmd->add_option("--strategy", o.strategies, "strategies to run")->required();
  std::vector<std::string> names;
  for (Strategy s : all_strategies()) {
    if (baselines_only && s != Strategy::kNnMfcc && s != Strategy::kNnFeatures &&
        s != Strategy::kRandom)
      continue;
    names.emplace_back(strategy_name(s));
  }
  strat->check(CLI::IsMember(names));
  cmd->add_option("--n", o.ns, "clips per class (one or more)")->capture_default_str();
  cmd->add_option("--m", o.m, "runs per fold; 0 uses the default schedule")->capture_default_str();
  cmd->add_option("--distance", o.distance, "prototype distance")
      ->check(CLI::IsMember({"euclidean", "cosine"}))
      ->capture_default_str();
  cmd->add_option("--compression", o.compression, "log-mel compression")
      ->check(CLI::IsMember({"log-eps", "log-learn"}))
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "plan seed")->capture_default_str();
  cmd->add_option("--checkpoint", o.checkpoint, "pre-trained backbone for transfer strategies");
  cmd->add_option("--folds", o.folds, "evaluation folds to visit (default: all)");
  cmd->add_option("--vgg-filters", o.scale.vgg_filters)->capture_default_str();
  cmd->add_option("--proto-filters", o.scale.proto_filters)->capture_default_str();
  cmd->add_option("--epochs", o.scale.softmax_epochs, "fixed epochs for softmax models")
      ->capture_default_str();
  cmd->add_option("--patience", o.scale.patience, "plateau patience for prototypical models")
      ->capture_default_str();
  cmd->add_option("--out", o.out, "raw results CSV")->capture_default_str();
}

int do_run(const RunOptions& o) {
  ExperimentData data = ExperimentData::load(read_manifest(o.manifest));
  std::shared_ptr<const transfer::Checkpoint> ckpt;
  if (!o.checkpoint.empty())
    ckpt = std::make_shared<const transfer::Checkpoint>(transfer::read_checkpoint(o.checkpoint));
  ResultsTable all;
  for (const auto& name : o.strategies) {
    for (std::size_t n : o.ns) {
      ExperimentPlan plan;
      plan.strategy = parse_strategy(name);
      plan.n = n;
      plan.m = o.m;
      plan.distance.kind = kDistances.at(o.distance);
      plan.compression = kCompressions.at(o.compression);
      plan.seed = o.seed;
      plan.scale = o.scale;
      plan.checkpoint = ckpt;
      plan.folds = o.folds;
      const ResultsTable t = run_experiment(plan, data);
      std::size_t failed = 0;
      for (const auto& r : t.rows) failed += r.failed();
      const auto cells = aggregate(t);
      std::printf("%-16s n=%-3zu rows=%-4zu failed=%-3zu mean=%.4f std=%.4f\n", name.c_str(), n,
                  t.rows.size(), failed, cells.front().mean, cells.front().stddev);
      all.append(t);
    }
  }
  std::ofstream out(o.out);
  if (!out) throw ArgumentError("cannot write " + o.out);
  write_results_csv(all, out);
  return 0;
}

// Clips of the manifest in model form for the transfer preset.
std::vector<LabeledClip> transfer_clips(const DatasetManifest& m, frontend::CompressionKind c) {
  return model_clips(load_audio(m), frontend::kTransfer64, c);
}

struct FineTuneOptions {
  std::string manifest, checkpoint, out, trace;
  std::size_t n = 5;
  int fold = 1;
  std::size_t run = 0;
  std::uint64_t seed = 1;
  std::size_t epochs = 200;
  std::size_t patience = 200;
  std::string distance = "euclidean";
};

void add_finetune_options(CLI::App* cmd, FineTuneOptions& o, bool proto) {
  cmd->add_option("--manifest", o.manifest, "target dataset manifest")->required();
  cmd->add_option("--checkpoint", o.checkpoint, "pre-trained backbone")->required();
  cmd->add_option("--n", o.n, "clips per class")->capture_default_str();
  cmd->add_option("--fold", o.fold, "evaluation fold (ignored for split manifests)")
      ->capture_default_str();
  cmd->add_option("--run", o.run, "run index within the fold")->capture_default_str();
  cmd->add_option("--seed", o.seed, "plan seed")->capture_default_str();
  cmd->add_option("--out", o.out, "write the fine-tuned model checkpoint here");
  if (proto) {
    cmd->add_option("--patience", o.patience)->capture_default_str();
    cmd->add_option("--distance", o.distance)
        ->check(CLI::IsMember({"euclidean", "cosine"}))
        ->capture_default_str();
    cmd->add_option("--trace", o.trace, "per-epoch train/test accuracy CSV");
  } else {
    cmd->add_option("--epochs", o.epochs)->capture_default_str();
  }
}

int do_finetune(const FineTuneOptions& o, bool proto) {
  const DatasetManifest m = read_manifest(o.manifest);
  m.validate();
  const transfer::Checkpoint ckpt = transfer::read_checkpoint(o.checkpoint);
  const auto compression = !ckpt.desc.layers.empty() &&
                                   ckpt.desc.layers.front().kind == zoo::LayerKind::kCompress
                               ? frontend::CompressionKind::kLogLearn
                               : frontend::CompressionKind::kLogEps;
  const auto clips = transfer_clips(m, compression);
  const int fold = m.layout == Layout::kSplit ? kEvalSplit : o.fold;
  const std::uint64_t seed = cell_seed(o.seed, fold, o.run);
  SeededRng rng(derive_seed(seed, {0}));
  std::vector<LabeledClip> train, eval;
  for (std::size_t i : subsample_train(m, fold, o.n, rng)) train.push_back(clips[i]);
  for (std::size_t i : eval_indices(m, fold)) eval.push_back(clips[i]);
  const frontend::ProvenanceAudit audit(eval);
  const auto& p = frontend::kTransfer64;

  if (!proto) {
    transfer::FineTuneConfig cfg;
    cfg.epochs = o.epochs;
    cfg.seed = seed;
    const auto ft = transfer::fine_tune_softmax(ckpt, train, m.n_classes(), cfg, &audit);
    const double acc = zoo::accuracy(
        zoo::clip_posteriors(ft.model, eval, p.patch_frames, p.predict_hop, zoo::softmax_posterior),
        eval);
    std::printf("transfer_softmax n=%zu fold=%d epochs=%zu final_loss=%.5f accuracy=%.4f\n", o.n,
                fold, cfg.epochs, ft.train.epoch_loss.back(), acc);
    if (!o.out.empty()) transfer::save_checkpoint(ft.model, o.out, p.id, "fine-tuned softmax");
    return 0;
  }

  transfer::ProtoFineTuneConfig cfg;
  cfg.train.patience = o.patience;
  cfg.train.distance.kind = kDistances.at(o.distance);
  cfg.seed = seed;
  const bool trace = !o.trace.empty();
  const auto ft = transfer::fine_tune_proto(ckpt, train, m.n_classes(), cfg, &audit,
                                            trace ? std::span<const LabeledClip>(eval)
                                                  : std::span<const LabeledClip>());
  const auto post = zoo::clip_posteriors(
      ft.model, eval, p.patch_frames, p.predict_hop, [&](std::span<const double> row) {
        return protohead::classify_embedding(row, ft.train.prototypes);
      });
  std::printf("transfer_proto n=%zu fold=%d epochs=%zu best_train_acc=%.4f accuracy=%.4f%s\n",
              o.n, fold, ft.train.epochs, ft.train.best_train_acc, zoo::accuracy(post, eval),
              ft.train.hit_max_epochs ? " (hit the epoch cap)" : "");
  if (trace) {
    std::ofstream out(o.trace);
    protohead::write_trace_csv(out, ft.train.trace);
  }
  if (!o.out.empty()) transfer::save_checkpoint(ft.model, o.out, p.id, "fine-tuned prototypes");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot audio classification experiments"};
  app.require_subcommand(1);

  SynthConfig synth;
  std::string synth_out = "synth";
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset and its manifest");
  synth_cmd->add_option("--classes", synth.classes)->capture_default_str();
  synth_cmd->add_option("--clips", synth.clips_per_class, "clips per class")->capture_default_str();
  synth_cmd->add_option("--folds", synth.folds)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--jitter", synth.jitter)->capture_default_str();
  synth_cmd->add_option("--clutter", synth.clutter)->capture_default_str();
  synth_cmd->add_option("--pitch-spread", synth.pitch_spread)->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "output directory")->capture_default_str();

  std::string imp_root, imp_train, imp_eval, imp_out = "manifest.csv";
  auto* imp_cmd = app.add_subcommand("import", "write a manifest for a public dataset");
  auto* us8k_cmd = imp_cmd->add_subcommand("us8k", "UrbanSound8K (metadata CSV, 10 folds)");
  auto* asc_cmd = imp_cmd->add_subcommand("asc", "TUT acoustic scenes (train and eval lists)");
  imp_cmd->require_subcommand(1);
  for (auto* c : {us8k_cmd, asc_cmd}) {
    c->add_option("--root", imp_root, "dataset root")->required();
    c->add_option("--out", imp_out, "manifest path")->capture_default_str();
  }
  asc_cmd->add_option("--train-list", imp_train)->required();
  asc_cmd->add_option("--eval-list", imp_eval)->required();

  RunOptions run, baseline;
  add_run_options(app.add_subcommand("run", "run an n-per-class experiment grid"), run, false);
  add_run_options(app.add_subcommand("baseline", "run the non-trained baselines"), baseline, true);

  std::vector<std::string> agg_in;
  std::string curve_out = "curve.csv", grid_out;
  auto* agg_cmd = app.add_subcommand("aggregate", "mean and std per strategy and n");
  agg_cmd->add_option("results", agg_in, "raw results CSVs")->required();
  agg_cmd->add_option("--out", curve_out, "curve CSV")->capture_default_str();
  agg_cmd->add_option("--grid", grid_out, "also write the n x strategy grid CSV");

  transfer::PretrainConfig pre;
  std::string pre_manifest, pre_out = "backbone.fsackpt", pre_compression = "log-eps";
  auto* pre_cmd = app.add_subcommand("pretrain", "pre-train a vggish_like backbone");
  pre_cmd->add_option("--manifest", pre_manifest, "source dataset manifest")->required();
  pre_cmd->add_option("--epochs", pre.epochs)->capture_default_str();
  pre_cmd->add_option("--seed", pre.seed)->capture_default_str();
  pre_cmd->add_option("--compression", pre_compression)
      ->check(CLI::IsMember({"log-eps", "log-learn"}))
      ->capture_default_str();
  pre_cmd->add_option("--out", pre_out, "checkpoint path")->capture_default_str();

  FineTuneOptions ft, ftp;
  add_finetune_options(app.add_subcommand("finetune", "fine-tune a softmax head"), ft, false);
  add_finetune_options(app.add_subcommand("finetune-proto", "fine-tune a prototypical head"), ftp,
                       true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      const auto m = synth_dataset(synth, synth_out);
      std::printf("wrote %zu clips in %zu classes to %s\n", m.entries.size(), m.n_classes(),
                  (fs::path(synth_out) / "manifest.csv").c_str());
    } else if (*imp_cmd) {
      const DatasetManifest m =
          *us8k_cmd ? import_us8k(imp_root) : import_asc_tut(imp_root, imp_train, imp_eval);
      m.validate();
      write_manifest(m, imp_out);
      std::printf("wrote %zu clips in %zu classes to %s\n", m.entries.size(), m.n_classes(),
                  imp_out.c_str());
    } else if (app.got_subcommand("run")) {
      return do_run(run);
    } else if (app.got_subcommand("baseline")) {
      return do_run(baseline);
    } else if (*agg_cmd) {
      ResultsTable all;
      for (const auto& path : agg_in) {
        std::ifstream in(path);
        if (!in) throw ArgumentError("cannot open " + path);
        all.append(read_results_csv(in));
      }
      const auto cells = aggregate(all);
      std::ofstream out(curve_out);
      write_curve_csv(cells, out);
      if (!grid_out.empty()) {
        std::ofstream grid(grid_out);
        write_grid_csv(cells, grid);
      }
      for (const auto& c : cells)
        std::printf("%-16s n=%-3zu mean=%.4f std=%.4f runs=%zu errors=%zu\n", c.strategy.c_str(),
                    c.n, c.mean, c.stddev, c.count, c.errors);
    } else if (*pre_cmd) {
      const DatasetManifest m = read_manifest(pre_manifest);
      m.validate();
      pre.backbone.build.compression = kCompressions.at(pre_compression);
      const auto clips = transfer_clips(m, pre.backbone.build.compression);
      const auto r = transfer::pretext_pretrain(clips, m.n_classes(), pre);
      transfer::write_checkpoint(r.checkpoint, pre_out);
      std::printf("pre-trained on %zu clips, %zu classes: train accuracy %.4f, final loss %.5f\n",
                  clips.size(), m.n_classes(), r.train_accuracy, r.train.epoch_loss.back());
    } else if (app.got_subcommand("finetune")) {
      return do_finetune(ft, false);
    } else if (app.got_subcommand("finetune-proto")) {
      return do_finetune(ftp, true);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fsa: %s\n", e.what());
    return 1;
  }
  return 0;
}
