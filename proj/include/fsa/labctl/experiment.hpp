// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// The n-per-class / m-runs protocol. For every evaluation fold (or the fixed
// evaluation split) and every run, n clips per class are drawn from the
// training side, a strategy is trained on them alone and scored on the whole
// evaluation side. Each (fold, run) cell is independent and seeded from the
// plan seed, the fold and the run.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fsa/common/rng.hpp"
#include "fsa/frontend/compression.hpp"
#include "fsa/labctl/dataset.hpp"
#include "fsa/labctl/manifest.hpp"
#include "fsa/protohead/protonet.hpp"
#include "fsa/transfer/checkpoint.hpp"

namespace fsa::labctl {

enum class Strategy {
  kSbcnn,
  kVgg,
  kTimbre,
  kProtonet,
  kTransferSoftmax,
  kTransferProto,
  kNnMfcc,
  kNnFeatures,
  kRandom,
};

std::string_view strategy_name(Strategy s);
// Accepts the names strategy_name produces; throws ArgumentError otherwise.
Strategy parse_strategy(std::string_view name);
const std::vector<Strategy>& all_strategies();
// Strategies that read a pre-trained checkpoint.
bool needs_checkpoint(Strategy s);

// The per-class training sizes the protocol is defined for.
inline constexpr std::size_t kTrainSizes[] = {1, 2, 5, 10, 20, 50, 100};

// m = 20 for n in {1, 2}, 10 for n in {5, 10}, 5 for n in {20, 50, 100}.
// Throws ArgumentError for any other n.
std::size_t default_runs(std::size_t n);

// Model sizes and training lengths. The defaults are the full-size models;
// smaller values give desk-scale runs with the same topology.
struct ModelScale {
  std::size_t vgg_filters = 32;
  std::size_t proto_filters = 128;
  std::size_t softmax_epochs = 200;  // vgg, sbcnn, timbre and transfer_softmax
  std::size_t patience = 200;        // plateau rule for protonet and transfer_proto
};

struct ExperimentPlan {
  Strategy strategy = Strategy::kRandom;
  std::size_t n = 1;
  std::size_t m = 0;  // 0 selects default_runs(n)
  protohead::DistanceConfig distance;
  frontend::CompressionKind compression = frontend::CompressionKind::kLogEps;
  std::uint64_t seed = 1;
  ModelScale scale;
  // Pre-trained backbone for the transfer and nn_features strategies.
  std::shared_ptr<const transfer::Checkpoint> checkpoint;
  // Evaluation folds to visit (folded layout); empty visits all of them.
  std::vector<int> folds;

  std::size_t runs() const { return m == 0 ? default_runs(n) : m; }
  // Throws ArgumentError on n = 0 or a missing checkpoint.
  void validate() const;
};

// Seed of the (fold, run) cell.
std::uint64_t cell_seed(std::uint64_t plan_seed, int fold, std::size_t run);

// Entries held out when `eval_fold` is evaluated: that fold (folded layout)
// or the evaluation split.
std::vector<std::size_t> eval_indices(const DatasetManifest& m, int eval_fold);

// Draws n training clips per class, uniformly without replacement, from the
// entries not held out for `eval_fold`. Returns manifest indices grouped by
// class, each class in draw order. Throws DataError naming the first class
// with fewer than n training clips.
std::vector<std::size_t> subsample_train(const DatasetManifest& m, int eval_fold, std::size_t n,
                                         SeededRng& rng);

struct ResultRow {
  std::string strategy;
  std::size_t n = 0;
  int fold = 0;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;  // in [0, 1]; 0 on error rows
  std::size_t epochs_trained = 0;
  double wall_seconds = 0.0;
  std::string error;  // empty unless the run failed

  bool failed() const { return !error.empty(); }
  bool operator==(const ResultRow&) const = default;
};

struct ResultsTable {
  std::vector<ResultRow> rows;

  void append(const ResultsTable& other);
  // Copy with every wall_seconds set to 0: the deterministic part of a table.
  ResultsTable without_timing() const;
  bool operator==(const ResultsTable&) const = default;
};

// Decoded audio plus lazily computed per-strategy inputs. Reusing one
// ExperimentData across plans avoids recomputing spectrograms and features.
class ExperimentData {
 public:
  ExperimentData(DatasetManifest manifest, std::vector<AudioClip> audio);
  // Reads and decodes every manifest entry.
  static ExperimentData load(const DatasetManifest& manifest);

  const DatasetManifest& manifest() const { return manifest_; }
  std::span<const AudioClip> audio() const { return audio_; }

  const std::vector<LabeledClip>& clips(const frontend::FrontendPreset& preset,
                                        frontend::CompressionKind compression);
  const std::vector<Tensor>& mfcc();
  // Backbone outputs per clip, one [windows, features] tensor each.
  const std::vector<Tensor>& backbone_features(const transfer::Checkpoint& ckpt);

 private:
  DatasetManifest manifest_;
  std::vector<AudioClip> audio_;
  std::vector<std::pair<std::pair<int, int>, std::vector<LabeledClip>>> clip_cache_;
  std::optional<std::vector<Tensor>> mfcc_;
  std::optional<std::uint64_t> features_key_;  // checksum of the encoded checkpoint
  std::vector<Tensor> features_;
};

// Worker threads for run_experiment: the FSA_WORKERS environment variable
// when set, otherwise the OpenMP default. Throws ArgumentError when the
// variable is not a positive integer.
std::size_t worker_count();

// Runs every (fold, run) cell of the plan. A failing cell becomes an error
// row and the others proceed. Rows are ordered by fold, then run, whatever
// the scheduling.
ResultsTable run_experiment(const ExperimentPlan& plan, ExperimentData& data);
ResultsTable run_experiment(const ExperimentPlan& plan, const DatasetManifest& manifest);

// Raw rows. Numbers are written with 17 significant digits, so reading the
// file back reproduces the table exactly.
void write_results_csv(const ResultsTable& t, std::ostream& out);
ResultsTable read_results_csv(std::istream& in);

struct CellSummary {
  std::string strategy;
  std::size_t n = 0;
  std::size_t count = 0;   // successful rows
  std::size_t errors = 0;  // failed rows, excluded from the statistics
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

// Unweighted mean and standard deviation over all successful (fold, run) rows
// of each (strategy, n), sorted by n and then strategy name. Throws
// ArgumentError on an empty table, and StateError when some cell has no
// successful row.
std::vector<CellSummary> aggregate(const ResultsTable& t);

// strategy,n,mean,std,count with one line per (strategy, n), sorted by n.
void write_curve_csv(std::span<const CellSummary> cells, std::ostream& out);
// n followed by one mean column per strategy: the accuracy grid.
void write_grid_csv(std::span<const CellSummary> cells, std::ostream& out);

}  // namespace fsa::labctl
