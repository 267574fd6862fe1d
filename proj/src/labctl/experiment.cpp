// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/labctl/experiment.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <utility>

#include "fsa/baselines/baselines.hpp"
#include "fsa/common/errors.hpp"
#include "fsa/protohead/plateau.hpp"
#include "fsa/transfer/finetune.hpp"
#include "fsa/zoo/builders.hpp"
#include "fsa/zoo/predict.hpp"
#include "fsa/zoo/trainer.hpp"
#include "labctl/csv.hpp"

namespace fsa::labctl {

using frontend::CompressionKind;
using frontend::FrontendPreset;

namespace {

constexpr std::pair<Strategy, std::string_view> kNames[] = {
    {Strategy::kSbcnn, "sbcnn"},
    {Strategy::kVgg, "vgg"},
    {Strategy::kTimbre, "timbre"},
    {Strategy::kProtonet, "protonet"},
    {Strategy::kTransferSoftmax, "transfer_softmax"},
    {Strategy::kTransferProto, "transfer_proto"},
    {Strategy::kNnMfcc, "nn_mfcc"},
    {Strategy::kNnFeatures, "nn_features"},
    {Strategy::kRandom, "random"},
};

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// A vggish_like backbone built with log_learn carries its own compression
// layer and reads raw energies.
CompressionKind checkpoint_compression(const transfer::Checkpoint& ckpt) {
  const auto& layers = ckpt.desc.layers;
  return !layers.empty() && layers.front().kind == zoo::LayerKind::kCompress
             ? CompressionKind::kLogLearn
             : CompressionKind::kLogEps;
}

template <class T>
std::vector<T> pick(const std::vector<T>& all, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

struct CellOutcome {
  double accuracy = 0.0;
  std::size_t epochs = 0;
};

// Inputs one cell reads. All references point into data prepared before the
// parallel region, so cells only read shared state.
struct CellInputs {
  const ExperimentPlan& plan;
  const DatasetManifest& manifest;
  const std::vector<LabeledClip>* clips = nullptr;  // preset the strategy reads
  const std::vector<Tensor>* mfcc = nullptr;
  const std::vector<Tensor>* features = nullptr;
};

std::vector<LabeledClip> as_clip_labels(const DatasetManifest& m, std::span<const std::size_t> idx) {
  std::vector<LabeledClip> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back({m.entries[i].clip_id, m.entries[i].label, {}});
  return out;
}

void audit_ids(const frontend::ProvenanceAudit& audit, const DatasetManifest& m,
               std::span<const std::size_t> idx) {
  for (std::size_t i : idx) audit.check(m.entries[i].clip_id);
}

CellOutcome run_softmax_model(const zoo::GraphDesc& desc, const CellInputs& in,
                              std::span<const std::size_t> train_idx,
                              std::span<const std::size_t> eval_idx, std::uint64_t seed,
                              const frontend::ProvenanceAudit& audit) {
  const auto train = pick(*in.clips, train_idx);
  const auto eval = pick(*in.clips, eval_idx);
  zoo::ModelGraph model(desc, derive_seed(seed, {1}));
  SeededRng rng(derive_seed(seed, {2}));
  const auto& p = frontend::kPatch128;
  zoo::train_softmax(model, train, {in.plan.scale.softmax_epochs, p.patch_frames, {}}, rng,
                     &audit);
  const auto post = zoo::clip_posteriors(model, eval, p.patch_frames, p.predict_hop,
                                         zoo::softmax_posterior);
  return {zoo::accuracy(post, eval), in.plan.scale.softmax_epochs};
}

double proto_eval(const zoo::ModelGraph& model, const protohead::PrototypeSet& protos,
                  std::span<const LabeledClip> eval, const FrontendPreset& p) {
  const auto post = zoo::clip_posteriors(
      model, eval, p.patch_frames, p.predict_hop,
      [&protos](std::span<const double> row) { return protohead::classify_embedding(row, protos); });
  return zoo::accuracy(post, eval);
}

CellOutcome run_cell(const CellInputs& in, std::span<const std::size_t> train_idx,
                     std::span<const std::size_t> eval_idx, std::uint64_t seed) {
  const ExperimentPlan& plan = in.plan;
  const DatasetManifest& m = in.manifest;
  const std::size_t k = m.n_classes();

  // Every clip a training step may touch is checked against the held-out set.
  frontend::ProvenanceAudit audit(as_clip_labels(m, eval_idx));
  audit_ids(audit, m, train_idx);

  zoo::BuildOptions build{plan.compression};
  switch (plan.strategy) {
    case Strategy::kRandom: {
      SeededRng rng(derive_seed(seed, {3}));
      std::size_t ok = 0;
      for (std::size_t i : eval_idx)
        ok += baselines::random_guess(k, rng) == m.entries[i].label;
      return {static_cast<double>(ok) / static_cast<double>(eval_idx.size()), 0};
    }
    case Strategy::kNnMfcc: {
      const auto& f = *in.mfcc;
      baselines::FeatureIndex index(f.front().size());
      for (std::size_t i : train_idx) index.add(f[i], m.entries[i].label);
      std::size_t ok = 0;
      for (std::size_t i : eval_idx) ok += baselines::nn_classify(f[i], index) == m.entries[i].label;
      return {static_cast<double>(ok) / static_cast<double>(eval_idx.size()), 0};
    }
    case Strategy::kNnFeatures: {
      const auto& f = *in.features;
      const std::size_t dim = f.front().dim(1);
      baselines::FeatureIndex index(dim);
      for (std::size_t i : train_idx)
        for (std::size_t w = 0; w < f[i].dim(0); ++w)
          index.add(std::span<const double>(f[i].raw() + w * dim, dim), m.entries[i].label);
      std::size_t ok = 0;
      for (std::size_t i : eval_idx) {
        std::vector<Tensor> windows;
        for (std::size_t w = 0; w < f[i].dim(0); ++w)
          windows.emplace_back(ndgrad::Shape{dim},
                               std::vector<double>(f[i].raw() + w * dim, f[i].raw() + (w + 1) * dim));
        ok += baselines::nn_classify_voted(windows, index) == m.entries[i].label;
      }
      return {static_cast<double>(ok) / static_cast<double>(eval_idx.size()), 0};
    }
    case Strategy::kVgg:
      return run_softmax_model(zoo::build_vgg(k, plan.scale.vgg_filters, build), in, train_idx,
                               eval_idx, seed, audit);
    case Strategy::kSbcnn:
      return run_softmax_model(zoo::build_sbcnn(k, build), in, train_idx, eval_idx, seed, audit);
    case Strategy::kTimbre:
      return run_softmax_model(zoo::build_timbre(k, build), in, train_idx, eval_idx, seed, audit);
    case Strategy::kProtonet: {
      const auto train = pick(*in.clips, train_idx);
      const auto eval = pick(*in.clips, eval_idx);
      zoo::ProtoVggOptions opts;
      opts.filters_per_layer = plan.scale.proto_filters;
      opts.build = build;
      zoo::ModelGraph model(zoo::build_proto_vgg(opts), derive_seed(seed, {1}));
      SeededRng rng(derive_seed(seed, {2}));
      const auto& p = frontend::kPatch128;
      const auto support = protohead::sample_support(train, k, p.patch_frames, rng);
      for (const auto& id : support.source_clip_ids()) audit.check(id);
      protohead::ProtoTrainConfig cfg;
      cfg.patience = plan.scale.patience;
      cfg.patch_frames = p.patch_frames;
      cfg.predict_hop = p.predict_hop;
      cfg.distance = plan.distance;
      const auto r = protohead::train_until_plateau(model, train, support, cfg, rng, &audit);
      return {proto_eval(model, r.prototypes, eval, p), r.epochs};
    }
    case Strategy::kTransferSoftmax: {
      const auto train = pick(*in.clips, train_idx);
      const auto eval = pick(*in.clips, eval_idx);
      transfer::FineTuneConfig cfg;
      cfg.epochs = plan.scale.softmax_epochs;
      cfg.seed = seed;
      const auto ft = transfer::fine_tune_softmax(*plan.checkpoint, train, k, cfg, &audit);
      const auto& p = frontend::kTransfer64;
      const auto post = zoo::clip_posteriors(ft.model, eval, p.patch_frames, p.predict_hop,
                                             zoo::softmax_posterior);
      return {zoo::accuracy(post, eval), cfg.epochs};
    }
    case Strategy::kTransferProto: {
      const auto train = pick(*in.clips, train_idx);
      const auto eval = pick(*in.clips, eval_idx);
      transfer::ProtoFineTuneConfig cfg;
      cfg.train.patience = plan.scale.patience;
      cfg.train.distance = plan.distance;
      cfg.seed = seed;
      const auto ft = transfer::fine_tune_proto(*plan.checkpoint, train, k, cfg, &audit);
      return {proto_eval(ft.model, ft.train.prototypes, eval, frontend::kTransfer64),
              ft.train.epochs};
    }
  }
  throw ArgumentError("unknown strategy");
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  for (const auto& [k, name] : kNames)
    if (k == s) return name;
  throw ArgumentError("unknown strategy");
}

Strategy parse_strategy(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  throw ArgumentError("unknown strategy '" + std::string(name) + "'");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all = [] {
    std::vector<Strategy> v;
    for (const auto& [k, name] : kNames) v.push_back(k);
    return v;
  }();
  return all;
}

bool needs_checkpoint(Strategy s) {
  return s == Strategy::kTransferSoftmax || s == Strategy::kTransferProto ||
         s == Strategy::kNnFeatures;
}

std::size_t default_runs(std::size_t n) {
  switch (n) {
    case 1:
    case 2:
      return 20;
    case 5:
    case 10:
      return 10;
    case 20:
    case 50:
    case 100:
      return 5;
    default:
      throw ArgumentError("no default run count for n=" + std::to_string(n) +
                          "; pass m explicitly");
  }
}

void ExperimentPlan::validate() const {
  if (n == 0) throw ArgumentError("plan: n must be positive");
  (void)runs();
  if (needs_checkpoint(strategy) && !checkpoint)
    throw ArgumentError("strategy " + std::string(strategy_name(strategy)) +
                        " needs a pre-trained checkpoint");
  if (scale.vgg_filters == 0 || scale.proto_filters == 0 || scale.softmax_epochs == 0 ||
      scale.patience == 0)
    throw ArgumentError("plan: model scale entries must be positive");
}

std::uint64_t cell_seed(std::uint64_t plan_seed, int fold, std::size_t run) {
  return derive_seed(plan_seed, {static_cast<std::uint64_t>(fold), run});
}

std::vector<std::size_t> eval_indices(const DatasetManifest& m, int eval_fold) {
  const int want = m.layout == Layout::kSplit ? kEvalSplit : eval_fold;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.entries.size(); ++i)
    if (m.entries[i].fold == want) out.push_back(i);
  return out;
}

std::vector<std::size_t> subsample_train(const DatasetManifest& m, int eval_fold, std::size_t n,
                                         SeededRng& rng) {
  if (n == 0) throw ArgumentError("subsample_train: n must be positive");
  std::vector<std::vector<std::size_t>> by_class(m.n_classes());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    const bool train = m.layout == Layout::kSplit ? e.fold == kTrainSplit : e.fold != eval_fold;
    if (train) by_class.at(static_cast<std::size_t>(e.label)).push_back(i);
  }
  for (std::size_t c = 0; c < by_class.size(); ++c)
    if (by_class[c].size() < n)
      throw DataError("class '" + m.class_names[c] + "' has " +
                      std::to_string(by_class[c].size()) + " training clips, " +
                      std::to_string(n) + " requested");
  std::vector<std::size_t> out;
  out.reserve(n * by_class.size());
  for (auto& pool : by_class) {
    // Partial Fisher-Yates: the first n slots become a uniform sample.
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t r = j + static_cast<std::size_t>(rng.below(pool.size() - j));
      std::swap(pool[j], pool[r]);
      out.push_back(pool[j]);
    }
  }
  return out;
}

void ResultsTable::append(const ResultsTable& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

ResultsTable ResultsTable::without_timing() const {
  ResultsTable t = *this;
  for (auto& r : t.rows) r.wall_seconds = 0.0;
  return t;
}

ExperimentData::ExperimentData(DatasetManifest manifest, std::vector<AudioClip> audio)
    : manifest_(std::move(manifest)), audio_(std::move(audio)) {
  manifest_.validate();
  if (audio_.size() != manifest_.entries.size())
    throw ArgumentError("experiment data: audio count does not match the manifest");
  for (std::size_t i = 0; i < audio_.size(); ++i)
    if (audio_[i].clip_id != manifest_.entries[i].clip_id ||
        audio_[i].label != manifest_.entries[i].label)
      throw ArgumentError("experiment data: audio " + audio_[i].clip_id +
                          " does not match manifest entry " + manifest_.entries[i].clip_id);
}

ExperimentData ExperimentData::load(const DatasetManifest& manifest) {
  manifest.validate();
  return ExperimentData(manifest, load_audio(manifest));
}

const std::vector<LabeledClip>& ExperimentData::clips(const FrontendPreset& preset,
                                                      CompressionKind compression) {
  const std::pair<int, int> key{static_cast<int>(preset.id), static_cast<int>(compression)};
  for (const auto& [k, v] : clip_cache_)
    if (k == key) return v;
  clip_cache_.emplace_back(key, model_clips(audio_, preset, compression));
  return clip_cache_.back().second;
}

const std::vector<Tensor>& ExperimentData::mfcc() {
  if (!mfcc_) mfcc_ = mfcc_features(audio_);
  return *mfcc_;
}

const std::vector<Tensor>& ExperimentData::backbone_features(const transfer::Checkpoint& ckpt) {
  const std::uint64_t key = transfer::fnv1a64(transfer::encode_checkpoint(ckpt));
  if (features_key_ != key) {
    const zoo::ModelGraph backbone = transfer::instantiate(ckpt, zoo::Arch::kVggishLike);
    const auto& p = frontend::kTransfer64;
    const auto& input = clips(p, checkpoint_compression(ckpt));
    features_ = zoo::window_outputs(backbone, input, p.patch_frames, p.predict_hop);
    features_key_ = key;
  }
  return features_;
}

std::size_t worker_count() {
  const char* env = std::getenv("FSA_WORKERS");
  if (env == nullptr || *env == '\0') return static_cast<std::size_t>(omp_get_max_threads());
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v <= 0)
    throw ArgumentError(std::string("FSA_WORKERS must be a positive integer, got '") + env + "'");
  return static_cast<std::size_t>(v);
}

ResultsTable run_experiment(const ExperimentPlan& plan, ExperimentData& data) {
  plan.validate();
  const DatasetManifest& m = data.manifest();
  if (m.n_classes() < 2) throw DataError("experiment needs at least two classes");

  std::vector<int> folds;
  if (m.layout == Layout::kSplit) {
    folds = {kEvalSplit};
  } else if (plan.folds.empty()) {
    folds = m.folds();
  } else {
    const auto all = m.folds();
    for (int f : plan.folds)
      if (std::find(all.begin(), all.end(), f) == all.end())
        throw ArgumentError("plan fold " + std::to_string(f) + " is not in the manifest");
    folds = plan.folds;
  }

  CellInputs in{plan, m};
  switch (plan.strategy) {
    case Strategy::kRandom:
      break;
    case Strategy::kNnMfcc:
      in.mfcc = &data.mfcc();
      break;
    case Strategy::kNnFeatures:
      in.features = &data.backbone_features(*plan.checkpoint);
      break;
    case Strategy::kTransferSoftmax:
    case Strategy::kTransferProto:
      in.clips = &data.clips(frontend::kTransfer64, checkpoint_compression(*plan.checkpoint));
      break;
    default:
      in.clips = &data.clips(frontend::kPatch128, plan.compression);
      break;
  }

  const std::size_t runs = plan.runs();
  const std::string name(strategy_name(plan.strategy));
  ResultsTable table;
  table.rows.resize(folds.size() * runs);
  const int workers = static_cast<int>(worker_count());

#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(table.rows.size()); ++c) {
    const std::size_t cell = static_cast<std::size_t>(c);
    ResultRow& row = table.rows[cell];
    row.strategy = name;
    row.n = plan.n;
    row.fold = folds[cell / runs];
    row.run = cell % runs;
    row.seed = cell_seed(plan.seed, row.fold, row.run);
    const auto start = std::chrono::steady_clock::now();
    try {
      SeededRng rng(derive_seed(row.seed, {0}));
      const auto train_idx = subsample_train(m, row.fold, plan.n, rng);
      const auto eval_idx = eval_indices(m, row.fold);
      if (eval_idx.empty())
        throw DataError("fold " + std::to_string(row.fold) + " has no evaluation clips");
      const CellOutcome out = run_cell(in, train_idx, eval_idx, row.seed);
      row.accuracy = out.accuracy;
      row.epochs_trained = out.epochs;
    } catch (const std::exception& e) {
      row.accuracy = 0.0;
      row.epochs_trained = 0;
      row.error = e.what();
      if (row.error.empty()) row.error = "unknown failure";
    }
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return table;
}

ResultsTable run_experiment(const ExperimentPlan& plan, const DatasetManifest& manifest) {
  plan.validate();
  ExperimentData data = ExperimentData::load(manifest);
  return run_experiment(plan, data);
}

namespace {

constexpr const char* kResultsHeader =
    "strategy,n,fold,run,seed,accuracy,epochs_trained,wall_seconds,error";

template <class T>
T parse_number(const std::string& s, std::size_t line, const char* what) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_same_v<T, double>)
      v = std::stod(s, &used);
    else if constexpr (std::is_same_v<T, int>)
      v = std::stoi(s, &used);
    else
      v = static_cast<T>(std::stoull(s, &used));
    if (used == s.size() && !s.empty()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("results line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
}

}  // namespace

void write_results_csv(const ResultsTable& t, std::ostream& out) {
  out << kResultsHeader << '\n';
  for (const auto& r : t.rows)
    out << detail::csv_field(r.strategy) << ',' << r.n << ',' << r.fold << ',' << r.run << ','
        << r.seed << ',' << fmt17(r.accuracy) << ',' << r.epochs_trained << ','
        << fmt17(r.wall_seconds) << ',' << detail::csv_field(r.error) << '\n';
}

ResultsTable read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("results: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw FormatError("results: unexpected header '" + line + "'");
  ResultsTable t;
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 9)
      throw FormatError("results line " + std::to_string(no) + ": expected 9 fields, got " +
                        std::to_string(f.size()));
    ResultRow r;
    r.strategy = f[0];
    r.n = parse_number<std::size_t>(f[1], no, "n");
    r.fold = parse_number<int>(f[2], no, "fold");
    r.run = parse_number<std::size_t>(f[3], no, "run");
    r.seed = parse_number<std::uint64_t>(f[4], no, "seed");
    r.accuracy = parse_number<double>(f[5], no, "accuracy");
    r.epochs_trained = parse_number<std::size_t>(f[6], no, "epochs_trained");
    r.wall_seconds = parse_number<double>(f[7], no, "wall_seconds");
    r.error = f[8];
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0))
      throw FormatError("results line " + std::to_string(no) + ": accuracy outside [0, 1]");
    t.rows.push_back(std::move(r));
  }
  return t;
}

std::vector<CellSummary> aggregate(const ResultsTable& t) {
  if (t.rows.empty()) throw ArgumentError("aggregate: empty results table");
  std::map<std::pair<std::size_t, std::string>, std::vector<const ResultRow*>> cells;
  for (const auto& r : t.rows) cells[{r.n, r.strategy}].push_back(&r);
  std::vector<CellSummary> out;
  for (const auto& [key, rows] : cells) {
    CellSummary s;
    s.n = key.first;
    s.strategy = key.second;
    double sum = 0.0;
    for (const ResultRow* r : rows) {
      if (r->failed()) {
        ++s.errors;
        continue;
      }
      ++s.count;
      sum += r->accuracy;
    }
    if (s.count == 0)
      throw StateError("aggregate: every run of " + s.strategy + " at n=" +
                       std::to_string(s.n) + " failed");
    s.mean = sum / static_cast<double>(s.count);
    double ss = 0.0;
    for (const ResultRow* r : rows)
      if (!r->failed()) ss += (r->accuracy - s.mean) * (r->accuracy - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.count));
    out.push_back(std::move(s));
  }
  return out;
}

void write_curve_csv(std::span<const CellSummary> cells, std::ostream& out) {
  std::vector<const CellSummary*> sorted;
  for (const auto& c : cells) sorted.push_back(&c);
  std::stable_sort(sorted.begin(), sorted.end(), [](const CellSummary* a, const CellSummary* b) {
    return std::tie(a->n, a->strategy) < std::tie(b->n, b->strategy);
  });
  out << "strategy,n,mean,std,count\n";
  for (const CellSummary* c : sorted)
    out << detail::csv_field(c->strategy) << ',' << c->n << ',' << fmt17(c->mean) << ','
        << fmt17(c->stddev) << ',' << c->count << '\n';
}

void write_grid_csv(std::span<const CellSummary> cells, std::ostream& out) {
  std::set<std::string> strategies;
  std::map<std::size_t, std::map<std::string, double>> grid;
  for (const auto& c : cells) {
    strategies.insert(c.strategy);
    grid[c.n][c.strategy] = c.mean;
  }
  out << 'n';
  for (const auto& s : strategies) out << ',' << detail::csv_field(s);
  out << '\n';
  for (const auto& [n, row] : grid) {
    out << n;
    for (const auto& s : strategies) {
      out << ',';
      if (auto it = row.find(s); it != row.end()) out << fmt17(it->second);
    }
    out << '\n';
  }
}

}  // namespace fsa::labctl
