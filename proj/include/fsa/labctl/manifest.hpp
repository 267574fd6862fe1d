// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fsa::labctl {

// folded: clips carry a fold id in [1, n_folds] and every fold is held out in
// turn. split: fold 0 is the training split and fold 1 the evaluation split.
enum class Layout { kFolded, kSplit };

inline constexpr int kTrainSplit = 0;
inline constexpr int kEvalSplit = 1;

struct ManifestEntry {
  std::string clip_id;
  std::string path;  // relative paths resolve against DatasetManifest::root
  int label = -1;
  int fold = 0;
  double duration = 0.0;  // seconds
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;
  Layout layout = Layout::kFolded;
  std::filesystem::path root;

  std::size_t n_classes() const { return class_names.size(); }
  // Sorted distinct fold ids (folded layout) or {0, 1} (split layout).
  std::vector<int> folds() const;
  std::filesystem::path resolve(const ManifestEntry& e) const;
  // Throws DataError on duplicate clip ids, labels outside class_names or
  // fold ids the layout does not allow.
  void validate() const;
};

// CSV with header clip_id,path,label,fold,duration. `label` is the class
// name; class indices follow first appearance unless class_names is given.
//
// A leading comment line "# layout=split" selects the split layout; folded
// is the default.
DatasetManifest read_manifest(const std::filesystem::path& csv);
DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& root);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& csv);
void write_manifest(const DatasetManifest& m, std::ostream& out);

// UrbanSound8K metadata/UrbanSound8K.csv. Audio lives at
// audio/fold<k>/<slice_file_name> under the dataset root; class ids are the
// classID column.
DatasetManifest import_us8k(const std::filesystem::path& dataset_root);

// TUT Acoustic Scenes 2016: tab-separated "<audio path>\t<scene label>" lists
// for the development (train) and evaluation sets. Durations are read from
// the WAV headers when the files exist and left at 0 otherwise.
DatasetManifest import_asc_tut(const std::filesystem::path& dataset_root,
                               const std::filesystem::path& train_list,
                               const std::filesystem::path& eval_list);

}  // namespace fsa::labctl
