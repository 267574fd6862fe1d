// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/labctl/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "fsa/common/errors.hpp"
#include "fsa/frontend/wav.hpp"
#include "labctl/csv.hpp"

namespace fsa::labctl {

namespace fs = std::filesystem;
using detail::csv_field;
using detail::split_csv;

namespace {

int parse_int(const std::string& s, const std::string& what, std::size_t line) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("manifest line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
}

double parse_double(const std::string& s, const std::string& what, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw FormatError("manifest line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  return s.substr(b);
}

}  // namespace

std::vector<int> DatasetManifest::folds() const {
  if (layout == Layout::kSplit) return {kTrainSplit, kEvalSplit};
  std::set<int> f;
  for (const auto& e : entries) f.insert(e.fold);
  return {f.begin(), f.end()};
}

fs::path DatasetManifest::resolve(const ManifestEntry& e) const {
  const fs::path p(e.path);
  return p.is_absolute() ? p : root / p;
}

void DatasetManifest::validate() const {
  if (class_names.empty()) throw DataError("manifest has no classes");
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.clip_id).second) throw DataError("duplicate clip_id '" + e.clip_id + "'");
    if (e.label < 0 || static_cast<std::size_t>(e.label) >= class_names.size())
      throw DataError("clip '" + e.clip_id + "' has a label outside the class list");
    if (layout == Layout::kSplit && e.fold != kTrainSplit && e.fold != kEvalSplit)
      throw DataError("clip '" + e.clip_id + "': split layout folds are 0 (train) or 1 (eval)");
    if (layout == Layout::kFolded && e.fold < 1)
      throw DataError("clip '" + e.clip_id + "': folded layout folds start at 1");
  }
}

DatasetManifest parse_manifest(std::istream& in, const fs::path& root) {
  DatasetManifest m;
  m.root = root;
  std::map<std::string, int> index;
  auto class_index = [&](const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    const int id = static_cast<int>(m.class_names.size());
    m.class_names.push_back(name);
    index.emplace(name, id);
    return id;
  };

  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(line.substr(1));
      if (body == "layout=split") m.layout = Layout::kSplit;
      if (body == "layout=folded") m.layout = Layout::kFolded;
      if (body.rfind("classes=", 0) == 0) {
        std::stringstream ss(body.substr(8));
        std::string name;
        while (std::getline(ss, name, ';')) class_index(name);
      }
      continue;
    }
    const auto f = split_csv(line);
    if (!header) {
      if (f != std::vector<std::string>{"clip_id", "path", "label", "fold", "duration"})
        throw FormatError("manifest header must be clip_id,path,label,fold,duration");
      header = true;
      continue;
    }
    if (f.size() != 5)
      throw FormatError("manifest line " + std::to_string(lineno) + ": expected 5 fields");
    m.entries.push_back({f[0], f[1], class_index(f[2]), parse_int(f[3], "fold", lineno),
                         parse_double(f[4], "duration", lineno)});
  }
  if (!header) throw FormatError("manifest is empty");
  m.validate();
  return m;
}

DatasetManifest read_manifest(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw FormatError("cannot open manifest " + csv.string());
  return parse_manifest(in, csv.parent_path());
}

void write_manifest(const DatasetManifest& m, std::ostream& out) {
  out << "# layout=" << (m.layout == Layout::kSplit ? "split" : "folded") << "\n# classes=";
  for (std::size_t i = 0; i < m.class_names.size(); ++i) out << (i ? ";" : "") << m.class_names[i];
  out << "\nclip_id,path,label,fold,duration\n";
  for (const auto& e : m.entries) {
    out << csv_field(e.clip_id) << ',' << csv_field(e.path) << ','
        << csv_field(m.class_names.at(static_cast<std::size_t>(e.label))) << ',' << e.fold << ','
        << fmt_double(e.duration) << '\n';
  }
}

void write_manifest(const DatasetManifest& m, const fs::path& csv) {
  std::ofstream out(csv, std::ios::binary);
  if (!out) throw FormatError("cannot write manifest " + csv.string());
  write_manifest(m, out);
}

DatasetManifest import_us8k(const fs::path& dataset_root) {
  const fs::path meta = dataset_root / "metadata" / "UrbanSound8K.csv";
  std::ifstream in(meta);
  if (!in) throw FormatError("cannot open " + meta.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty " + meta.string());
  const auto head = split_csv(trim(line));
  auto col = [&](const std::string& name) {
    const auto it = std::find(head.begin(), head.end(), name);
    if (it == head.end()) throw FormatError("UrbanSound8K.csv lacks column " + name);
    return static_cast<std::size_t>(it - head.begin());
  };
  const std::size_t c_file = col("slice_file_name"), c_start = col("start"), c_end = col("end"),
                    c_fold = col("fold"), c_id = col("classID"), c_class = col("class");
  DatasetManifest m;
  m.layout = Layout::kFolded;
  m.root = dataset_root;
  std::map<int, std::string> names;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < head.size()) throw FormatError("UrbanSound8K.csv line " + std::to_string(lineno));
    const int fold = parse_int(f[c_fold], "fold", lineno);
    const int label = parse_int(f[c_id], "classID", lineno);
    names[label] = f[c_class];
    const double dur = parse_double(f[c_end], "end", lineno) - parse_double(f[c_start], "start", lineno);
    m.entries.push_back({f[c_file], "audio/fold" + std::to_string(fold) + "/" + f[c_file], label,
                         fold, dur});
  }
  for (const auto& [id, name] : names) {
    if (id != static_cast<int>(m.class_names.size()))
      throw FormatError("UrbanSound8K classID values are not contiguous from 0");
    m.class_names.push_back(name);
  }
  m.validate();
  return m;
}

DatasetManifest import_asc_tut(const fs::path& dataset_root, const fs::path& train_list,
                               const fs::path& eval_list) {
  DatasetManifest m;
  m.layout = Layout::kSplit;
  m.root = dataset_root;
  std::map<std::string, int> index;
  std::vector<std::pair<std::string, std::string>> rows[2];
  for (int split : {kTrainSplit, kEvalSplit}) {
    const fs::path& list = split == kTrainSplit ? train_list : eval_list;
    std::ifstream in(list);
    if (!in) throw FormatError("cannot open " + list.string());
    std::string line;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw FormatError(list.string() + ": expected '<path>\\t<label>'");
      rows[split].emplace_back(line.substr(0, tab), trim(line.substr(tab + 1)));
      index.emplace(rows[split].back().second, 0);
    }
  }
  for (auto& [name, id] : index) {
    id = static_cast<int>(m.class_names.size());
    m.class_names.push_back(name);
  }
  for (int split : {kTrainSplit, kEvalSplit}) {
    for (const auto& [path, label] : rows[split]) {
      const fs::path p = dataset_root / path;
      double dur = 0.0;
      if (fs::exists(p)) dur = frontend::read_wav(p).seconds();
      const std::string id = (split == kTrainSplit ? "train/" : "eval/") + path;
      m.entries.push_back({id, path, index.at(label), split, dur});
    }
  }
  m.validate();
  return m;
}

}  // namespace fsa::labctl
