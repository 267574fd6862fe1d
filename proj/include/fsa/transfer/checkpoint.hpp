// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoint format, all integers and doubles little-endian:
//
//   magic      8 bytes  "FSACKPT\0"
//   version    u32
//   arch       u32      zoo::Arch
//   preset     u32      frontend::PresetId
//   note       str      (u32 length + bytes)
//   graph      serialized GraphDesc
//   n_blobs    u32
//   blob       str name, u8 kind (0 parameter, 1 state), u32 rank,
//              u64 dims[rank], f64 values[prod(dims)]
//   checksum   u64      FNV-1a over every preceding byte
//
// Doubles are stored as their IEEE-754 bit patterns, so round trips are
// bitwise exact.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fsa/frontend/spectrogram.hpp"
#include "fsa/zoo/graph.hpp"

namespace fsa::transfer {

using ndgrad::Shape;
using zoo::Arch;
using zoo::ModelGraph;

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Blob {
  std::string name;
  bool is_state = false;  // batch-norm running statistics
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  Arch arch = Arch::kCustom;
  frontend::PresetId preset = frontend::PresetId::kTransfer64;
  std::string note;
  zoo::GraphDesc desc;
  std::vector<Blob> blobs;

  const Blob* find(std::string_view name) const;
};

// Snapshot of every parameter and state buffer of a graph.
Checkpoint make_checkpoint(const ModelGraph& model, frontend::PresetId preset,
                           std::string note = {});

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// Throws FormatError on bad magic, unknown version, truncation, trailing
// bytes or a checksum mismatch.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

// Writes through a temporary file and a rename, so readers never see a
// partially written checkpoint.
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

void save_checkpoint(const ModelGraph& model, const std::filesystem::path& path,
                     frontend::PresetId preset = frontend::PresetId::kTransfer64,
                     std::string note = {});

// Rebuilds the stored graph and fills in its values. Throws CheckpointError
// when the stored arch differs from expected_arch, or when a blob is missing,
// unexpected or mis-shaped (the message names the first such blob).
ModelGraph instantiate(const Checkpoint& ckpt, Arch expected_arch);
ModelGraph load_checkpoint(const std::filesystem::path& path, Arch expected_arch);

// Copies every checkpoint blob into the same-named parameter or state buffer
// of `target`. All blobs are checked before anything is written, so a
// CheckpointError leaves target untouched. Returns the names of the
// parameters that were assigned.
std::vector<std::string> load_into(const Checkpoint& ckpt, ModelGraph& target);

// GraphDesc wire format, shared with the checkpoint body.
void encode_graph_desc(const zoo::GraphDesc& desc, std::vector<std::uint8_t>& out);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

}  // namespace fsa::transfer
