// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#include "fsa/transfer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <utility>

#include "fsa/common/errors.hpp"

namespace fsa::transfer {

namespace fs = std::filesystem;
using ndgrad::Parameter;

namespace {

constexpr char kMagic[8] = {'F', 'S', 'A', 'C', 'K', 'P', 'T', '\0'};
// Refuse absurd sizes before allocating for them.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void shape(const Shape& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    for (std::size_t d : s) u64(d);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_++]} << (8 * i);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Shape shape(const char* what) {
    const std::uint32_t rank = u32(what);
    if (rank > 8) throw FormatError(std::string("implausible rank in ") + what);
    Shape s(rank);
    std::uint64_t total = 1;
    for (auto& d : s) {
      const std::uint64_t v = u64(what);
      if (v > kMaxElements || (v != 0 && total > kMaxElements / v))
        throw FormatError(std::string("implausible dimension in ") + what);
      total *= v;
      d = static_cast<std::size_t>(v);
    }
    return s;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

template <class E>
E checked_enum(std::uint32_t v, std::uint32_t max, const char* what) {
  if (v > max) throw FormatError(std::string("checkpoint has an unknown ") + what);
  return static_cast<E>(v);
}

zoo::GraphDesc decode_graph_desc(Reader& r) {
  zoo::GraphDesc d;
  const std::uint32_t arch = r.u32("graph arch");
  d.arch = static_cast<Arch>(arch);
  zoo::arch_name(d.arch);  // throws on unknown ids
  d.input = r.shape("graph input");
  d.output_kind = checked_enum<zoo::OutputKind>(r.u32("output kind"), 1, "output kind");
  const std::uint32_t n = r.u32("layer count");
  if (n > 4096) throw FormatError("implausible layer count");
  for (std::uint32_t i = 0; i < n; ++i) {
    zoo::LayerDesc l;
    l.kind = checked_enum<zoo::LayerKind>(r.u32("layer kind"),
                                          static_cast<std::uint32_t>(zoo::LayerKind::kDense),
                                          "layer kind");
    l.name = r.str("layer name");
    l.units = static_cast<std::size_t>(r.u64("layer units"));
    l.kernel_h = static_cast<std::size_t>(r.u64("kernel height"));
    l.kernel_w = static_cast<std::size_t>(r.u64("kernel width"));
    l.padding = checked_enum<ndgrad::Padding>(r.u32("padding"), 1, "padding");
    l.activation = checked_enum<ndgrad::Activation>(r.u32("activation"), 2, "activation");
    l.pool_h = static_cast<std::size_t>(r.u64("pool height"));
    l.pool_w = static_cast<std::size_t>(r.u64("pool width"));
    l.dropout = r.f64("dropout");
    l.weight_decay = r.f64("weight decay");
    l.init = checked_enum<zoo::Init>(r.u32("init"), 1, "init");
    d.layers.push_back(std::move(l));
  }
  return d;
}

std::string shape_mismatch(const std::string& name, const Shape& want, const Shape& got) {
  return "checkpoint blob '" + name + "' has shape " + ndgrad::shape_str(got) +
         ", the architecture expects " + ndgrad::shape_str(want);
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const Blob* Checkpoint::find(std::string_view name) const {
  for (const auto& b : blobs)
    if (b.name == name) return &b;
  return nullptr;
}

void encode_graph_desc(const zoo::GraphDesc& d, std::vector<std::uint8_t>& out) {
  Writer w(out);
  w.u32(static_cast<std::uint32_t>(d.arch));
  w.shape(d.input);
  w.u32(static_cast<std::uint32_t>(d.output_kind));
  w.u32(static_cast<std::uint32_t>(d.layers.size()));
  for (const auto& l : d.layers) {
    w.u32(static_cast<std::uint32_t>(l.kind));
    w.str(l.name);
    w.u64(l.units);
    w.u64(l.kernel_h);
    w.u64(l.kernel_w);
    w.u32(static_cast<std::uint32_t>(l.padding));
    w.u32(static_cast<std::uint32_t>(l.activation));
    w.u64(l.pool_h);
    w.u64(l.pool_w);
    w.f64(l.dropout);
    w.f64(l.weight_decay);
    w.u32(static_cast<std::uint32_t>(l.init));
  }
}

Checkpoint make_checkpoint(const ModelGraph& model, frontend::PresetId preset, std::string note) {
  Checkpoint c;
  c.arch = model.arch();
  c.preset = preset;
  c.note = std::move(note);
  c.desc = model.desc();
  for (const auto* p : model.parameters())
    c.blobs.push_back({p->name, false, p->tensor.shape(), p->tensor.values()});
  for (const auto& s : model.state())
    c.blobs.push_back({s.name, true, {s.values->size()}, *s.values});
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  Writer w(out);
  w.u32(c.format_version);
  w.u32(static_cast<std::uint32_t>(c.arch));
  w.u32(static_cast<std::uint32_t>(c.preset));
  w.str(c.note);
  encode_graph_desc(c.desc, out);
  w.u32(static_cast<std::uint32_t>(c.blobs.size()));
  for (const auto& b : c.blobs) {
    if (b.values.size() != ndgrad::shape_numel(b.shape))
      throw ArgumentError("blob '" + b.name + "' value count does not match its shape");
    w.str(b.name);
    w.u8(b.is_state ? 1 : 0);
    w.shape(b.shape);
    for (double v : b.values) w.f64(v);
  }
  w.u64(fnv1a64(out));
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + 8) throw FormatError("checkpoint truncated: too short");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError("not a checkpoint: bad magic");
  // Structural parse first so a truncated file reports truncation rather
  // than a checksum mismatch.
  Reader r(bytes.subspan(sizeof kMagic));
  Checkpoint c;
  c.format_version = r.u32("version");
  if (c.format_version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(c.format_version));
  c.arch = static_cast<Arch>(r.u32("arch"));
  try {
    zoo::arch_name(c.arch);
  } catch (const Error&) {
    throw FormatError("checkpoint has an unknown arch id");
  }
  const std::uint32_t preset = r.u32("preset");
  if (preset != static_cast<std::uint32_t>(frontend::PresetId::kPatch128) &&
      preset != static_cast<std::uint32_t>(frontend::PresetId::kTransfer64))
    throw FormatError("checkpoint has an unknown frontend preset");
  c.preset = static_cast<frontend::PresetId>(preset);
  c.note = r.str("note");
  try {
    c.desc = decode_graph_desc(r);
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("bad graph descriptor: ") + e.what());
  }
  const std::uint32_t n = r.u32("blob count");
  for (std::uint32_t i = 0; i < n; ++i) {
    Blob b;
    b.name = r.str("blob name");
    const std::uint8_t kind = r.u8("blob kind");
    if (kind > 1) throw FormatError("blob '" + b.name + "' has an unknown kind");
    b.is_state = kind == 1;
    b.shape = r.shape("blob shape");
    const std::size_t count = ndgrad::shape_numel(b.shape);
    r.need(count * 8, "blob values");
    b.values.resize(count);
    for (auto& v : b.values) v = r.f64("blob values");
    c.blobs.push_back(std::move(b));
  }
  const std::size_t body = sizeof kMagic + r.pos();
  const std::uint64_t stored = r.u64("checksum");
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint checksum");
  if (stored != fnv1a64(bytes.first(body))) throw FormatError("checkpoint checksum mismatch");
  return c;
}

void write_checkpoint(const Checkpoint& c, const fs::path& path) {
  const auto bytes = encode_checkpoint(c);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void save_checkpoint(const ModelGraph& model, const fs::path& path, frontend::PresetId preset,
                     std::string note) {
  write_checkpoint(make_checkpoint(model, preset, std::move(note)), path);
}

std::vector<std::string> load_into(const Checkpoint& c, ModelGraph& target) {
  std::map<std::string, Parameter*, std::less<>> params;
  for (Parameter* p : target.parameters()) params.emplace(p->name, p);
  std::map<std::string, std::vector<double>*, std::less<>> state;
  for (auto& s : target.state()) state.emplace(s.name, s.values);

  for (const auto& b : c.blobs) {
    if (b.is_state) {
      auto it = state.find(b.name);
      if (it == state.end()) throw CheckpointError("checkpoint blob '" + b.name + "' has no match");
      if (b.shape != Shape{it->second->size()})
        throw CheckpointError(shape_mismatch(b.name, {it->second->size()}, b.shape));
    } else {
      auto it = params.find(b.name);
      if (it == params.end()) throw CheckpointError("checkpoint blob '" + b.name + "' has no match");
      if (b.shape != it->second->tensor.shape())
        throw CheckpointError(shape_mismatch(b.name, it->second->tensor.shape(), b.shape));
    }
  }
  std::vector<std::string> assigned;
  for (const auto& b : c.blobs) {
    if (b.is_state) {
      *state.at(b.name) = b.values;
    } else {
      Parameter* p = params.at(b.name);
      p->tensor.values() = b.values;
      assigned.push_back(b.name);
    }
  }
  return assigned;
}

ModelGraph instantiate(const Checkpoint& c, Arch expected_arch) {
  if (c.arch != expected_arch)
    throw CheckpointError("checkpoint holds a " + std::string(zoo::arch_name(c.arch)) +
                          " model, expected " + std::string(zoo::arch_name(expected_arch)));
  if (c.desc.arch != c.arch) throw CheckpointError("checkpoint header and graph disagree on arch");
  ModelGraph g = [&] {
    try {
      return ModelGraph(c.desc, 0);
    } catch (const DimensionError& e) {
      throw CheckpointError(std::string("checkpoint graph is inconsistent: ") + e.what());
    }
  }();
  // Every parameter and buffer of the rebuilt graph must be covered.
  std::set<std::string, std::less<>> have;
  for (const auto& b : c.blobs) have.insert(b.name);
  for (const Parameter* p : std::as_const(g).parameters())
    if (!have.contains(p->name)) throw CheckpointError("checkpoint lacks blob '" + p->name + "'");
  for (const auto& s : std::as_const(g).state())
    if (!have.contains(s.name)) throw CheckpointError("checkpoint lacks blob '" + s.name + "'");
  load_into(c, g);
  return g;
}

ModelGraph load_checkpoint(const fs::path& path, Arch expected_arch) {
  return instantiate(read_checkpoint(path), expected_arch);
}

}  // namespace fsa::transfer
