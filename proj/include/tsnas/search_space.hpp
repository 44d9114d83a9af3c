// Copyright 2026 The TSNAS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// The two-stream search space: a sparse (few frames) and a dense (many
// frames) stream of MBConv3D block groups, a lateral fusion op at the end of
// selected groups, and an on/off attention block at selected group ends.
//
// Every searchable quantity is exposed as a VariableRef with a finite,
// ordered domain. The canonical variable order is
//   sparse groups (t, k, c, e per group), dense groups, fusion locations,
//   sparse attention locations, dense attention locations.
// Samplers and evaluators work on choice indices in that order.

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tsnas/rng.hpp"
#include "tsnas/types.hpp"

namespace tsnas {

// ---------------------------------------------------------------------------
// Domains

/// An inclusive arithmetic grid (min, max, step) over exact rationals.
class ChoiceRange {
 public:
  ChoiceRange(Rational min, Rational max, Rational step)
      : min_(min), max_(max), step_(step) {
    if (step_ <= 0) throw ValidationError("choice range step must be positive");
    if (min_ > max_) throw ValidationError("choice range min exceeds max");
    const Rational span = (max_ - min_) / step_;
    if (span.denominator() != 1) {
      throw ValidationError("choice range (" + to_string(min_) + ", " + to_string(max_) +
                            ", " + to_string(step_) + ") is not a whole number of steps");
    }
  }

  /// Singleton range {v}.
  static ChoiceRange single(Rational v, Rational step = 1) { return {v, v, step}; }

  const Rational& min() const { return min_; }
  const Rational& max() const { return max_; }
  const Rational& step() const { return step_; }

  std::size_t count() const {
    return static_cast<std::size_t>(((max_ - min_) / step_).numerator()) + 1;
  }

  Rational at(std::size_t i) const { return min_ + step_ * static_cast<std::int64_t>(i); }

  std::optional<std::size_t> index_of(const Rational& v) const {
    if (v < min_ || v > max_) return std::nullopt;
    const Rational off = (v - min_) / step_;
    if (off.denominator() != 1) return std::nullopt;
    return static_cast<std::size_t>(off.numerator());
  }

  bool contains(const Rational& v) const { return index_of(v).has_value(); }

  bool operator==(const ChoiceRange&) const = default;

 private:
  Rational min_, max_, step_;
};

/// Number of grid points in a range: (max - min) / step + 1.
inline std::size_t count_choices(const ChoiceRange& range) { return range.count(); }

enum class StreamId { kSparse = 0, kDense = 1 };

inline const char* to_string(StreamId s) { return s == StreamId::kSparse ? "sparse" : "dense"; }

enum class FusionKind { kNone, kTimeStridedConv, kTimeStridedSample };

inline const char* to_string(FusionKind k) {
  switch (k) {
    case FusionKind::kNone: return "none";
    case FusionKind::kTimeStridedConv: return "time_strided_conv";
    case FusionKind::kTimeStridedSample: return "time_strided_sample";
  }
  return "?";
}

inline FusionKind parse_fusion_kind(const std::string& s) {
  if (s == "none") return FusionKind::kNone;
  if (s == "time_strided_conv") return FusionKind::kTimeStridedConv;
  if (s == "time_strided_sample") return FusionKind::kTimeStridedSample;
  throw ValidationError("unknown fusion op '" + s + "'");
}

/// Lateral dense-to-sparse connection. The temporal stride is implied by
/// the two streams' frame counts.
struct FusionOp {
  FusionKind kind = FusionKind::kNone;
  int temporal_kernel = 5;     // conv only
  int channel_multiplier = 2;  // conv only

  static FusionOp none() { return {FusionKind::kNone, 0, 0}; }
  static FusionOp sample() { return {FusionKind::kTimeStridedSample, 0, 0}; }
  static FusionOp conv(int tau = 5, int gamma = 2) {
    return {FusionKind::kTimeStridedConv, tau, gamma};
  }

  auto operator<=>(const FusionOp&) const = default;
};

inline std::string describe(const FusionOp& op) {
  std::string s = to_string(op.kind);
  if (op.kind == FusionKind::kTimeStridedConv) {
    s += "(tau=" + std::to_string(op.temporal_kernel) +
         ",gamma=" + std::to_string(op.channel_multiplier) + ")";
  }
  return s;
}

/// Fixed (non-searched) convolution in a stream stem.
struct ConvDescriptor {
  int out_channels = 0;
  std::array<int, 3> kernel{1, 1, 1};  // t, h, w
  std::array<int, 3> stride{1, 1, 1};
  bool depthwise = false;

  bool operator==(const ConvDescriptor&) const = default;
};

struct BlockGroupSpec {
  int stage = 1;
  int repeats = 1;
  int spatial_stride = 1;
  ChoiceRange channels{8, 8, 8};
  ChoiceRange expansion{Rational(3, 2), Rational(6), Rational(3, 4)};
  std::vector<int> temporal_kernels{1, 3, 5};
  std::vector<int> spatial_kernels{3, 5};

  bool operator==(const BlockGroupSpec&) const = default;
};

struct StreamSpec {
  StreamId id = StreamId::kSparse;
  int frames = 1;
  int input_spatial = 224;
  std::vector<ConvDescriptor> stem;
  std::vector<BlockGroupSpec> groups;

  bool operator==(const StreamSpec&) const = default;
};

struct SearchSpaceSpec {
  StreamSpec sparse;
  StreamSpec dense;
  /// Sparse-stream group indices whose end carries a fusion block.
  std::vector<int> fusion_locations;
  /// One ordered op domain per fusion location.
  std::vector<std::vector<FusionOp>> fusion_domains;
  /// Group indices carrying an attention candidate, per stream.
  std::array<std::vector<int>, 2> attention_locations;
  /// One ordered {off, on} (or restricted) domain per attention location.
  std::array<std::vector<std::vector<bool>>, 2> attention_domains;

  const StreamSpec& stream(StreamId s) const { return s == StreamId::kSparse ? sparse : dense; }
  StreamSpec& stream(StreamId s) { return s == StreamId::kSparse ? sparse : dense; }

  /// Temporal stride of the time-strided fusion ops.
  int fusion_temporal_stride() const { return dense.frames / sparse.frames; }

  bool operator==(const SearchSpaceSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Architectures

struct BlockChoice {
  int t = 1;
  int k = 3;
  std::int64_t c_out = 8;
  Rational e{1};

  bool operator==(const BlockChoice&) const = default;
};

struct ArchitectureSample {
  std::array<std::vector<BlockChoice>, 2> groups;
  std::vector<FusionOp> fusion;
  std::array<std::vector<bool>, 2> attention;

  std::vector<BlockChoice>& stream(StreamId s) { return groups[static_cast<int>(s)]; }
  const std::vector<BlockChoice>& stream(StreamId s) const { return groups[static_cast<int>(s)]; }

  bool operator==(const ArchitectureSample&) const = default;
};

// ---------------------------------------------------------------------------
// Variables

enum class VarKind { kTemporalKernel, kSpatialKernel, kChannels, kExpansion, kFusion, kAttention };

inline bool is_backbone(VarKind k) {
  return k == VarKind::kTemporalKernel || k == VarKind::kSpatialKernel ||
         k == VarKind::kChannels || k == VarKind::kExpansion;
}

/// Names one search variable. `index` is the group index for backbone
/// variables and the location ordinal for fusion and attention variables.
struct VariableRef {
  VarKind kind = VarKind::kTemporalKernel;
  StreamId stream = StreamId::kSparse;
  std::size_t index = 0;

  auto operator<=>(const VariableRef&) const = default;

  /// Stable textual key, e.g. "sparse/g03/t", "fusion/l05", "attention/dense/l2".
  std::string key() const {
    auto pad = [](std::size_t i) { return (i < 10 ? "0" : "") + std::to_string(i); };
    switch (kind) {
      case VarKind::kTemporalKernel: return std::string(to_string(stream)) + "/g" + pad(index) + "/t";
      case VarKind::kSpatialKernel: return std::string(to_string(stream)) + "/g" + pad(index) + "/k";
      case VarKind::kChannels: return std::string(to_string(stream)) + "/g" + pad(index) + "/c";
      case VarKind::kExpansion: return std::string(to_string(stream)) + "/g" + pad(index) + "/e";
      case VarKind::kFusion: return "fusion/l" + pad(index);
      case VarKind::kAttention:
        return std::string("attention/") + to_string(stream) + "/l" + std::to_string(index);
    }
    return "?";
  }
};

inline VariableRef parse_variable_key(const std::string& key) {
  auto fail = [&]() -> VariableRef { throw ValidationError("malformed variable key '" + key + "'"); };
  auto number = [&](const std::string& s) -> std::size_t {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      fail();
    }
    return static_cast<std::size_t>(std::stoul(s));
  };
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= key.size(); ++i) {
    if (i == key.size() || key[i] == '/') {
      parts.push_back(key.substr(start, i - start));
      start = i + 1;
    }
  }
  auto stream_of = [&](const std::string& s) {
    if (s == "sparse") return StreamId::kSparse;
    if (s == "dense") return StreamId::kDense;
    fail();
    return StreamId::kSparse;
  };
  if (parts.size() == 2 && parts[0] == "fusion" && parts[1].size() > 1 && parts[1][0] == 'l') {
    return {VarKind::kFusion, StreamId::kSparse, number(parts[1].substr(1))};
  }
  if (parts.size() == 3 && parts[0] == "attention" && parts[2].size() > 1 && parts[2][0] == 'l') {
    return {VarKind::kAttention, stream_of(parts[1]), number(parts[2].substr(1))};
  }
  if (parts.size() == 3 && parts[1].size() > 1 && parts[1][0] == 'g') {
    const StreamId s = stream_of(parts[0]);
    const std::size_t g = number(parts[1].substr(1));
    if (parts[2] == "t") return {VarKind::kTemporalKernel, s, g};
    if (parts[2] == "k") return {VarKind::kSpatialKernel, s, g};
    if (parts[2] == "c") return {VarKind::kChannels, s, g};
    if (parts[2] == "e") return {VarKind::kExpansion, s, g};
  }
  return fail();
}

/// A concrete value of one variable.
using ChoiceValue = std::variant<std::int64_t, Rational, FusionOp, bool>;

inline std::string describe(const ChoiceValue& v) {
  struct {
    std::string operator()(std::int64_t x) const { return std::to_string(x); }
    std::string operator()(const Rational& x) const { return to_string(x); }
    std::string operator()(const FusionOp& x) const { return describe(x); }
    std::string operator()(bool x) const { return x ? "on" : "off"; }
  } visitor;
  return std::visit(visitor, v);
}

/// Variables pinned to concrete values.
using FrozenMask = std::map<VariableRef, ChoiceValue>;

/// All variables of a space in canonical order.
inline std::vector<VariableRef> variables(const SearchSpaceSpec& space) {
  std::vector<VariableRef> out;
  for (StreamId s : {StreamId::kSparse, StreamId::kDense}) {
    for (std::size_t g = 0; g < space.stream(s).groups.size(); ++g) {
      for (VarKind k : {VarKind::kTemporalKernel, VarKind::kSpatialKernel, VarKind::kChannels,
                        VarKind::kExpansion}) {
        out.push_back({k, s, g});
      }
    }
  }
  for (std::size_t l = 0; l < space.fusion_locations.size(); ++l) {
    out.push_back({VarKind::kFusion, StreamId::kSparse, l});
  }
  for (StreamId s : {StreamId::kSparse, StreamId::kDense}) {
    for (std::size_t l = 0; l < space.attention_locations[static_cast<int>(s)].size(); ++l) {
      out.push_back({VarKind::kAttention, s, l});
    }
  }
  return out;
}

namespace detail {

inline const BlockGroupSpec& group_of(const SearchSpaceSpec& space, const VariableRef& v) {
  const auto& groups = space.stream(v.stream).groups;
  if (v.index >= groups.size()) throw ValidationError("variable " + v.key() + " does not exist");
  return groups[v.index];
}

inline void check_location(const SearchSpaceSpec& space, const VariableRef& v) {
  const std::size_t n = v.kind == VarKind::kFusion
                            ? space.fusion_domains.size()
                            : space.attention_domains[static_cast<int>(v.stream)].size();
  if (v.index >= n) throw ValidationError("variable " + v.key() + " does not exist");
}

inline bool is_integral(const Rational& r) { return r.denominator() == 1; }

}  // namespace detail

inline std::size_t domain_size(const SearchSpaceSpec& space, const VariableRef& v) {
  switch (v.kind) {
    case VarKind::kTemporalKernel: return detail::group_of(space, v).temporal_kernels.size();
    case VarKind::kSpatialKernel: return detail::group_of(space, v).spatial_kernels.size();
    case VarKind::kChannels: return detail::group_of(space, v).channels.count();
    case VarKind::kExpansion: return detail::group_of(space, v).expansion.count();
    case VarKind::kFusion: detail::check_location(space, v); return space.fusion_domains[v.index].size();
    case VarKind::kAttention:
      detail::check_location(space, v);
      return space.attention_domains[static_cast<int>(v.stream)][v.index].size();
  }
  return 0;
}

inline ChoiceValue domain_value(const SearchSpaceSpec& space, const VariableRef& v, std::size_t i) {
  if (i >= domain_size(space, v)) throw ValidationError("choice index out of range for " + v.key());
  switch (v.kind) {
    case VarKind::kTemporalKernel:
      return static_cast<std::int64_t>(detail::group_of(space, v).temporal_kernels[i]);
    case VarKind::kSpatialKernel:
      return static_cast<std::int64_t>(detail::group_of(space, v).spatial_kernels[i]);
    case VarKind::kChannels:
      return detail::group_of(space, v).channels.at(i).numerator();
    case VarKind::kExpansion: return detail::group_of(space, v).expansion.at(i);
    case VarKind::kFusion: return space.fusion_domains[v.index][i];
    case VarKind::kAttention:
      return static_cast<bool>(space.attention_domains[static_cast<int>(v.stream)][v.index][i]);
  }
  throw ValidationError("unknown variable kind");
}

/// Position of `value` in the variable's domain, or nullopt when absent.
inline std::optional<std::size_t> domain_index(const SearchSpaceSpec& space, const VariableRef& v,
                                               const ChoiceValue& value) {
  auto find_in = [](const auto& list, const auto& x) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i] == x) return i;
    }
    return std::nullopt;
  };
  switch (v.kind) {
    case VarKind::kTemporalKernel:
    case VarKind::kSpatialKernel: {
      const auto* x = std::get_if<std::int64_t>(&value);
      if (!x) return std::nullopt;
      const auto& g = detail::group_of(space, v);
      return find_in(v.kind == VarKind::kTemporalKernel ? g.temporal_kernels : g.spatial_kernels,
                     static_cast<int>(*x));
    }
    case VarKind::kChannels: {
      const auto* x = std::get_if<std::int64_t>(&value);
      if (!x) return std::nullopt;
      return detail::group_of(space, v).channels.index_of(Rational(*x));
    }
    case VarKind::kExpansion: {
      const auto* x = std::get_if<Rational>(&value);
      if (!x) return std::nullopt;
      return detail::group_of(space, v).expansion.index_of(*x);
    }
    case VarKind::kFusion: {
      const auto* x = std::get_if<FusionOp>(&value);
      if (!x) return std::nullopt;
      detail::check_location(space, v);
      return find_in(space.fusion_domains[v.index], *x);
    }
    case VarKind::kAttention: {
      const auto* x = std::get_if<bool>(&value);
      if (!x) return std::nullopt;
      detail::check_location(space, v);
      const auto& dom = space.attention_domains[static_cast<int>(v.stream)][v.index];
      for (std::size_t i = 0; i < dom.size(); ++i) {
        if (dom[i] == *x) return i;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

/// Reads a variable's value out of an architecture.
inline ChoiceValue get_value(const ArchitectureSample& arch, const VariableRef& v) {
  auto oob = [&]() -> ChoiceValue {
    throw ValidationError("architecture has no entry for " + v.key());
  };
  if (is_backbone(v.kind)) {
    const auto& groups = arch.stream(v.stream);
    if (v.index >= groups.size()) return oob();
    const BlockChoice& b = groups[v.index];
    switch (v.kind) {
      case VarKind::kTemporalKernel: return static_cast<std::int64_t>(b.t);
      case VarKind::kSpatialKernel: return static_cast<std::int64_t>(b.k);
      case VarKind::kChannels: return b.c_out;
      default: return b.e;
    }
  }
  if (v.kind == VarKind::kFusion) {
    if (v.index >= arch.fusion.size()) return oob();
    return arch.fusion[v.index];
  }
  const auto& bits = arch.attention[static_cast<int>(v.stream)];
  if (v.index >= bits.size()) return oob();
  return static_cast<bool>(bits[v.index]);
}

/// Writes a variable's value; the architecture must already be shaped for
/// the space (see blank_architecture).
inline void set_value(ArchitectureSample& arch, const VariableRef& v, const ChoiceValue& value) {
  auto wrong = [&]() { throw ValidationError("value of wrong type for " + v.key()); };
  if (is_backbone(v.kind)) {
    auto& groups = arch.stream(v.stream);
    if (v.index >= groups.size()) groups.resize(v.index + 1);
    BlockChoice& b = groups[v.index];
    if (v.kind == VarKind::kExpansion) {
      const auto* x = std::get_if<Rational>(&value);
      if (!x) wrong();
      b.e = *x;
      return;
    }
    const auto* x = std::get_if<std::int64_t>(&value);
    if (!x) wrong();
    if (v.kind == VarKind::kTemporalKernel) b.t = static_cast<int>(*x);
    if (v.kind == VarKind::kSpatialKernel) b.k = static_cast<int>(*x);
    if (v.kind == VarKind::kChannels) b.c_out = *x;
    return;
  }
  if (v.kind == VarKind::kFusion) {
    const auto* x = std::get_if<FusionOp>(&value);
    if (!x) wrong();
    if (v.index >= arch.fusion.size()) arch.fusion.resize(v.index + 1);
    arch.fusion[v.index] = *x;
    return;
  }
  const auto* x = std::get_if<bool>(&value);
  if (!x) wrong();
  auto& bits = arch.attention[static_cast<int>(v.stream)];
  if (v.index >= bits.size()) bits.resize(v.index + 1);
  bits[v.index] = *x;
}

/// Choice index of every variable, canonical order.
inline std::vector<std::size_t> to_indices(const SearchSpaceSpec& space, const ArchitectureSample& arch) {
  std::vector<std::size_t> out;
  for (const auto& v : variables(space)) {
    auto idx = domain_index(space, v, get_value(arch, v));
    if (!idx) throw ValidationError(v.key() + " = " + describe(get_value(arch, v)) + " is outside its domain");
    out.push_back(*idx);
  }
  return out;
}

inline ArchitectureSample from_indices(const SearchSpaceSpec& space, const std::vector<std::size_t>& indices) {
  const auto vars = variables(space);
  if (indices.size() != vars.size()) throw ValidationError("index vector does not match the space");
  ArchitectureSample arch;
  arch.groups[0].resize(space.sparse.groups.size());
  arch.groups[1].resize(space.dense.groups.size());
  arch.fusion.resize(space.fusion_locations.size());
  for (int s = 0; s < 2; ++s) arch.attention[s].resize(space.attention_locations[s].size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    set_value(arch, vars[i], domain_value(space, vars[i], indices[i]));
  }
  return arch;
}

/// The architecture taking the first choice of every domain.
inline ArchitectureSample first_choice_architecture(const SearchSpaceSpec& space) {
  return from_indices(space, std::vector<std::size_t>(variables(space).size(), 0));
}

// ---------------------------------------------------------------------------
// Construction

enum class FusionPlacement { kEveryGroup, kStageEnds };

inline std::vector<int> stage_end_groups(const StreamSpec& stream) {
  std::vector<int> out;
  for (std::size_t g = 0; g < stream.groups.size(); ++g) {
    if (g + 1 == stream.groups.size() || stream.groups[g + 1].stage != stream.groups[g].stage) {
      out.push_back(static_cast<int>(g));
    }
  }
  return out;
}

/// Picks `count` evenly spread indices out of [0, n): round(i (n-1)/(count-1)),
/// halves rounding up.
inline std::vector<int> evenly_spaced_indices(int n, int count) {
  if (count <= 0 || n <= 0) return {};
  if (count == 1) return {0};
  if (count > n) throw ValidationError("cannot pick more locations than candidates");
  std::vector<int> out;
  for (int i = 0; i < count; ++i) {
    const int num = 2 * i * (n - 1) + (count - 1);
    out.push_back(num / (2 * (count - 1)));
  }
  return out;
}

/// Attention candidates: `per_stream` evenly spaced group ends among the
/// groups of stage >= 2.
inline std::vector<int> default_attention_locations(const StreamSpec& stream, int per_stream = 6) {
  std::vector<int> candidates;
  for (std::size_t g = 0; g < stream.groups.size(); ++g) {
    if (stream.groups[g].stage >= 2) candidates.push_back(static_cast<int>(g));
  }
  std::vector<int> out;
  for (int i : evenly_spaced_indices(static_cast<int>(candidates.size()), per_stream)) {
    out.push_back(candidates[i]);
  }
  return out;
}

inline std::vector<FusionOp> default_fusion_domain() {
  return {FusionOp::none(), FusionOp::conv(5, 2), FusionOp::sample()};
}

/// Structural checks shared by the builders and the JSON loader.
inline void check_space(const SearchSpaceSpec& space) {
  if (space.sparse.id != StreamId::kSparse || space.dense.id != StreamId::kDense) {
    throw ValidationError("stream ids must be sparse then dense");
  }
  for (const StreamSpec* s : {&space.sparse, &space.dense}) {
    const std::string name = to_string(s->id);
    if (s->frames <= 0) throw ValidationError(name + " stream frame count must be positive");
    if (s->input_spatial <= 0) throw ValidationError(name + " stream input size must be positive");
    if (s->groups.empty()) throw ValidationError(name + " stream has no block groups");
    for (const auto& c : s->stem) {
      if (c.out_channels <= 0) throw ValidationError(name + " stem conv needs positive channels");
      for (int i = 0; i < 3; ++i) {
        if (c.kernel[i] <= 0 || c.stride[i] <= 0) {
          throw ValidationError(name + " stem conv needs positive kernel and stride");
        }
      }
    }
    for (std::size_t g = 0; g < s->groups.size(); ++g) {
      const auto& grp = s->groups[g];
      const std::string where = name + " group " + std::to_string(g);
      if (grp.stage < 1 || grp.stage > 4) throw ValidationError(where + ": stage must be in 1..4");
      if (grp.repeats <= 0) throw ValidationError(where + ": repeats must be positive");
      if (grp.spatial_stride != 1 && grp.spatial_stride != 2) {
        throw ValidationError(where + ": spatial stride must be 1 or 2");
      }
      for (std::size_t i = 0; i < grp.channels.count(); ++i) {
        const Rational c = grp.channels.at(i);
        if (!detail::is_integral(c) || c <= 0) {
          throw ValidationError(where + ": channel choices must be positive integers");
        }
      }
      if (grp.expansion.min() <= 0) throw ValidationError(where + ": expansion must be positive");
      for (const auto* dom : {&grp.temporal_kernels, &grp.spatial_kernels}) {
        if (dom->empty()) throw ValidationError(where + ": empty kernel domain");
        for (int kk : *dom) {
          if (kk <= 0 || kk % 2 == 0) throw ValidationError(where + ": kernel sizes must be odd and positive");
        }
      }
    }
  }
  if (space.dense.frames % space.sparse.frames != 0) {
    throw ValidationError("dense frame count must be a multiple of the sparse frame count");
  }
  if (space.fusion_domains.size() != space.fusion_locations.size()) {
    throw ValidationError("one fusion domain is required per fusion location");
  }
  const int shared = static_cast<int>(std::min(space.sparse.groups.size(), space.dense.groups.size()));
  for (std::size_t l = 0; l < space.fusion_locations.size(); ++l) {
    const int g = space.fusion_locations[l];
    if (g < 0 || g >= shared) throw ValidationError("fusion location outside the shared group range");
    if (l > 0 && g <= space.fusion_locations[l - 1]) {
      throw ValidationError("fusion locations must be strictly increasing");
    }
    if (space.fusion_domains[l].empty()) throw ValidationError("empty fusion domain");
  }
  for (int s = 0; s < 2; ++s) {
    const auto& locs = space.attention_locations[s];
    if (space.attention_domains[s].size() != locs.size()) {
      throw ValidationError("one attention domain is required per attention location");
    }
    const int n = static_cast<int>(s == 0 ? space.sparse.groups.size() : space.dense.groups.size());
    for (std::size_t l = 0; l < locs.size(); ++l) {
      if (locs[l] < 0 || locs[l] >= n) throw ValidationError("attention location outside the stream");
      if (l > 0 && locs[l] <= locs[l - 1]) {
        throw ValidationError("attention locations must be strictly increasing");
      }
      if (space.attention_domains[s][l].empty()) throw ValidationError("empty attention domain");
    }
  }
}

/// The default two-stream macro space: 11 MBConv3D groups per stream over
/// four stages, kernel choices {1,3,5} x {3,5}, expansion grid
/// (1.5, 6.0, 0.75), fusion after every sparse group and six attention
/// candidates per stream.
inline SearchSpaceSpec build_default_space(int sparse_frames = 4, int dense_frames = 32,
                                           int input_spatial = 224,
                                           FusionPlacement placement = FusionPlacement::kEveryGroup) {
  if (sparse_frames <= 0 || dense_frames <= 0) throw UsageError("frame counts must be positive");
  if (input_spatial < 32) throw UsageError("input spatial size must be at least 32");
  if (dense_frames % sparse_frames != 0) {
    throw UsageError("dense frame count " + std::to_string(dense_frames) +
                     " is not a multiple of sparse frame count " + std::to_string(sparse_frames));
  }

  auto stem = [](int channels) {
    return std::vector<ConvDescriptor>{
        {channels, {1, 3, 3}, {1, 2, 2}, false},
        {channels, {3, 1, 1}, {1, 1, 1}, true},
    };
  };
  struct Row {
    int stage, repeats, stride;
    std::int64_t cmin, cmax, cstep;
  };
  auto groups = [](std::initializer_list<Row> rows) {
    std::vector<BlockGroupSpec> out;
    for (const Row& r : rows) {
      BlockGroupSpec g;
      g.stage = r.stage;
      g.repeats = r.repeats;
      g.spatial_stride = r.stride;
      g.channels = ChoiceRange(r.cmin, r.cmax, r.cstep);
      out.push_back(g);
    }
    return out;
  };

  SearchSpaceSpec space;
  space.sparse.id = StreamId::kSparse;
  space.sparse.frames = sparse_frames;
  space.sparse.input_spatial = input_spatial;
  space.sparse.stem = stem(24);
  space.sparse.groups = groups({
      {1, 1, 2, 32, 48, 8},     {1, 2, 1, 32, 48, 8},
      {2, 1, 2, 64, 88, 8},     {2, 4, 1, 64, 88, 8},
      {3, 1, 2, 128, 176, 16},  {3, 3, 1, 128, 176, 16},
      {3, 3, 1, 128, 176, 16},  {3, 4, 1, 128, 176, 16},
      {4, 1, 2, 248, 344, 24},  {4, 3, 1, 248, 344, 24},
      {4, 3, 1, 248, 344, 24},
  });

  space.dense.id = StreamId::kDense;
  space.dense.frames = dense_frames;
  space.dense.input_spatial = input_spatial;
  space.dense.stem = stem(8);
  space.dense.groups = groups({
      {1, 1, 2, 8, 8, 8},    {1, 2, 1, 8, 16, 8},
      {2, 1, 2, 8, 24, 8},   {2, 4, 1, 8, 24, 8},
      {3, 1, 2, 16, 32, 8},  {3, 3, 1, 16, 32, 8},
      {3, 3, 1, 16, 32, 8},  {3, 4, 1, 16, 32, 8},
      {4, 1, 2, 32, 56, 8},  {4, 3, 1, 32, 56, 8},
      {4, 3, 1, 32, 56, 8},
  });

  if (placement == FusionPlacement::kEveryGroup) {
    for (int g = 0; g < static_cast<int>(space.sparse.groups.size()); ++g) space.fusion_locations.push_back(g);
  } else {
    space.fusion_locations = stage_end_groups(space.sparse);
  }
  space.fusion_domains.assign(space.fusion_locations.size(), default_fusion_domain());

  for (StreamId s : {StreamId::kSparse, StreamId::kDense}) {
    const int i = static_cast<int>(s);
    space.attention_locations[i] = default_attention_locations(space.stream(s));
    space.attention_domains[i].assign(space.attention_locations[i].size(), std::vector<bool>{false, true});
  }
  check_space(space);
  return space;
}

// ---------------------------------------------------------------------------
// Counting, sampling, validation, restriction

/// Number of architectures in the space, treating `restriction` variables
/// as fixed.
inline BigInt cardinality(const SearchSpaceSpec& space, const FrozenMask& restriction = {}) {
  for (const auto& [var, value] : restriction) {
    if (!domain_index(space, var, value)) {
      throw ValidationError("frozen value " + describe(value) + " for " + var.key() + " is outside its domain");
    }
  }
  BigInt total = 1;
  for (const auto& v : variables(space)) {
    if (restriction.count(v)) continue;
    total *= domain_size(space, v);
  }
  return total;
}

/// Variables whose domain has more than one choice.
inline std::vector<VariableRef> free_variables(const SearchSpaceSpec& space) {
  std::vector<VariableRef> out;
  for (const auto& v : variables(space)) {
    if (domain_size(space, v) > 1) out.push_back(v);
  }
  return out;
}

/// Independent uniform draw of every variable.
inline ArchitectureSample sample_uniform(const SearchSpaceSpec& space, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const auto vars = variables(space);
  std::vector<std::size_t> idx(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::size_t n = domain_size(space, vars[i]);
    idx[i] = n > 1 ? static_cast<std::size_t>(uniform_index(rng, n)) : 0;
  }
  return from_indices(space, idx);
}

struct Violation {
  std::string variable;
  std::string message;
};

inline std::string domain_description(const SearchSpaceSpec& space, const VariableRef& v) {
  switch (v.kind) {
    case VarKind::kChannels:
    case VarKind::kExpansion: {
      const auto& g = detail::group_of(space, v);
      const ChoiceRange& r = v.kind == VarKind::kChannels ? g.channels : g.expansion;
      return "(" + to_string(r.min()) + ", " + to_string(r.max()) + ", " + to_string(r.step()) + ")";
    }
    default: {
      std::string s = "{";
      for (std::size_t i = 0; i < domain_size(space, v); ++i) {
        if (i) s += ", ";
        s += describe(domain_value(space, v, i));
      }
      return s + "}";
    }
  }
}

/// Every domain-membership or shape violation; empty means valid.
inline std::vector<Violation> validate(const SearchSpaceSpec& space, const ArchitectureSample& arch) {
  std::vector<Violation> out;
  for (StreamId s : {StreamId::kSparse, StreamId::kDense}) {
    if (arch.stream(s).size() != space.stream(s).groups.size()) {
      out.push_back({to_string(s), "expected " + std::to_string(space.stream(s).groups.size()) +
                                       " groups, got " + std::to_string(arch.stream(s).size())});
    }
    const int i = static_cast<int>(s);
    if (arch.attention[i].size() != space.attention_locations[i].size()) {
      out.push_back({std::string("attention/") + to_string(s),
                     "expected " + std::to_string(space.attention_locations[i].size()) + " attention bits"});
    }
  }
  if (arch.fusion.size() != space.fusion_locations.size()) {
    out.push_back({"fusion", "expected " + std::to_string(space.fusion_locations.size()) + " fusion ops"});
  }
  if (!out.empty()) return out;
  for (const auto& v : variables(space)) {
    const ChoiceValue value = get_value(arch, v);
    if (!domain_index(space, v, value)) {
      out.push_back({v.key(), "value " + describe(value) + " not in domain " + domain_description(space, v)});
    }
  }
  return out;
}

/// Copy of the space with each frozen variable's domain reduced to its
/// frozen value.
inline SearchSpaceSpec restrict(const SearchSpaceSpec& space, const FrozenMask& frozen) {
  SearchSpaceSpec out = space;
  for (const auto& [v, value] : frozen) {
    if (!domain_index(space, v, value)) {
      throw ValidationError("frozen value " + describe(value) + " for " + v.key() + " is outside " +
                            domain_description(space, v));
    }
    switch (v.kind) {
      case VarKind::kTemporalKernel:
        out.stream(v.stream).groups[v.index].temporal_kernels = {static_cast<int>(std::get<std::int64_t>(value))};
        break;
      case VarKind::kSpatialKernel:
        out.stream(v.stream).groups[v.index].spatial_kernels = {static_cast<int>(std::get<std::int64_t>(value))};
        break;
      case VarKind::kChannels: {
        auto& r = out.stream(v.stream).groups[v.index].channels;
        r = ChoiceRange::single(Rational(std::get<std::int64_t>(value)), r.step());
        break;
      }
      case VarKind::kExpansion: {
        auto& r = out.stream(v.stream).groups[v.index].expansion;
        r = ChoiceRange::single(std::get<Rational>(value), r.step());
        break;
      }
      case VarKind::kFusion: out.fusion_domains[v.index] = {std::get<FusionOp>(value)}; break;
      case VarKind::kAttention:
        out.attention_domains[static_cast<int>(v.stream)][v.index] = {std::get<bool>(value)};
        break;
    }
  }
  return out;
}

/// Freezes the given variables to their values in `arch`.
inline FrozenMask freeze_from(const ArchitectureSample& arch, const std::vector<VariableRef>& vars) {
  FrozenMask out;
  for (const auto& v : vars) out[v] = get_value(arch, v);
  return out;
}

}  // namespace tsnas
