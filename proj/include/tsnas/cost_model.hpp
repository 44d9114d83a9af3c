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

// Analytic FLOPs and parameter accounting.
//
// Conventions:
//   * one FLOP is one multiply-add (MAC);
//   * convolutions are bias-free with "same" padding, out = ceil(in / stride);
//   * batch-norm, activations, residual adds and pooling cost nothing and
//     carry no parameters.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <cstdint>
#include <string>
#include <vector>

#include "tsnas/search_space.hpp"

namespace tsnas {

struct TensorShape {
  std::int64_t c = 1;
  std::int64_t t = 1;
  std::int64_t h = 1;
  std::int64_t w = 1;

  bool operator==(const TensorShape&) const = default;
};

inline std::string describe(const TensorShape& s) {
  return std::to_string(s.c) + "x" + std::to_string(s.t) + "x" + std::to_string(s.h) + "x" +
         std::to_string(s.w);
}

struct LayerCost {
  BigInt flops = 0;
  BigInt params = 0;
  TensorShape out;
};

namespace detail {

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

inline void check_shape(const TensorShape& s) {
  if (s.c <= 0 || s.t <= 0 || s.h <= 0 || s.w <= 0) {
    throw ValidationError("tensor shape " + describe(s) + " must be positive");
  }
}

}  // namespace detail

/// Grouped 3D convolution. Kernel and stride are (t, h, w).
inline LayerCost conv3d_cost(const TensorShape& in, std::int64_t c_out, std::array<int, 3> kernel,
                             std::array<int, 3> stride, std::int64_t groups = 1) {
  detail::check_shape(in);
  if (c_out <= 0 || groups <= 0) throw ValidationError("conv needs positive output channels and groups");
  if (in.c % groups != 0 || c_out % groups != 0) {
    throw ValidationError("conv channels " + std::to_string(in.c) + "->" + std::to_string(c_out) +
                          " not divisible by groups " + std::to_string(groups));
  }
  for (int i = 0; i < 3; ++i) {
    if (kernel[i] <= 0 || stride[i] <= 0) throw ValidationError("conv kernel and stride must be positive");
  }
  LayerCost cost;
  cost.out = {c_out, detail::ceil_div(in.t, stride[0]), detail::ceil_div(in.h, stride[1]),
              detail::ceil_div(in.w, stride[2])};
  const BigInt per_output = BigInt(in.c / groups) * kernel[0] * kernel[1] * kernel[2];
  cost.params = per_output * c_out;
  cost.flops = cost.params * cost.out.t * cost.out.h * cost.out.w;
  return cost;
}

/// Nearest multiple of `divisor` (halves round up), never below `divisor`.
inline std::int64_t round_to_multiple(const Rational& value, std::int64_t divisor = 8) {
  const Rational q = value / divisor + Rational(1, 2);
  std::int64_t m = q.numerator() / q.denominator();  // floor for positive q
  return std::max<std::int64_t>(divisor, m * divisor);
}

/// Expanded width of an MBConv3D block: e * C_in rounded to a multiple of 8.
inline std::int64_t expanded_channels(std::int64_t c_in, const Rational& e) {
  return round_to_multiple(e * c_in, 8);
}

/// MBConv3D: pointwise expand, depthwise t x k x k (spatial stride on the
/// depthwise conv), pointwise project.
inline LayerCost mbconv3d_cost(const TensorShape& in, const BlockChoice& choice, int stride) {
  if (stride != 1 && stride != 2) throw ValidationError("MBConv3D stride must be 1 or 2");
  if (choice.e <= 0) throw ValidationError("expansion rate must be positive");
  const std::int64_t c_exp = expanded_channels(in.c, choice.e);
  const LayerCost expand = conv3d_cost(in, c_exp, {1, 1, 1}, {1, 1, 1});
  const LayerCost depthwise = conv3d_cost(expand.out, c_exp, {choice.t, choice.k, choice.k}, {1, stride, stride}, c_exp);
  const LayerCost project = conv3d_cost(depthwise.out, choice.c_out, {1, 1, 1}, {1, 1, 1});
  return {expand.flops + depthwise.flops + project.flops, expand.params + depthwise.params + project.params,
          project.out};
}

/// Dense-to-sparse lateral connection; the result is the concatenated
/// sparse-stream tensor.
inline LayerCost fusion_cost(const TensorShape& sparse_in, const TensorShape& dense_in, const FusionOp& op) {
  detail::check_shape(sparse_in);
  detail::check_shape(dense_in);
  if (dense_in.t % sparse_in.t != 0) {
    throw ValidationError("dense frames " + std::to_string(dense_in.t) + " not a multiple of sparse frames " +
                          std::to_string(sparse_in.t));
  }
  if (dense_in.h != sparse_in.h || dense_in.w != sparse_in.w) {
    throw ValidationError("fusion needs equal spatial sizes, got " + describe(sparse_in) + " and " +
                          describe(dense_in));
  }
  const int stride = static_cast<int>(dense_in.t / sparse_in.t);
  switch (op.kind) {
    case FusionKind::kNone: return {0, 0, sparse_in};
    case FusionKind::kTimeStridedSample: {
      TensorShape out = sparse_in;
      out.c += dense_in.c;
      return {0, 0, out};
    }
    case FusionKind::kTimeStridedConv: {
      if (op.temporal_kernel <= 0 || op.channel_multiplier <= 0) {
        throw ValidationError("time-strided conv needs positive kernel and multiplier");
      }
      LayerCost conv = conv3d_cost(dense_in, op.channel_multiplier * dense_in.c, {op.temporal_kernel, 1, 1},
                                   {stride, 1, 1});
      if (conv.out.t != sparse_in.t) throw ValidationError("time-strided conv output frames mismatch");
      TensorShape out = sparse_in;
      out.c += conv.out.c;
      return {conv.flops, conv.params, out};
    }
  }
  throw ValidationError("unknown fusion op");
}

/// Internal widths of a global-reasoning block as fractions of C.
struct GloReConfig {
  Rational mid_ratio{1, 4};
  Rational node_ratio{1, 4};

  bool operator==(const GloReConfig&) const = default;
};

/// C * ratio when exact, otherwise padded up to a multiple of 8.
inline std::int64_t glore_width(std::int64_t c, const Rational& ratio) {
  const Rational v = ratio * c;
  if (v.denominator() == 1 && v.numerator() > 0) return v.numerator();
  const std::int64_t ceil = (v.numerator() + v.denominator() - 1) / v.denominator();
  return std::max<std::int64_t>(8, (ceil + 7) / 8 * 8);
}

/// Global-reasoning block over L = T*H*W positions with C_mid state channels
/// and N graph nodes:
///   reduce      L*C*C_mid
///   projection  L*C*N (projection conv) + L*N*C_mid (aggregation into nodes)
///   graph       N*N*C_mid + N*C_mid*C_mid
///   reverse     L*N*C_mid
///   expand      L*C_mid*C
/// The block is residual, so the output shape equals the input.
inline LayerCost glore_cost(const TensorShape& in, const GloReConfig& config = {}) {
  detail::check_shape(in);
  const BigInt c = in.c;
  const BigInt mid = glore_width(in.c, config.mid_ratio);
  const BigInt nodes = glore_width(in.c, config.node_ratio);
  const BigInt positions = BigInt(in.t) * in.h * in.w;
  LayerCost cost;
  cost.flops = positions * c * mid + positions * c * nodes + positions * nodes * mid +
               (nodes * nodes * mid + nodes * mid * mid) + positions * nodes * mid + positions * mid * c;
  cost.params = c * mid + c * nodes + nodes * nodes + mid * mid + mid * c;
  cost.out = in;
  return cost;
}

// ---------------------------------------------------------------------------
// Whole architectures

struct CostOptions {
  GloReConfig glore;
  int num_classes = 400;
  int head_width = 2048;
};

/// Which part of the model is costed.
enum class CostScope {
  kWholeModel,
  /// Sparse stream stand-alone: no dense stream, no fusion, head over
  /// sparse features only.
  kSparseOnly,
};

struct BlockCost {
  std::string id;
  std::string stream;  // sparse | dense | fusion | head
  int stage = 0;
  BigInt flops = 0;
  BigInt params = 0;
  TensorShape in;
  TensorShape out;
};

struct CostReport {
  BigInt flops = 0;  // per view
  BigInt params = 0;
  std::vector<BlockCost> breakdown;
  int views = 1;
  BigInt total_flops = 0;

  BigInt flops_of(const std::string& stream) const {
    BigInt sum = 0;
    for (const auto& b : breakdown) {
      if (b.stream == stream) sum += b.flops;
    }
    return sum;
  }

  /// Share of per-view FLOPs spent in sparse-stream blocks.
  double sparse_fraction() const {
    return flops == 0 ? 0.0 : to_double(flops_of("sparse")) / to_double(flops);
  }
};

namespace detail {

inline std::string block_id(StreamId s, std::size_t g, const std::string& suffix) {
  return std::string(to_string(s)) + ".g" + (g < 10 ? "0" : "") + std::to_string(g) + "." + suffix;
}

struct CostAccumulator {
  CostReport report;

  void add(std::string id, std::string stream, int stage, const TensorShape& in, const LayerCost& c) {
    report.flops += c.flops;
    report.params += c.params;
    report.breakdown.push_back({std::move(id), std::move(stream), stage, c.flops, c.params, in, c.out});
  }
};

inline TensorShape run_stem(CostAccumulator& acc, const StreamSpec& stream, int spatial) {
  TensorShape x{3, stream.frames, spatial, spatial};
  for (std::size_t i = 0; i < stream.stem.size(); ++i) {
    const auto& d = stream.stem[i];
    const std::int64_t groups = d.depthwise ? x.c : 1;
    if (d.depthwise && d.out_channels != x.c) {
      throw ValidationError("depthwise stem conv must keep the channel count");
    }
    const LayerCost c = conv3d_cost(x, d.out_channels, d.kernel, d.stride, groups);
    acc.add(std::string(to_string(stream.id)) + ".stem." + std::to_string(i), to_string(stream.id), 0, x, c);
    x = c.out;
  }
  return x;
}

inline TensorShape run_group(CostAccumulator& acc, const StreamSpec& stream, std::size_t g,
                             const BlockChoice& choice, TensorShape x) {
  const auto& spec = stream.groups[g];
  for (int b = 0; b < spec.repeats; ++b) {
    const LayerCost c = mbconv3d_cost(x, choice, b == 0 ? spec.spatial_stride : 1);
    acc.add(block_id(stream.id, g, "b" + std::to_string(b)), to_string(stream.id), spec.stage, x, c);
    x = c.out;
  }
  return x;
}

inline bool attention_on(const SearchSpaceSpec& space, const ArchitectureSample& arch, StreamId s, std::size_t g) {
  const int i = static_cast<int>(s);
  const auto& locs = space.attention_locations[i];
  for (std::size_t l = 0; l < locs.size(); ++l) {
    if (static_cast<std::size_t>(locs[l]) == g) return arch.attention[i][l];
  }
  return false;
}

}  // namespace detail

/// Threads shapes through stems, every block group, attention and fusion at
/// the configured group ends, and the classifier head. Per-view FLOPs times
/// `views` gives total_flops.
inline CostReport architecture_cost(const SearchSpaceSpec& space, const ArchitectureSample& arch,
                                    int input_spatial, int views = 1, CostScope scope = CostScope::kWholeModel,
                                    const CostOptions& options = {}) {
  if (input_spatial <= 0) throw ValidationError("input spatial size must be positive");
  if (views <= 0) throw ValidationError("views must be positive");
  if (const auto violations = validate(space, arch); !violations.empty()) {
    throw ValidationError("invalid architecture: " + violations.front().variable + ": " +
                          violations.front().message);
  }
  const bool two_stream = scope == CostScope::kWholeModel;
  detail::CostAccumulator acc;
  TensorShape sparse = detail::run_stem(acc, space.sparse, input_spatial);
  TensorShape dense;
  if (two_stream) dense = detail::run_stem(acc, space.dense, input_spatial);

  const std::size_t groups = std::max(space.sparse.groups.size(), two_stream ? space.dense.groups.size() : 0);
  for (std::size_t g = 0; g < groups; ++g) {
    if (g < space.sparse.groups.size()) {
      sparse = detail::run_group(acc, space.sparse, g, arch.stream(StreamId::kSparse)[g], sparse);
    }
    if (two_stream && g < space.dense.groups.size()) {
      dense = detail::run_group(acc, space.dense, g, arch.stream(StreamId::kDense)[g], dense);
    }
    if (g < space.sparse.groups.size() && detail::attention_on(space, arch, StreamId::kSparse, g)) {
      acc.add(detail::block_id(StreamId::kSparse, g, "glore"), "sparse", space.sparse.groups[g].stage, sparse,
              glore_cost(sparse, options.glore));
    }
    if (two_stream && g < space.dense.groups.size() && detail::attention_on(space, arch, StreamId::kDense, g)) {
      acc.add(detail::block_id(StreamId::kDense, g, "glore"), "dense", space.dense.groups[g].stage, dense,
              glore_cost(dense, options.glore));
    }
    if (!two_stream) continue;
    for (std::size_t l = 0; l < space.fusion_locations.size(); ++l) {
      if (static_cast<std::size_t>(space.fusion_locations[l]) != g) continue;
      const FusionOp& op = arch.fusion[l];
      if (op.kind == FusionKind::kNone) continue;
      const LayerCost c = fusion_cost(sparse, dense, op);
      acc.add(std::string("fusion.l") + (l < 10 ? "0" : "") + std::to_string(l), "fusion",
              space.sparse.groups[g].stage, sparse, c);
      sparse = c.out;
    }
  }

  // Head: global average pool per stream, concat, projection, classifier.
  const std::int64_t pooled = sparse.c + (two_stream ? dense.c : 0);
  const TensorShape head_in{pooled, 1, 1, 1};
  const LayerCost proj = conv3d_cost(head_in, options.head_width, {1, 1, 1}, {1, 1, 1});
  acc.add("head.proj", "head", 5, head_in, proj);
  const LayerCost fc = conv3d_cost(proj.out, options.num_classes, {1, 1, 1}, {1, 1, 1});
  acc.add("head.fc", "head", 5, proj.out, fc);

  CostReport report = std::move(acc.report);
  report.views = views;
  report.total_flops = report.flops * views;
  return report;
}

// ---------------------------------------------------------------------------
// Manual two-stream baselines

struct ManualDesign {
  ArchitectureSample arch;
  CostReport report;
  double sparse_fraction = 0.0;
  double sparse_multiplier = 0.0;
  double dense_multiplier = 0.0;
  Rational sparse_expansion{0};
  Rational dense_expansion{0};
  /// True when both the total and the share land inside their tolerances.
  bool within_tolerance = false;
};

/// Tolerances a manual design is matched against.
struct ManualTolerance {
  double total_relative = 0.05;
  double fraction_absolute = 0.02;
};

namespace detail {

/// Grid point at relative position `m` in [0, 1] of a range, nearest snap.
inline Rational scaled_choice(const ChoiceRange& r, double m) {
  const std::size_t n = r.count();
  const auto idx = static_cast<std::size_t>(std::llround(m * static_cast<double>(n - 1)));
  return r.at(std::min(idx, n - 1));
}

/// Distinct snapped channel vectors as the multiplier sweeps [0, 1], with
/// the smallest multiplier producing each.
inline std::vector<std::pair<double, std::vector<std::int64_t>>> channel_ladder(const StreamSpec& s) {
  std::vector<std::pair<double, std::vector<std::int64_t>>> out;
  constexpr int kSteps = 4096;
  for (int i = 0; i <= kSteps; ++i) {
    const double m = static_cast<double>(i) / kSteps;
    std::vector<std::int64_t> ch;
    for (const auto& g : s.groups) ch.push_back(scaled_choice(g.channels, m).numerator());
    if (out.empty() || out.back().second != ch) out.emplace_back(m, std::move(ch));
  }
  return out;
}

/// Positions in [0, 1] of the expansion grid (taken from the widest group
/// grid) and the position of its middle entry.
inline std::vector<double> expansion_positions(const StreamSpec& s) {
  std::size_t n = 1;
  for (const auto& g : s.groups) n = std::max(n, g.expansion.count());
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(n == 1 ? 0.0 : static_cast<double>(i) / (n - 1));
  return out;
}

}  // namespace detail

/// Uniform hand-style two-stream design: t = k = 3 everywhere, time-strided
/// conv fusion at stage ends only, no attention, and per stream a single
/// channel multiplier and a single expansion grid position shared by all
/// groups. Every snapped combination is costed; among those inside the
/// tolerances the one whose expansion is closest to mid-grid wins, otherwise
/// the closest miss is returned with within_tolerance = false.
inline ManualDesign manual_tsnet(const SearchSpaceSpec& space, const BigInt& target_flops, const Rational& sparse_ratio,
                                 int input_spatial, const CostOptions& options = {},
                                 const ManualTolerance& tolerance = {}) {
  if (sparse_ratio <= 0 || sparse_ratio >= 1) throw UsageError("sparse FLOPs ratio must lie strictly in (0, 1)");
  if (target_flops <= 0) throw UsageError("FLOPs target must be positive");

  ArchitectureSample base = first_choice_architecture(space);
  for (StreamId s : {StreamId::kSparse, StreamId::kDense}) {
    for (BlockChoice& b : base.stream(s)) {
      b.t = 3;
      b.k = 3;
    }
  }
  const auto stage_ends = stage_end_groups(space.sparse);
  for (std::size_t l = 0; l < space.fusion_locations.size(); ++l) {
    const bool at_end =
        std::find(stage_ends.begin(), stage_ends.end(), space.fusion_locations[l]) != stage_ends.end();
    base.fusion[l] = at_end ? FusionOp::conv() : FusionOp::none();
  }
  for (auto& bits : base.attention) std::fill(bits.begin(), bits.end(), false);

  const auto sparse_ladder = detail::channel_ladder(space.sparse);
  const auto dense_ladder = detail::channel_ladder(space.dense);
  const auto sparse_e = detail::expansion_positions(space.sparse);
  const auto dense_e = detail::expansion_positions(space.dense);

  auto build = [&](const std::vector<std::int64_t>& sc, double se, const std::vector<std::int64_t>& dc, double de) {
    ArchitectureSample a = base;
    for (std::size_t g = 0; g < sc.size(); ++g) {
      a.stream(StreamId::kSparse)[g].c_out = sc[g];
      a.stream(StreamId::kSparse)[g].e = detail::scaled_choice(space.sparse.groups[g].expansion, se);
    }
    for (std::size_t g = 0; g < dc.size(); ++g) {
      a.stream(StreamId::kDense)[g].c_out = dc[g];
      a.stream(StreamId::kDense)[g].e = detail::scaled_choice(space.dense.groups[g].expansion, de);
    }
    return a;
  };
  {
    const ArchitectureSample probe = build(sparse_ladder.front().second, 0.0, dense_ladder.front().second, 0.0);
    if (const auto v = validate(space, probe); !v.empty()) {
      throw ValidationError("space cannot express the uniform design: " + v.front().variable + ": " +
                            v.front().message);
    }
  }
  auto cost_of = [&](const ArchitectureSample& a) {
    return architecture_cost(space, a, input_spatial, 1, CostScope::kWholeModel, options);
  };
  const BigInt lo = cost_of(build(sparse_ladder.front().second, 0.0, dense_ladder.front().second, 0.0)).flops;
  const BigInt hi = cost_of(build(sparse_ladder.back().second, 1.0, dense_ladder.back().second, 1.0)).flops;
  if (target_flops < lo || target_flops > hi) {
    throw InfeasibleError("FLOPs target " + to_string(target_flops) + " is outside the reachable interval [" +
                          to_string(lo) + ", " + to_string(hi) + "]");
  }

  const double target = to_double(target_flops);
  const double ratio = to_double(sparse_ratio);
  // Errors are normalized so that 1.0 sits exactly on a tolerance edge.
  struct Rank {
    bool outside;
    double mid_distance;
    double err;
    auto operator<=>(const Rank&) const = default;
  };
  ManualDesign best;
  std::optional<Rank> best_rank;
  for (double se : sparse_e) {
    for (double de : dense_e) {
      const double mid_distance = std::abs(se - 0.5) + std::abs(de - 0.5);
      for (const auto& [ms, sc] : sparse_ladder) {
        for (const auto& [md, dc] : dense_ladder) {
          ArchitectureSample a = build(sc, se, dc, de);
          CostReport r = cost_of(a);
          const double total_err = std::abs(to_double(r.flops) - target) / (tolerance.total_relative * target);
          const double share_err = std::abs(r.sparse_fraction() - ratio) / tolerance.fraction_absolute;
          const double err = std::max(total_err, share_err);
          const bool outside = err > 1.0;
          const Rank rank{outside, outside ? 0.0 : mid_distance, err};
          if (!best_rank || rank < *best_rank) {
            best_rank = rank;
            best.sparse_fraction = r.sparse_fraction();
            best.sparse_multiplier = ms;
            best.dense_multiplier = md;
            best.sparse_expansion = a.stream(StreamId::kSparse).front().e;
            best.dense_expansion = a.stream(StreamId::kDense).front().e;
            best.within_tolerance = !outside;
            best.arch = std::move(a);
            best.report = std::move(r);
          }
        }
      }
    }
  }
  return best;
}

}  // namespace tsnas
