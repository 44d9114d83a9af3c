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

// Canonical file formats.
//
// All JSON is emitted through nlohmann::json with std::map objects, so keys
// come out sorted and a dump() of equal values is byte-identical. Rationals
// are {"num": n, "den": d}; big integers (FLOPs, params, cardinalities) are
// decimal strings.

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "tsnas/cost_model.hpp"
#include "tsnas/sampler.hpp"
#include "tsnas/search_space.hpp"

namespace tsnas {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// A document that does not match its schema; `path` is a JSON pointer.
class SchemaError : public ValidationError {
 public:
  SchemaError(const std::string& path, const std::string& what)
      : ValidationError((path.empty() ? std::string("/") : path) + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// ---------------------------------------------------------------------------
// Low-level helpers

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

/// Fixed formatting for doubles in CSV: shortest round-trip-safe %.17g.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json parse_json(const std::string& text, const std::string& what = "document") {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError("", "malformed " + what + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
  if (!out) throw UsageError("failed writing '" + path + "'");
}

namespace io_detail {

inline const Json& field(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "/" + key, "missing field");
  return *it;
}

inline std::int64_t as_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<std::int64_t>();
}

inline std::uint64_t as_uint(const Json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    throw SchemaError(path, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

inline double as_double(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

inline bool as_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaError(path, "expected a boolean");
  return j.get<bool>();
}

inline std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

inline const Json& as_array(const Json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  return j;
}

inline BigInt as_bigint(const Json& j, const std::string& path) {
  if (j.is_number_integer()) return BigInt(j.get<std::int64_t>());
  const std::string s = as_string(j, path);
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw SchemaError(path, "expected a decimal integer string");
  }
  return BigInt(s);
}

inline std::string idx_path(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

template <typename F>
auto guarded(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const ValidationError& e) {
    throw SchemaError(path, e.what());
  }
}

}  // namespace io_detail

inline Json rational_to_json(const Rational& r) { return Json{{"num", r.numerator()}, {"den", r.denominator()}}; }

inline Rational rational_from_json(const Json& j, const std::string& path) {
  using namespace io_detail;
  const std::int64_t num = as_int(field(j, "num", path), path + "/num");
  const std::int64_t den = as_int(field(j, "den", path), path + "/den");
  if (den <= 0) throw SchemaError(path + "/den", "denominator must be positive");
  return Rational(num, den);
}

inline Json fusion_op_to_json(const FusionOp& op) {
  Json j{{"kind", to_string(op.kind)}};
  if (op.kind == FusionKind::kTimeStridedConv) {
    j["temporal_kernel"] = op.temporal_kernel;
    j["channel_multiplier"] = op.channel_multiplier;
  }
  return j;
}

inline FusionOp fusion_op_from_json(const Json& j, const std::string& path) {
  using namespace io_detail;
  const FusionKind kind =
      guarded(path + "/kind", [&] { return parse_fusion_kind(as_string(field(j, "kind", path), path + "/kind")); });
  switch (kind) {
    case FusionKind::kNone: return FusionOp::none();
    case FusionKind::kTimeStridedSample: return FusionOp::sample();
    case FusionKind::kTimeStridedConv:
      return FusionOp::conv(
          static_cast<int>(as_int(field(j, "temporal_kernel", path), path + "/temporal_kernel")),
          static_cast<int>(as_int(field(j, "channel_multiplier", path), path + "/channel_multiplier")));
  }
  throw SchemaError(path, "unknown fusion op");
}

// ---------------------------------------------------------------------------
// Search space

inline Json range_to_json(const ChoiceRange& r) {
  return Json{{"min", rational_to_json(r.min())}, {"max", rational_to_json(r.max())}, {"step", rational_to_json(r.step())}};
}

inline ChoiceRange range_from_json(const Json& j, const std::string& path) {
  using namespace io_detail;
  const Rational lo = rational_from_json(field(j, "min", path), path + "/min");
  const Rational hi = rational_from_json(field(j, "max", path), path + "/max");
  const Rational step = rational_from_json(field(j, "step", path), path + "/step");
  return guarded(path, [&] { return ChoiceRange(lo, hi, step); });
}

inline Json stream_to_json(const StreamSpec& s) {
  Json stem = Json::array();
  for (const auto& c : s.stem) {
    stem.push_back(Json{{"out_channels", c.out_channels},
                        {"kernel", c.kernel},
                        {"stride", c.stride},
                        {"depthwise", c.depthwise}});
  }
  Json groups = Json::array();
  for (const auto& g : s.groups) {
    groups.push_back(Json{{"stage", g.stage},
                          {"repeats", g.repeats},
                          {"spatial_stride", g.spatial_stride},
                          {"channels", range_to_json(g.channels)},
                          {"expansion", range_to_json(g.expansion)},
                          {"temporal_kernels", g.temporal_kernels},
                          {"spatial_kernels", g.spatial_kernels}});
  }
  return Json{{"frames", s.frames}, {"input_spatial", s.input_spatial}, {"stem", stem}, {"groups", groups}};
}

inline StreamSpec stream_from_json(const Json& j, StreamId id, const std::string& path) {
  using namespace io_detail;
  StreamSpec s;
  s.id = id;
  s.frames = static_cast<int>(as_int(field(j, "frames", path), path + "/frames"));
  s.input_spatial = static_cast<int>(as_int(field(j, "input_spatial", path), path + "/input_spatial"));
  const auto& stem = as_array(field(j, "stem", path), path + "/stem");
  for (std::size_t i = 0; i < stem.size(); ++i) {
    const std::string p = idx_path(path + "/stem", i);
    ConvDescriptor c;
    c.out_channels = static_cast<int>(as_int(field(stem[i], "out_channels", p), p + "/out_channels"));
    for (const char* key : {"kernel", "stride"}) {
      const auto& arr = as_array(field(stem[i], key, p), p + "/" + key);
      if (arr.size() != 3) throw SchemaError(p + "/" + key, "expected three entries");
      auto& dst = std::string(key) == "kernel" ? c.kernel : c.stride;
      for (int a = 0; a < 3; ++a) dst[a] = static_cast<int>(as_int(arr[a], idx_path(p + "/" + key, a)));
    }
    c.depthwise = as_bool(field(stem[i], "depthwise", p), p + "/depthwise");
    s.stem.push_back(c);
  }
  const auto& groups = as_array(field(j, "groups", path), path + "/groups");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const std::string p = idx_path(path + "/groups", i);
    const Json& gj = groups[i];
    BlockGroupSpec g;
    g.stage = static_cast<int>(as_int(field(gj, "stage", p), p + "/stage"));
    g.repeats = static_cast<int>(as_int(field(gj, "repeats", p), p + "/repeats"));
    g.spatial_stride = static_cast<int>(as_int(field(gj, "spatial_stride", p), p + "/spatial_stride"));
    g.channels = range_from_json(field(gj, "channels", p), p + "/channels");
    g.expansion = range_from_json(field(gj, "expansion", p), p + "/expansion");
    for (const char* key : {"temporal_kernels", "spatial_kernels"}) {
      auto& dst = std::string(key) == "temporal_kernels" ? g.temporal_kernels : g.spatial_kernels;
      dst.clear();
      const auto& arr = as_array(field(gj, key, p), p + "/" + key);
      for (std::size_t a = 0; a < arr.size(); ++a) {
        dst.push_back(static_cast<int>(as_int(arr[a], idx_path(p + "/" + key, a))));
      }
    }
    s.groups.push_back(std::move(g));
  }
  return s;
}

inline Json space_to_json(const SearchSpaceSpec& space) {
  Json fusion_domains = Json::array();
  for (const auto& dom : space.fusion_domains) {
    Json d = Json::array();
    for (const auto& op : dom) d.push_back(fusion_op_to_json(op));
    fusion_domains.push_back(d);
  }
  Json attention = Json::object();
  for (StreamId s : {StreamId::kSparse, StreamId::kDense}) {
    const int i = static_cast<int>(s);
    Json doms = Json::array();
    for (const auto& dom : space.attention_domains[i]) {
      Json d = Json::array();
      for (bool b : dom) d.push_back(b);
      doms.push_back(d);
    }
    attention[to_string(s)] = Json{{"locations", space.attention_locations[i]}, {"domains", doms}};
  }
  return Json{{"schema_version", kSchemaVersion},
              {"sparse", stream_to_json(space.sparse)},
              {"dense", stream_to_json(space.dense)},
              {"fusion", Json{{"locations", space.fusion_locations}, {"domains", fusion_domains}}},
              {"attention", attention}};
}

inline SearchSpaceSpec space_from_json(const Json& j) {
  using namespace io_detail;
  if (as_int(field(j, "schema_version", ""), "/schema_version") != kSchemaVersion) {
    throw SchemaError("/schema_version", "unsupported schema version");
  }
  SearchSpaceSpec space;
  space.sparse = stream_from_json(field(j, "sparse", ""), StreamId::kSparse, "/sparse");
  space.dense = stream_from_json(field(j, "dense", ""), StreamId::kDense, "/dense");
  const Json& fusion = field(j, "fusion", "");
  const auto& locs = as_array(field(fusion, "locations", "/fusion"), "/fusion/locations");
  for (std::size_t i = 0; i < locs.size(); ++i) {
    space.fusion_locations.push_back(static_cast<int>(as_int(locs[i], idx_path("/fusion/locations", i))));
  }
  const auto& doms = as_array(field(fusion, "domains", "/fusion"), "/fusion/domains");
  for (std::size_t i = 0; i < doms.size(); ++i) {
    const std::string p = idx_path("/fusion/domains", i);
    std::vector<FusionOp> dom;
    const auto& arr = as_array(doms[i], p);
    for (std::size_t a = 0; a < arr.size(); ++a) dom.push_back(fusion_op_from_json(arr[a], idx_path(p, a)));
    space.fusion_domains.push_back(std::move(dom));
  }
  const Json& att = field(j, "attention", "");
  for (StreamId s : {StreamId::kSparse, StreamId::kDense}) {
    const int si = static_cast<int>(s);
    const std::string p = std::string("/attention/") + to_string(s);
    const Json& sj = field(att, to_string(s), "/attention");
    const auto& l = as_array(field(sj, "locations", p), p + "/locations");
    for (std::size_t i = 0; i < l.size(); ++i) {
      space.attention_locations[si].push_back(static_cast<int>(as_int(l[i], idx_path(p + "/locations", i))));
    }
    const auto& d = as_array(field(sj, "domains", p), p + "/domains");
    for (std::size_t i = 0; i < d.size(); ++i) {
      std::vector<bool> dom;
      const auto& arr = as_array(d[i], idx_path(p + "/domains", i));
      for (std::size_t a = 0; a < arr.size(); ++a) dom.push_back(as_bool(arr[a], idx_path(idx_path(p + "/domains", i), a)));
      space.attention_domains[si].push_back(std::move(dom));
    }
  }
  guarded("", [&] {
    check_space(space);
    return 0;
  });
  return space;
}

/// Canonical serialized form; equal spaces give identical strings.
inline std::string canonical_space_json(const SearchSpaceSpec& space) { return space_to_json(space).dump(); }

inline std::string space_fingerprint(const SearchSpaceSpec& space) { return sha256_hex(canonical_space_json(space)); }

// ---------------------------------------------------------------------------
// Architecture documents

/// Scope of an architecture document. Sparse-only documents describe the
/// sparse stream stand-alone and omit dense groups, fusion and dense
/// attention.
enum class DocumentScope { kTwoStream, kSparseOnly };

/// Choice records only; the basis of architecture hashes.
inline Json architecture_choices_json(const SearchSpaceSpec& space, const ArchitectureSample& arch,
                                      DocumentScope scope = DocumentScope::kTwoStream) {
  Json groups = Json::array();
  for (StreamId s : {StreamId::kSparse, StreamId::kDense}) {
    if (scope == DocumentScope::kSparseOnly && s == StreamId::kDense) continue;
    const auto& choices = arch.stream(s);
    for (std::size_t g = 0; g < choices.size(); ++g) {
      const auto& b = choices[g];
      groups.push_back(Json{{"stream", to_string(s)},
                            {"stage", g < space.stream(s).groups.size() ? space.stream(s).groups[g].stage : 0},
                            {"group", g},
                            {"t", b.t},
                            {"k", b.k},
                            {"c_out", b.c_out},
                            {"e", rational_to_json(b.e)}});
    }
  }
  Json fusion = Json::array();
  if (scope == DocumentScope::kTwoStream) {
    for (std::size_t l = 0; l < arch.fusion.size(); ++l) {
      fusion.push_back(Json{{"location", l},
                            {"group", l < space.fusion_locations.size() ? space.fusion_locations[l] : -1},
                            {"op", fusion_op_to_json(arch.fusion[l])}});
    }
  }
  Json attention = Json::array();
  for (StreamId s : {StreamId::kSparse, StreamId::kDense}) {
    if (scope == DocumentScope::kSparseOnly && s == StreamId::kDense) continue;
    const int si = static_cast<int>(s);
    for (std::size_t l = 0; l < arch.attention[si].size(); ++l) {
      attention.push_back(Json{{"stream", to_string(s)},
                               {"location", l},
                               {"group", l < space.attention_locations[si].size() ? space.attention_locations[si][l] : -1},
                               {"on", static_cast<bool>(arch.attention[si][l])}});
    }
  }
  return Json{{"groups", groups}, {"fusion", fusion}, {"attention", attention}};
}

/// Stable content hash of an architecture (two-stream choice records).
inline std::string architecture_hash(const SearchSpaceSpec& space, const ArchitectureSample& arch) {
  return sha256_hex(architecture_choices_json(space, arch).dump());
}

struct CostSummary {
  int input_spatial = 160;
  BigInt flops_per_view = 0;
  BigInt params = 0;
  double sparse_fraction = 0.0;
};

inline CostSummary summarize(const CostReport& r, int input_spatial) {
  return {input_spatial, r.flops, r.params, r.sparse_fraction()};
}

inline Json architecture_document(const SearchSpaceSpec& space, const ArchitectureSample& arch,
                                  DocumentScope scope = DocumentScope::kTwoStream,
                                  const std::optional<CostSummary>& cost = std::nullopt) {
  Json doc = architecture_choices_json(space, arch, scope);
  doc["schema_version"] = kSchemaVersion;
  doc["space_fingerprint"] = space_fingerprint(space);
  doc["scope"] = scope == DocumentScope::kTwoStream ? "two_stream" : "sparse_only";
  if (cost) {
    doc["cost"] = Json{{"input_spatial", cost->input_spatial},
                       {"flops_per_view", to_string(cost->flops_per_view)},
                       {"gflops_per_view", to_double(cost->flops_per_view) / 1e9},
                       {"params", to_string(cost->params)},
                       {"sparse_fraction", cost->sparse_fraction}};
  }
  return doc;
}

/// Parses a document against `space`. Sparse-only documents fill the
/// omitted variables with first choices.
inline ArchitectureSample architecture_from_document(const SearchSpaceSpec& space, const Json& doc,
                                                     bool check_fingerprint = true) {
  using namespace io_detail;
  if (as_int(field(doc, "schema_version", ""), "/schema_version") != kSchemaVersion) {
    throw SchemaError("/schema_version", "unsupported schema version");
  }
  if (check_fingerprint) {
    const std::string fp = as_string(field(doc, "space_fingerprint", ""), "/space_fingerprint");
    if (fp != space_fingerprint(space)) {
      throw SchemaError("/space_fingerprint", "document was written for a different search space");
    }
  }
  DocumentScope scope = DocumentScope::kTwoStream;
  if (doc.contains("scope")) {
    const std::string s = as_string(doc["scope"], "/scope");
    if (s == "sparse_only") scope = DocumentScope::kSparseOnly;
    else if (s != "two_stream") throw SchemaError("/scope", "expected two_stream or sparse_only");
  }
  ArchitectureSample arch = first_choice_architecture(space);
  std::array<std::vector<bool>, 2> seen_groups{std::vector<bool>(space.sparse.groups.size()),
                                               std::vector<bool>(space.dense.groups.size())};
  const auto& groups = as_array(field(doc, "groups", ""), "/groups");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const std::string p = idx_path("/groups", i);
    const Json& gj = groups[i];
    const std::string sname = as_string(field(gj, "stream", p), p + "/stream");
    if (sname != "sparse" && sname != "dense") throw SchemaError(p + "/stream", "expected sparse or dense");
    const StreamId s = sname == "sparse" ? StreamId::kSparse : StreamId::kDense;
    const auto g = as_uint(field(gj, "group", p), p + "/group");
    if (g >= space.stream(s).groups.size()) throw SchemaError(p + "/group", "group index out of range");
    if (seen_groups[static_cast<int>(s)][g]) throw SchemaError(p + "/group", "duplicate group record");
    seen_groups[static_cast<int>(s)][g] = true;
    BlockChoice& b = arch.stream(s)[g];
    b.t = static_cast<int>(as_int(field(gj, "t", p), p + "/t"));
    b.k = static_cast<int>(as_int(field(gj, "k", p), p + "/k"));
    b.c_out = as_int(field(gj, "c_out", p), p + "/c_out");
    b.e = rational_from_json(field(gj, "e", p), p + "/e");
  }
  for (StreamId s : {StreamId::kSparse, StreamId::kDense}) {
    if (scope == DocumentScope::kSparseOnly && s == StreamId::kDense) continue;
    const auto& seen = seen_groups[static_cast<int>(s)];
    for (std::size_t g = 0; g < seen.size(); ++g) {
      if (!seen[g]) throw SchemaError("/groups", std::string("missing ") + to_string(s) + " group " + std::to_string(g));
    }
  }
  if (scope == DocumentScope::kTwoStream) {
    const auto& fusion = as_array(field(doc, "fusion", ""), "/fusion");
    if (fusion.size() != space.fusion_locations.size()) {
      throw SchemaError("/fusion", "expected " + std::to_string(space.fusion_locations.size()) + " fusion records");
    }
    std::vector<bool> seen(fusion.size());
    for (std::size_t i = 0; i < fusion.size(); ++i) {
      const std::string p = idx_path("/fusion", i);
      const auto l = as_uint(field(fusion[i], "location", p), p + "/location");
      if (l >= seen.size() || seen[l]) throw SchemaError(p + "/location", "bad or duplicate location");
      seen[l] = true;
      arch.fusion[l] = fusion_op_from_json(field(fusion[i], "op", p), p + "/op");
    }
  }
  const auto& attention = as_array(field(doc, "attention", ""), "/attention");
  std::array<std::vector<bool>, 2> seen_att{std::vector<bool>(space.attention_locations[0].size()),
                                            std::vector<bool>(space.attention_locations[1].size())};
  for (std::size_t i = 0; i < attention.size(); ++i) {
    const std::string p = idx_path("/attention", i);
    const std::string sname = as_string(field(attention[i], "stream", p), p + "/stream");
    if (sname != "sparse" && sname != "dense") throw SchemaError(p + "/stream", "expected sparse or dense");
    const int si = sname == "sparse" ? 0 : 1;
    const auto l = as_uint(field(attention[i], "location", p), p + "/location");
    if (l >= seen_att[si].size() || seen_att[si][l]) throw SchemaError(p + "/location", "bad or duplicate location");
    seen_att[si][l] = true;
    arch.attention[si][l] = as_bool(field(attention[i], "on", p), p + "/on");
  }
  for (int si = 0; si < 2; ++si) {
    if (scope == DocumentScope::kSparseOnly && si == 1) continue;
    for (std::size_t l = 0; l < seen_att[si].size(); ++l) {
      if (!seen_att[si][l]) throw SchemaError("/attention", "missing attention record " + std::to_string(l));
    }
  }
  if (const auto v = validate(space, arch); !v.empty()) {
    throw SchemaError("/" + v.front().variable, v.front().message);
  }
  return arch;
}

// ---------------------------------------------------------------------------
// Cost reports

inline Json cost_report_to_json(const CostReport& r, int input_spatial) {
  Json blocks = Json::array();
  for (const auto& b : r.breakdown) {
    blocks.push_back(Json{{"id", b.id},
                          {"stream", b.stream},
                          {"stage", b.stage},
                          {"flops", to_string(b.flops)},
                          {"params", to_string(b.params)},
                          {"out", {b.out.c, b.out.t, b.out.h, b.out.w}}});
  }
  return Json{{"convention", "1 FLOP = 1 multiply-add; bias, batch-norm and activations excluded"},
              {"input_spatial", input_spatial},
              {"flops_per_view", to_string(r.flops)},
              {"gflops_per_view", to_double(r.flops) / 1e9},
              {"params", to_string(r.params)},
              {"views", r.views},
              {"total_flops", to_string(r.total_flops)},
              {"sparse_flops", to_string(r.flops_of("sparse"))},
              {"dense_flops", to_string(r.flops_of("dense"))},
              {"fusion_flops", to_string(r.flops_of("fusion"))},
              {"head_flops", to_string(r.flops_of("head"))},
              {"sparse_fraction", r.sparse_fraction()},
              {"breakdown", blocks}};
}

inline std::string cost_report_csv(const CostReport& r) {
  std::string out = "block_id,stage,stream,flops,params,out_C,out_T,out_H,out_W\n";
  for (const auto& b : r.breakdown) {
    out += b.id + "," + std::to_string(b.stage) + "," + b.stream + "," + to_string(b.flops) + "," +
           to_string(b.params) + "," + std::to_string(b.out.c) + "," + std::to_string(b.out.t) + "," +
           std::to_string(b.out.h) + "," + std::to_string(b.out.w) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampler state

inline Json params_to_json(const ArchParams& p) {
  Json vars = Json::array();
  for (std::size_t i = 0; i < p.size(); ++i) vars.push_back(Json{{"key", p.vars[i].key()}, {"logits", p.logits[i]}});
  return vars;
}

inline ArchParams params_from_json(const Json& j, const std::string& path) {
  using namespace io_detail;
  ArchParams p;
  const auto& arr = as_array(j, path);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string pp = idx_path(path, i);
    const std::string key = as_string(field(arr[i], "key", pp), pp + "/key");
    p.vars.push_back(guarded(pp + "/key", [&] { return parse_variable_key(key); }));
    std::vector<double> l;
    const auto& la = as_array(field(arr[i], "logits", pp), pp + "/logits");
    for (std::size_t o = 0; o < la.size(); ++o) l.push_back(as_double(la[o], idx_path(pp + "/logits", o)));
    p.logits.push_back(std::move(l));
  }
  return p;
}

inline Json sampler_state_to_json(const SamplerState& s) {
  return Json{{"round", s.round},
              {"params", params_to_json(s.params)},
              {"adam", Json{{"m", s.adam.m}, {"v", s.adam.v}, {"step", s.adam.step}}},
              {"seed", s.seed},
              {"stream", s.stream}};
}

inline SamplerState sampler_state_from_json(const Json& j, const std::string& path) {
  using namespace io_detail;
  SamplerState s;
  s.round = as_uint(field(j, "round", path), path + "/round");
  s.params = params_from_json(field(j, "params", path), path + "/params");
  const Json& adam = field(j, "adam", path);
  try {
    s.adam.m = field(adam, "m", path + "/adam").get<std::vector<std::vector<double>>>();
    s.adam.v = field(adam, "v", path + "/adam").get<std::vector<std::vector<double>>>();
  } catch (const Json::exception& e) {
    throw SchemaError(path + "/adam", e.what());
  }
  s.adam.step = as_int(field(adam, "step", path + "/adam"), path + "/adam/step");
  s.seed = as_uint(field(j, "seed", path), path + "/seed");
  s.stream = as_uint(field(j, "stream", path), path + "/stream");
  return s;
}

inline Json round_record_to_json(const RoundRecord& r) {
  std::vector<std::string> flops;
  for (const auto& f : r.flops) flops.push_back(to_string(f));
  return Json{{"round", r.round},
              {"arch_ids", r.arch_ids},
              {"scores", r.scores},
              {"penalties", r.penalties},
              {"weights", r.weights},
              {"flops", flops},
              {"entropy", r.entropy},
              {"best_score", r.best_score},
              {"mean_score", r.mean_score},
              {"mean_penalized_score", r.mean_penalized_score},
              {"max_penalized_score", r.max_penalized_score},
              {"mean_penalty", r.mean_penalty},
              {"mean_flops", r.mean_flops},
              {"argmax_flops", to_string(r.argmax_flops)}};
}

inline RoundRecord round_record_from_json(const Json& j, const std::string& path) {
  using namespace io_detail;
  RoundRecord r;
  try {
    r.round = j.at("round").get<std::size_t>();
    r.arch_ids = j.at("arch_ids").get<std::vector<std::uint64_t>>();
    r.scores = j.at("scores").get<std::vector<double>>();
    r.penalties = j.at("penalties").get<std::vector<double>>();
    r.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& f : j.at("flops")) r.flops.push_back(BigInt(f.get<std::string>()));
    r.entropy = j.at("entropy").get<double>();
    r.best_score = j.at("best_score").get<double>();
    r.mean_score = j.at("mean_score").get<double>();
    r.mean_penalized_score = j.at("mean_penalized_score").get<double>();
    r.max_penalized_score = j.at("max_penalized_score").get<double>();
    r.mean_penalty = j.at("mean_penalty").get<double>();
    r.mean_flops = j.at("mean_flops").get<double>();
    r.argmax_flops = BigInt(j.at("argmax_flops").get<std::string>());
  } catch (const Json::exception& e) {
    throw SchemaError(path, e.what());
  }
  return r;
}

/// One row per round: round, entropy_nats, best_score, mean_score,
/// mean_penalty, mean_flops, argmax_flops.
inline std::string trajectory_csv(const std::vector<RoundRecord>& rounds) {
  std::string out = "round,entropy_nats,best_score,mean_score,mean_penalty,mean_flops,argmax_flops\n";
  for (const auto& r : rounds) {
    out += std::to_string(r.round) + "," + format_double(r.entropy) + "," + format_double(r.best_score) + "," +
           format_double(r.mean_score) + "," + format_double(r.mean_penalty) + "," + format_double(r.mean_flops) +
           "," + to_string(r.argmax_flops) + "\n";
  }
  return out;
}

}  // namespace tsnas
