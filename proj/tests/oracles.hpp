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

// Independent reference computations used by the tests: nested-loop MAC
// counters and exhaustive enumeration of small spaces.

#include <cstdint>
#include <functional>
#include <vector>

#include "tsnas/evaluators.hpp"
#include "tsnas/search_space.hpp"

namespace tsnas::oracle {

struct Shape {
  std::int64_t c, t, h, w;
};

/// Counts one MAC per (output position, output channel, input channel in
/// group, kernel tap), padded taps included ("same" padding).
inline std::uint64_t conv_macs(const Shape& in, std::int64_t c_out, int kt, int kh, int kw, int st, int sh, int sw,
                               std::int64_t groups, Shape* out = nullptr) {
  std::int64_t ot = 0, oh = 0, ow = 0;
  for (std::int64_t x = 0; x < in.t; x += st) ++ot;
  for (std::int64_t x = 0; x < in.h; x += sh) ++oh;
  for (std::int64_t x = 0; x < in.w; x += sw) ++ow;
  std::uint64_t macs = 0;
  for (std::int64_t t = 0; t < ot; ++t)
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t x = 0; x < ow; ++x)
        for (std::int64_t co = 0; co < c_out; ++co)
          for (std::int64_t ci = 0; ci < in.c / groups; ++ci)
            for (int a = 0; a < kt; ++a)
              for (int b = 0; b < kh; ++b)
                for (int d = 0; d < kw; ++d) ++macs;
  if (out) *out = {c_out, ot, oh, ow};
  return macs;
}

/// e * c rounded half-up to a multiple of 8, at least 8.
inline std::int64_t expanded(std::int64_t c, std::int64_t e_num, std::int64_t e_den) {
  const std::int64_t m = (2 * e_num * c + 8 * e_den) / (16 * e_den);
  return m < 1 ? 8 : m * 8;
}

inline std::uint64_t mbconv_macs(const Shape& in, int t, int k, std::int64_t c_out, std::int64_t e_num,
                                 std::int64_t e_den, int stride, Shape* out = nullptr) {
  const std::int64_t ce = expanded(in.c, e_num, e_den);
  Shape a{}, b{};
  std::uint64_t macs = conv_macs(in, ce, 1, 1, 1, 1, 1, 1, 1, &a);
  macs += conv_macs(a, ce, t, k, k, 1, stride, stride, ce, &b);
  macs += conv_macs(b, c_out, 1, 1, 1, 1, 1, 1, 1, out);
  return macs;
}

inline std::uint64_t fusion_conv_macs(const Shape& dense, int tau, int gamma, int temporal_stride) {
  return conv_macs(dense, gamma * dense.c, tau, 1, 1, temporal_stride, 1, 1, 1);
}

/// Global reasoning with explicit loops for every matrix product.
inline std::uint64_t glore_macs(const Shape& in, std::int64_t mid, std::int64_t nodes) {
  const std::int64_t positions = in.t * in.h * in.w;
  std::uint64_t macs = conv_macs(in, mid, 1, 1, 1, 1, 1, 1, 1);    // reduce
  macs += conv_macs(in, nodes, 1, 1, 1, 1, 1, 1, 1);               // projection weights
  for (std::int64_t n = 0; n < nodes; ++n)                         // aggregate into nodes
    for (std::int64_t m = 0; m < mid; ++m)
      for (std::int64_t l = 0; l < positions; ++l) ++macs;
  for (std::int64_t n = 0; n < nodes; ++n)                         // node mixing
    for (std::int64_t j = 0; j < nodes; ++j)
      for (std::int64_t m = 0; m < mid; ++m) ++macs;
  for (std::int64_t n = 0; n < nodes; ++n)                         // state update
    for (std::int64_t m = 0; m < mid; ++m)
      for (std::int64_t j = 0; j < mid; ++j) ++macs;
  for (std::int64_t l = 0; l < positions; ++l)                     // reverse projection
    for (std::int64_t n = 0; n < nodes; ++n)
      for (std::int64_t m = 0; m < mid; ++m) ++macs;
  macs += conv_macs({mid, in.t, in.h, in.w}, in.c, 1, 1, 1, 1, 1, 1, 1);  // expand
  return macs;
}

/// Visits every assignment of `vars` (other variables keep their values in
/// `base`) in mixed-radix order.
inline void enumerate(const SearchSpaceSpec& space, ArchitectureSample base, const std::vector<VariableRef>& vars,
                      const std::function<void(const ArchitectureSample&)>& visit) {
  std::vector<std::size_t> idx(vars.size(), 0);
  for (;;) {
    for (std::size_t i = 0; i < vars.size(); ++i) set_value(base, vars[i], domain_value(space, vars[i], idx[i]));
    visit(base);
    std::size_t i = 0;
    for (; i < vars.size(); ++i) {
      if (++idx[i] < domain_size(space, vars[i])) break;
      idx[i] = 0;
    }
    if (i == vars.size()) return;
  }
}

inline std::uint64_t count_by_enumeration(const SearchSpaceSpec& space) {
  std::uint64_t n = 0;
  enumerate(space, first_choice_architecture(space), variables(space), [&](const ArchitectureSample&) { ++n; });
  return n;
}

/// Best assignment of `vars` under `obj`, first found wins ties.
inline ArchitectureSample best_over(const SearchSpaceSpec& space, const SyntheticObjective& obj,
                                    const ArchitectureSample& base, const std::vector<VariableRef>& vars) {
  double best = -1e300;
  ArchitectureSample arg = base;
  enumerate(space, base, vars, [&](const ArchitectureSample& a) {
    const double r = obj.raw(space, a);
    if (r > best) {
      best = r;
      arg = a;
    }
  });
  return arg;
}

}  // namespace tsnas::oracle
