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


#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "tsnas/evaluators.hpp"

namespace tsnas {
namespace {

using namespace std::chrono_literals;

const std::string kWorker = TSNAS_FAKE_WORKER;

/// Eight free variables: sparse group 0 backbone, sparse group 1 t/k and
/// two sparse attention bits (3024 architectures).
SearchSpaceSpec eight_variable_space() {
  const auto space = build_default_space();
  const auto base = first_choice_architecture(space);
  FrozenMask frozen;
  for (const auto& v : variables(space)) {
    const bool keep =
        (is_backbone(v.kind) && v.stream == StreamId::kSparse &&
         (v.index == 0 || (v.index == 1 && (v.kind == VarKind::kTemporalKernel || v.kind == VarKind::kSpatialKernel)))) ||
        (v.kind == VarKind::kAttention && v.stream == StreamId::kSparse && v.index < 2);
    if (!keep) frozen[v] = get_value(base, v);
  }
  return restrict(space, frozen);
}

std::vector<double> score_all(Evaluator& e, const std::vector<ArchitectureSample>& archs,
                              StepId step = StepId::kOneStep) {
  std::vector<EvalRequest> reqs;
  for (std::size_t i = 0; i < archs.size(); ++i) reqs.push_back({i + 1, &archs[i]});
  return e.evaluate(reqs, {step, 0});
}

std::vector<ArchitectureSample> some_archs(const SearchSpaceSpec& space, std::size_t n, std::uint64_t seed = 0) {
  std::vector<ArchitectureSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_uniform(space, seed + i));
  return out;
}

EvaluatorError::Kind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const EvaluatorError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no evaluator error was raised";
  return EvaluatorError::Kind::kSpawn;
}

std::string temp_path(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("tsnas_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove(p);
  return p.string();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic

TEST(Synthetic, FlatObjectiveScoresHalf) {
  const auto space = build_default_space();
  SyntheticEvaluator e(space, flat_objective(space));
  for (double s : score_all(e, some_archs(space, 20))) EXPECT_EQ(s, 0.5);
}

TEST(Synthetic, ScoresAreDeterministicAndInRange) {
  const auto space = build_default_space();
  for (double noise : {0.0, 0.01}) {
    auto obj = separable_objective(space, 21, 3.0);
    obj.noise_std = noise;
    SyntheticEvaluator a(space, obj), b(space, obj);
    const auto archs = some_archs(space, 100, 7);
    const auto sa = score_all(a, archs);
    EXPECT_EQ(sa, score_all(b, archs));
    EXPECT_EQ(sa, score_all(a, archs));
    for (double s : sa) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
    EXPECT_TRUE(a.deterministic());
  }
}

TEST(Synthetic, NoiseChangesScoresButNotAcrossCalls) {
  const auto space = build_default_space();
  auto obj = separable_objective(space, 2);
  const auto arch = sample_uniform(space, 1);
  const double clean = obj.score(space, arch);
  obj.noise_std = 0.01;
  const double noisy = obj.score(space, arch);
  EXPECT_NE(clean, noisy);
  EXPECT_NEAR(clean, noisy, 0.05);
  EXPECT_EQ(noisy, obj.score(space, arch));
}

TEST(Synthetic, SeparableArgmaxIsPerVariableArgmax) {
  const auto space = eight_variable_space();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto obj = separable_objective(space, seed);
    const auto best = oracle::best_over(space, obj, first_choice_architecture(space), variables(space));
    EXPECT_EQ(best, separable_optimum(space, obj));
  }
}

TEST(Synthetic, BruteForceOptimumDominatesEveryArchitecture) {
  const auto space = eight_variable_space();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto obj = separable_objective(space, 100 + seed, 2.0);
    add_block_interactions(obj, space, variables(space), 6, 1.5, 0);
    const auto best = oracle::best_over(space, obj, first_choice_architecture(space), variables(space));
    const double top = obj.score(space, best);
    std::size_t n = 0;
    oracle::enumerate(space, first_choice_architecture(space), variables(space), [&](const ArchitectureSample& a) {
      EXPECT_LE(obj.score(space, a), top);
      ++n;
    });
    EXPECT_EQ(n, 3024u);
  }
}

TEST(Synthetic, InteractionsApplyOnlyWhenBothChoicesMatch) {
  const auto space = eight_variable_space();
  auto obj = flat_objective(space);
  const auto vars = variables(space);
  obj.interactions.push_back({vars[0], 1, vars[1], 0, 2.0});
  auto a = first_choice_architecture(space);
  EXPECT_EQ(obj.raw(space, a), 0.0);
  set_value(a, vars[0], domain_value(space, vars[0], 1));
  EXPECT_EQ(obj.raw(space, a), 2.0);
  set_value(a, vars[1], domain_value(space, vars[1], 1));
  EXPECT_EQ(obj.raw(space, a), 0.0);
}

TEST(Synthetic, RejectsArchitecturesOutsideItsSpace) {
  const auto space = eight_variable_space();
  const auto full = build_default_space();
  SyntheticEvaluator e(space, separable_objective(space, 1));
  EXPECT_THROW(score_all(e, some_archs(full, 5, 3)), ValidationError);
}

TEST(ScoreDomain, OutOfRangeIsNeverClamped) {
  EXPECT_EQ(check_score(0.0), 0.0);
  EXPECT_EQ(check_score(1.0), 1.0);
  for (double bad : {-1e-12, 1.0000001, 1.3, std::nan("")}) {
    EXPECT_EQ(kind_of([&] { check_score(bad, 4); }), EvaluatorError::Kind::kOutOfRange);
  }
}

// ---------------------------------------------------------------------------
// Table

TEST(Table, ReturnsStoredScore) {
  const auto space = build_default_space();
  const auto arch = sample_uniform(space, 8);
  TableEvaluator e(space, {{architecture_hash(space, arch), 0.731}});
  EXPECT_EQ(score_all(e, {arch}), std::vector<double>{0.731});
}

TEST(Table, MissingArchitectureNamesHash) {
  const auto space = build_default_space();
  const auto arch = sample_uniform(space, 8);
  const auto other = sample_uniform(space, 9);
  TableEvaluator e(space, {{architecture_hash(space, arch), 0.731}});
  try {
    score_all(e, {other});
    FAIL() << "expected an error";
  } catch (const EvaluatorError& err) {
    EXPECT_EQ(err.kind(), EvaluatorError::Kind::kMissing);
    EXPECT_NE(std::string(err.what()).find(architecture_hash(space, other)), std::string::npos);
  }
}

TEST(Table, AttentionBitsAreIndependentKeys) {
  const auto space = build_default_space();
  auto a = sample_uniform(space, 8);
  auto b = a;
  b.attention[0][2] = !b.attention[0][2];
  TableEvaluator e = TableEvaluator::from_json(
      space, Json{{architecture_hash(space, a), 0.25}, {architecture_hash(space, b), 0.75}});
  EXPECT_EQ(score_all(e, {a, b}), (std::vector<double>{0.25, 0.75}));
}

TEST(Table, RejectsBadTables) {
  const auto space = build_default_space();
  EXPECT_THROW(TableEvaluator::from_json(space, Json::array()), SchemaError);
  EXPECT_THROW(TableEvaluator::from_json(space, Json{{"abc", "x"}}), SchemaError);
  EXPECT_THROW(TableEvaluator::from_json(space, Json{{"abc", 1.5}}), EvaluatorError);
}

// ---------------------------------------------------------------------------
// Worker protocol

TEST(Protocol, EchoWorker) {
  const auto space = build_default_space();
  ProtocolEvaluator e(space, kWorker + " echo", 5000ms);
  EXPECT_EQ(score_all(e, some_archs(space, 8)), std::vector<double>(8, 0.5));
  EXPECT_FALSE(e.deterministic());
}

TEST(Protocol, OutOfRangeScore) {
  const auto space = build_default_space();
  ProtocolEvaluator e(space, kWorker + " echo 1.3", 5000ms);
  EXPECT_EQ(kind_of([&] { score_all(e, some_archs(space, 2)); }), EvaluatorError::Kind::kOutOfRange);
}

TEST(Protocol, MismatchedIdIsProtocolError) {
  const auto space = build_default_space();
  ProtocolEvaluator e(space, kWorker + " mismatch", 5000ms);
  EXPECT_EQ(kind_of([&] { score_all(e, some_archs(space, 2)); }), EvaluatorError::Kind::kProtocol);
}

TEST(Protocol, OutOfOrderResponsesAreMatchedById) {
  const auto space = build_default_space();
  ProtocolEvaluator e(space, kWorker + " reverse 8", 5000ms);
  const auto archs = some_archs(space, 8);
  std::vector<EvalRequest> reqs;
  for (std::size_t i = 0; i < archs.size(); ++i) reqs.push_back({10 + i, &archs[i]});
  const auto scores = e.evaluate(reqs, {StepId::kOneStep, 0});
  for (std::size_t i = 0; i < scores.size(); ++i) EXPECT_DOUBLE_EQ(scores[i], 0.25 + 0.01 * static_cast<double>(10 + i));
}

TEST(Protocol, WorkerExitCarriesArchitectureId) {
  const auto space = build_default_space();
  ProtocolEvaluator e(space, kWorker + " exit-after 3", 5000ms);
  try {
    score_all(e, some_archs(space, 8));
    FAIL() << "expected an error";
  } catch (const EvaluatorError& err) {
    EXPECT_EQ(err.kind(), EvaluatorError::Kind::kWorkerExit);
    ASSERT_TRUE(err.arch_id().has_value());
    // Either the first unanswered request or one that could not be sent.
    EXPECT_GE(*err.arch_id(), 4u);
    EXPECT_LE(*err.arch_id(), 8u);
  }
}

TEST(Protocol, MalformedLine) {
  const auto space = build_default_space();
  ProtocolEvaluator e(space, kWorker + " malformed", 5000ms);
  EXPECT_EQ(kind_of([&] { score_all(e, some_archs(space, 2)); }), EvaluatorError::Kind::kMalformed);
}

TEST(Protocol, SilentWorkerTimesOut) {
  const auto space = build_default_space();
  ProtocolEvaluator e(space, kWorker + " silent", 200ms);
  const auto start = std::chrono::steady_clock::now();
  EXPECT_EQ(kind_of([&] { score_all(e, some_archs(space, 2)); }), EvaluatorError::Kind::kTimeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 3s);
}

TEST(Protocol, WorkerReportedError) {
  const auto space = build_default_space();
  ProtocolEvaluator e(space, kWorker + " error", 5000ms);
  try {
    score_all(e, some_archs(space, 2));
    FAIL() << "expected an error";
  } catch (const EvaluatorError& err) {
    EXPECT_EQ(err.kind(), EvaluatorError::Kind::kWorkerReported);
    EXPECT_NE(std::string(err.what()).find("out of memory"), std::string::npos);
  }
}

TEST(Protocol, MissingCommandFailsAsWorkerExit) {
  const auto space = build_default_space();
  ProtocolEvaluator e(space, "/nonexistent/worker-binary", 5000ms);
  EXPECT_EQ(kind_of([&] { score_all(e, some_archs(space, 2)); }), EvaluatorError::Kind::kWorkerExit);
}

TEST(Protocol, FreezeIsAcknowledged) {
  const auto space = build_default_space();
  ProtocolEvaluator ok(space, kWorker + " echo", 5000ms);
  EXPECT_NO_THROW(ok.on_step_boundary(sample_uniform(space, 1), StepId::kSparse));
  EXPECT_EQ(score_all(ok, some_archs(space, 3)), std::vector<double>(3, 0.5));
  ProtocolEvaluator bad(space, kWorker + " noack", 5000ms);
  EXPECT_EQ(kind_of([&] { bad.on_step_boundary(sample_uniform(space, 1), StepId::kSparse); }),
            EvaluatorError::Kind::kMalformed);
}

TEST(Protocol, RequestsFollowTheWireFormat) {
  const auto space = build_default_space();
  const std::string log = temp_path("wire");
  {
    ProtocolEvaluator e(space, kWorker + " log " + log, 5000ms);
    const auto archs = some_archs(space, 2);
    score_all(e, archs, StepId::kSparse);
    score_all(e, archs, StepId::kAttention);
    e.on_step_boundary(archs[0], StepId::kAttention);
  }
  const auto lines = read_lines(log);
  ASSERT_EQ(lines.size(), 5u);
  for (const auto& l : lines) {
    EXPECT_EQ(l.find('\n'), std::string::npos);
    const Json j = Json::parse(l);
    EXPECT_TRUE(j["id"].is_number_unsigned());
    EXPECT_TRUE(j.contains("arch"));
  }
  const Json sparse = Json::parse(lines[0]);
  EXPECT_EQ(sparse["kind"], "evaluate");
  EXPECT_EQ(sparse["step"], "sparse");
  EXPECT_EQ(sparse["arch"]["scope"], "sparse_only");
  EXPECT_TRUE(sparse["arch"]["cost"].contains("flops_per_view"));
  const Json att = Json::parse(lines[2]);
  EXPECT_EQ(att["step"], "attention");
  EXPECT_EQ(att["arch"]["scope"], "two_stream");
  const auto back = architecture_from_document(space, att["arch"]);
  EXPECT_EQ(back, sample_uniform(space, 0));
  const Json freeze = Json::parse(lines[4]);
  EXPECT_EQ(freeze["kind"], "freeze");
  std::filesystem::remove(log);
}

TEST(Protocol, RequestsAreStripedOverWorkers) {
  const auto space = build_default_space();
  const std::string a = temp_path("stripe_a"), b = temp_path("stripe_b");
  {
    ProtocolEvaluator e(space, std::vector<std::string>{kWorker + " log " + a, kWorker + " reverse 4"}, 5000ms);
    const auto scores = score_all(e, some_archs(space, 8));
    for (std::size_t i = 0; i < 8; ++i) {
      const double expect = i % 2 == 0 ? 0.5 : 0.25 + 0.01 * static_cast<double>(i + 1);
      EXPECT_DOUBLE_EQ(scores[i], expect) << i;
    }
  }
  EXPECT_EQ(read_lines(a).size(), 4u);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(StepIds, RoundTrip) {
  for (StepId s : {StepId::kSparse, StepId::kDenseFusion, StepId::kAttention, StepId::kOneStep}) {
    EXPECT_EQ(parse_step_id(to_string(s)), s);
  }
  EXPECT_THROW(parse_step_id("warp"), UsageError);
}

}  // namespace
}  // namespace tsnas
