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

#include <sstream>

#include "tsnas/io.hpp"
#include "tsnas/orchestrator.hpp"

namespace tsnas {
namespace {

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

TEST(SpaceJson, RoundTripIsLossless) {
  const auto space = build_default_space();
  const Json j = space_to_json(space);
  const auto back = space_from_json(Json::parse(j.dump()));
  EXPECT_EQ(canonical_space_json(back), canonical_space_json(space));
  EXPECT_EQ(space_fingerprint(back), space_fingerprint(space));
  EXPECT_EQ(cardinality(back), cardinality(space));
  EXPECT_EQ(variables(back), variables(space));
}

TEST(SpaceJson, FingerprintSeparatesSpaces) {
  const auto a = build_default_space();
  const auto b = build_default_space(4, 32, 224, FusionPlacement::kStageEnds);
  EXPECT_NE(space_fingerprint(a), space_fingerprint(b));
  EXPECT_EQ(space_fingerprint(a).size(), 64u);
  EXPECT_EQ(space_fingerprint(a), space_fingerprint(build_default_space()));
}

TEST(SpaceJson, CanonicalFormHasSortedKeys) {
  const std::string s = canonical_space_json(build_default_space());
  EXPECT_LT(s.find("\"attention\""), s.find("\"dense\""));
  EXPECT_LT(s.find("\"dense\""), s.find("\"fusion\""));
  EXPECT_LT(s.find("\"fusion\""), s.find("\"schema_version\""));
}

TEST(SpaceJson, ExpansionGridsAreRationals) {
  const Json j = space_to_json(build_default_space());
  const Json& e = j["sparse"]["groups"][0]["expansion"];
  EXPECT_TRUE(e["min"].contains("num"));
  EXPECT_TRUE(e["min"].contains("den"));
  const Rational step = rational_from_json(e["step"], "/x");
  EXPECT_GT(step, 0);
}

TEST(SpaceJson, SchemaErrorsCarryPaths) {
  Json j = space_to_json(build_default_space());
  j["sparse"]["groups"][3]["repeats"] = "two";
  try {
    space_from_json(j);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/sparse/groups/3/repeats");
  }
  Json k = space_to_json(build_default_space());
  k["dense"]["groups"][1].erase("channels");
  try {
    space_from_json(k);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/dense/groups/1/channels");
  }
  Json m = space_to_json(build_default_space());
  m["schema_version"] = 99;
  EXPECT_THROW(space_from_json(m), SchemaError);
}

TEST(SpaceJson, MalformedTextReportsLine) {
  try {
    parse_json("{\n \"a\": 1,\n \"b\": ]\n}", "space file");
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(ArchitectureDocument, RoundTripsRandomArchitectures) {
  const auto space = build_default_space();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto arch = sample_uniform(space, seed);
    const CostReport cost = architecture_cost(space, arch, 160);
    const Json doc = architecture_document(space, arch, DocumentScope::kTwoStream, summarize(cost, 160));
    EXPECT_EQ(architecture_from_document(space, Json::parse(doc.dump())), arch);
    EXPECT_EQ(doc["cost"]["flops_per_view"].get<std::string>(), to_string(cost.flops));
  }
}

TEST(ArchitectureDocument, RecordsCarryStageAndRationalExpansion) {
  const auto space = build_default_space();
  const auto arch = sample_uniform(space, 3);
  const Json doc = architecture_document(space, arch);
  ASSERT_EQ(doc["groups"].size(), space.sparse.groups.size() + space.dense.groups.size());
  const Json& g = doc["groups"][5];
  EXPECT_EQ(g["stream"], "sparse");
  EXPECT_EQ(g["group"], 5);
  EXPECT_EQ(g["stage"], space.sparse.groups[5].stage);
  EXPECT_EQ(rational_from_json(g["e"], "/e"), arch.stream(StreamId::kSparse)[5].e);
  EXPECT_EQ(doc["fusion"].size(), space.fusion_locations.size());
  EXPECT_EQ(doc["attention"].size(), 12u);
}

TEST(ArchitectureDocument, FingerprintMismatchIsAnError) {
  const auto space = build_default_space();
  const auto other = build_default_space(4, 32, 224, FusionPlacement::kStageEnds);
  const Json doc = architecture_document(space, first_choice_architecture(space));
  try {
    architecture_from_document(other, doc);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/space_fingerprint");
  }
}

TEST(ArchitectureDocument, SparseOnlyScopeOmitsDenseParts) {
  const auto space = build_default_space();
  const auto arch = sample_uniform(space, 11);
  const Json doc = architecture_document(space, arch, DocumentScope::kSparseOnly);
  EXPECT_EQ(doc["scope"], "sparse_only");
  EXPECT_EQ(doc["groups"].size(), space.sparse.groups.size());
  EXPECT_TRUE(doc["fusion"].empty());
  EXPECT_EQ(doc["attention"].size(), 6u);
  const auto back = architecture_from_document(space, doc);
  EXPECT_EQ(back.stream(StreamId::kSparse), arch.stream(StreamId::kSparse));
  EXPECT_EQ(back.attention[0], arch.attention[0]);
}

TEST(ArchitectureDocument, ErrorsNameTheField) {
  const auto space = build_default_space();
  Json doc = architecture_document(space, first_choice_architecture(space));
  doc["groups"][2]["k"] = 4;
  try {
    architecture_from_document(space, doc);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/sparse/g02/k");
    EXPECT_NE(std::string(e.what()).find("not in domain"), std::string::npos);
  }
  Json d2 = architecture_document(space, first_choice_architecture(space));
  d2["groups"][0]["e"]["den"] = 0;
  try {
    architecture_from_document(space, d2);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/groups/0/e/den");
  }
  Json d3 = architecture_document(space, first_choice_architecture(space));
  d3["groups"].erase(d3["groups"].size() - 1);
  EXPECT_THROW(architecture_from_document(space, d3), SchemaError);
  Json d4 = architecture_document(space, first_choice_architecture(space));
  d4["fusion"][0]["op"]["kind"] = "teleport";
  try {
    architecture_from_document(space, d4);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/fusion/0/op/kind");
  }
}

TEST(ArchitectureHash, StableAndDiscriminating) {
  const auto space = build_default_space();
  auto a = sample_uniform(space, 5);
  const std::string h = architecture_hash(space, a);
  EXPECT_EQ(h, architecture_hash(space, sample_uniform(space, 5)));
  a.attention[1][3] = !a.attention[1][3];
  EXPECT_NE(h, architecture_hash(space, a));
}

TEST(CostReportIo, JsonAndCsv) {
  const auto space = build_default_space();
  const auto arch = sample_uniform(space, 2);
  const CostReport r = architecture_cost(space, arch, 160, 30);
  const Json j = cost_report_to_json(r, 160);
  EXPECT_EQ(BigInt(j["total_flops"].get<std::string>()), BigInt(j["flops_per_view"].get<std::string>()) * 30);
  EXPECT_EQ(j["breakdown"].size(), r.breakdown.size());
  const std::string csv = cost_report_csv(r);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "block_id,stage,stream,flops,params,out_C,out_T,out_H,out_W");
  EXPECT_EQ(count_lines(csv), r.breakdown.size() + 1);
  BigInt sum = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 9u) << line;
    sum += BigInt(cells[3]);
  }
  EXPECT_EQ(sum, r.flops);
}

TEST(SamplerStateIo, RoundTripIsExact) {
  const auto space = build_default_space();
  SearchConfig c;
  c.seed = 17;
  c.rounds = 20;
  c.flops_target = BigInt(2'000'000'000);
  Sampler s(space, c, 3);
  for (int r = 0; r < 4; ++r) {
    const auto& batch = s.propose();
    std::vector<double> scores;
    std::vector<BigInt> flops;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      scores.push_back(0.1 * static_cast<double>(i) / 3.0);
      flops.push_back(BigInt(1'000'000'000) * static_cast<int>(i + 1));
    }
    const RoundRecord rec = s.commit(scores, flops, std::vector<std::uint64_t>(batch.size(), 1), [](const auto&) {
      return BigInt(7);
    });
    EXPECT_EQ(round_record_from_json(Json::parse(round_record_to_json(rec).dump()), ""), rec);
  }
  const SamplerState back = sampler_state_from_json(Json::parse(sampler_state_to_json(s.state()).dump()), "");
  EXPECT_EQ(back, s.state());
}

TEST(TrajectoryCsv, OneRowPerRound) {
  std::vector<RoundRecord> rounds(5);
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    rounds[i].round = i;
    rounds[i].entropy = 1.0 / static_cast<double>(i + 3);
    rounds[i].argmax_flops = BigInt(123456789) * static_cast<int>(i);
  }
  const std::string csv = trajectory_csv(rounds);
  EXPECT_EQ(count_lines(csv), 6u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "round,entropy_nats,best_score,mean_score,mean_penalty,mean_flops,argmax_flops");
  EXPECT_NE(csv.find("\n1,0.25,"), std::string::npos);
  EXPECT_EQ(csv, trajectory_csv(rounds));
}

TEST(CheckpointIo, RoundTripIsExact) {
  const auto space = build_default_space();
  SyntheticEvaluator eval(space, separable_objective(space, 4));
  OrchestratorOptions opt;
  opt.config.seed = 9;
  std::vector<SearchCheckpoint> seen;
  opt.on_checkpoint = [&](const SearchCheckpoint& c) { seen.push_back(c); };
  opt.checkpoint_every = 3;
  run_progressive(space, default_plans(28), eval, opt);
  ASSERT_FALSE(seen.empty());
  for (const auto& c : seen) {
    const Json j = checkpoint_to_json(space, c);
    const SearchCheckpoint back = checkpoint_from_json(space, Json::parse(j.dump()));
    EXPECT_EQ(checkpoint_to_json(space, back).dump(), j.dump());
    EXPECT_EQ(back.sampler, c.sampler);
    EXPECT_EQ(back.trajectory, c.trajectory);
    EXPECT_EQ(back.base, c.base);
    EXPECT_EQ(back.plans, c.plans);
  }
  Json j = checkpoint_to_json(space, seen.front());
  EXPECT_THROW(checkpoint_from_json(build_default_space(4, 32, 224, FusionPlacement::kStageEnds), j), SchemaError);
}

}  // namespace
}  // namespace tsnas
