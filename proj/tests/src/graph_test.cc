// Copyright 2026 The uafd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "uafd/graph.h"

#include <algorithm>
#include <random>

#include "gtest/gtest.h"
#include "oracles.h"

namespace uafd {
namespace {

using testing::ChainFunction;
using testing::TestData;

constexpr char kSmallGraph[] = R"({
  "functions": [
    {"id": 0, "name": "main", "entry": 0,
     "blocks": [{"id": 0, "loc": "m.c:1"}, {"id": 1, "loc": "m.c:2", "call": 1},
                {"id": 2, "loc": "m.c:3"}],
     "edges": [[0, 2], [0, 1], [1, 2]]},
    {"id": 1, "name": "helper", "entry": 0,
     "blocks": [{"id": 0, "loc": "h.c:1"}, {"id": 1, "loc": "h.c:9"}],
     "edges": []}
  ],
  "entry_function": 0
})";

TEST(ProgramModelTest, ParsesAndIndexes) {
  Warnings warnings;
  ProgramModel m = ProgramModel::FromJson(kSmallGraph, &warnings);
  ASSERT_EQ(m.functions().size(), 2u);
  EXPECT_EQ(m.entry_function(), FunctionId{0});
  EXPECT_EQ(m.edge_count(), 3u);
  EXPECT_TRUE(m.HasBlock({FunctionId{1}, BlockId{1}}));
  EXPECT_FALSE(m.HasBlock({FunctionId{1}, BlockId{2}}));
  EXPECT_EQ(m.FindFunctionByName("helper"), FunctionId{1});
  EXPECT_EQ(m.FindFunctionByName("nope"), std::nullopt);
  // helper's block 1 has no path from its entry.
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("h.c:9"), std::string::npos);
}

TEST(ProgramModelTest, CallEdgesComeFromAnnotations) {
  ProgramModel m = ProgramModel::FromJson(kSmallGraph);
  ASSERT_EQ(m.call_edges().size(), 1u);
  EXPECT_EQ(m.call_edges()[0], (CallEdge{FunctionId{0}, FunctionId{1}, BlockId{1}}));
  EXPECT_EQ(m.Callers(FunctionId{1}), std::vector<FunctionId>{FunctionId{0}});
  EXPECT_EQ(m.Callees(FunctionId{0}), std::vector<FunctionId>{FunctionId{1}});
  EXPECT_TRUE(m.Callers(FunctionId{0}).empty());
}

TEST(ProgramModelTest, EdgeIdsFollowFileOrder) {
  ProgramModel m = ProgramModel::FromJson(kSmallGraph);
  EXPECT_EQ(m.edge(0), (CfgEdge{FunctionId{0}, BlockId{0}, BlockId{2}}));
  EXPECT_EQ(m.edge(1), (CfgEdge{FunctionId{0}, BlockId{0}, BlockId{1}}));
  EXPECT_EQ(m.EdgeId({FunctionId{0}, BlockId{1}, BlockId{2}}), 2u);
  EXPECT_EQ(m.EdgeId({FunctionId{0}, BlockId{2}, BlockId{1}}), std::nullopt);
  // Both views keep file order.
  auto succ = m.SuccessorIndices(0, 0);
  EXPECT_EQ(std::vector<uint32_t>(succ.begin(), succ.end()), (std::vector<uint32_t>{2, 1}));
  auto ids = m.OutEdgeIds(0, 0);
  EXPECT_EQ(std::vector<uint32_t>(ids.begin(), ids.end()), (std::vector<uint32_t>{0, 1}));
  EXPECT_EQ(m.Successors(FunctionId{0}, BlockId{0}),
            (std::vector<BlockId>{BlockId{2}, BlockId{1}}));
  EXPECT_EQ(m.Predecessors(FunctionId{0}, BlockId{2}),
            (std::vector<BlockId>{BlockId{0}, BlockId{1}}));
}

TEST(ProgramModelTest, JsonRoundTrip) {
  ProgramModel m = ProgramModel::FromJson(kSmallGraph);
  EXPECT_EQ(ProgramModel::FromJson(m.ToJson()), m);
  ProgramModel l2 = ProgramModel::Load(TestData("toy.graph.json"));
  EXPECT_EQ(ProgramModel::FromJson(l2.ToJson()), l2);
}

TEST(ProgramModelTest, UnknownIdsThrow) {
  ProgramModel m = ProgramModel::FromJson(kSmallGraph);
  EXPECT_THROW(m.function(FunctionId{7}), UnknownId);
  EXPECT_THROW(m.block({FunctionId{0}, BlockId{9}}), UnknownId);
  EXPECT_THROW(m.edge(99), UnknownId);
}

TEST(ProgramModelTest, FindLocationSpansFunctions) {
  Function a = ChainFunction(0, {1});
  Function b = ChainFunction(1, {});
  b.blocks[0].location = a.blocks[0].location;  // shared tag across functions
  ProgramModel m = ProgramModel::Build({a, b}, {}, FunctionId{0});
  EXPECT_EQ(m.FindLocation(a.blocks[0].location).size(), 2u);
  EXPECT_TRUE(m.FindLocation("nowhere").empty());
}

struct BadModelCase {
  const char *name;
  const char *json;
};

class InvalidModelTest : public ::testing::TestWithParam<BadModelCase> {};

TEST_P(InvalidModelTest, IsRejected) {
  EXPECT_THROW(ProgramModel::FromJson(GetParam().json), Error) << GetParam().name;
}

INSTANTIATE_TEST_SUITE_P(
    Cases, InvalidModelTest,
    ::testing::Values(
        BadModelCase{"not json", "{"},
        BadModelCase{"no functions", R"({"functions": [], "entry_function": 0})"},
        BadModelCase{"missing entry function",
                     R"({"functions": [{"id": 0, "name": "a", "entry": 0,
                         "blocks": [{"id": 0, "loc": "x"}]}], "entry_function": 3})"},
        BadModelCase{"duplicate function",
                     R"({"functions": [{"id": 0, "name": "a", "entry": 0, "blocks": [{"id": 0, "loc": "x"}]},
                                       {"id": 0, "name": "b", "entry": 0, "blocks": [{"id": 0, "loc": "y"}]}],
                         "entry_function": 0})"},
        BadModelCase{"missing entry block",
                     R"({"functions": [{"id": 0, "name": "a", "entry": 5,
                         "blocks": [{"id": 0, "loc": "x"}]}], "entry_function": 0})"},
        BadModelCase{"duplicate location",
                     R"({"functions": [{"id": 0, "name": "a", "entry": 0,
                         "blocks": [{"id": 0, "loc": "x"}, {"id": 1, "loc": "x"}]}], "entry_function": 0})"},
        BadModelCase{"empty location",
                     R"({"functions": [{"id": 0, "name": "a", "entry": 0,
                         "blocks": [{"id": 0, "loc": ""}]}], "entry_function": 0})"},
        BadModelCase{"dangling edge",
                     R"({"functions": [{"id": 0, "name": "a", "entry": 0,
                         "blocks": [{"id": 0, "loc": "x"}], "edges": [[0, 4]]}], "entry_function": 0})"},
        BadModelCase{"duplicate edge",
                     R"({"functions": [{"id": 0, "name": "a", "entry": 0,
                         "blocks": [{"id": 0, "loc": "x"}, {"id": 1, "loc": "y"}],
                         "edges": [[0, 1], [0, 1]]}], "entry_function": 0})"},
        BadModelCase{"unknown callee",
                     R"({"functions": [{"id": 0, "name": "a", "entry": 0,
                         "blocks": [{"id": 0, "loc": "x", "call": 9}]}], "entry_function": 0})"},
        BadModelCase{"call site outside caller",
                     R"({"functions": [{"id": 0, "name": "a", "entry": 0,
                         "blocks": [{"id": 0, "loc": "x"}]}],
                         "call_edges": [[0, 0, 7]], "entry_function": 0})"},
        BadModelCase{"negative id",
                     R"({"functions": [{"id": -1, "name": "a", "entry": 0,
                         "blocks": [{"id": 0, "loc": "x"}]}], "entry_function": 0})"}));

TEST(ProgramModelTest, UnknownKeysWarn) {
  Warnings warnings;
  ProgramModel::FromJson(R"({"functions": [{"id": 0, "name": "a", "entry": 0,
      "blocks": [{"id": 0, "loc": "x", "size": 4}]}], "entry_function": 0, "arch": "x86"})",
                         &warnings);
  EXPECT_EQ(warnings.size(), 2u);
}

TEST(ProgramModelTest, IndirectCallEdgesAddCallTargets) {
  Function a = ChainFunction(0, {1});
  Function b = ChainFunction(1, {});
  Function c = ChainFunction(2, {});
  ProgramModel m = ProgramModel::Build(
      {a, b, c}, {CallEdge{FunctionId{0}, FunctionId{2}, BlockId{1}}}, FunctionId{0});
  auto targets = m.CallTargets(0, 1);
  EXPECT_EQ(std::vector<FunctionId>(targets.begin(), targets.end()),
            (std::vector<FunctionId>{FunctionId{1}, FunctionId{2}}));
}

// Property: Callers is the transpose of Callees on random call graphs.
TEST(ProgramModelTest, CallersTransposeCallees) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 50; ++round) {
    ProgramModel m = testing::RandomCallGraph(rng, 1 + round % 20, 0.2);
    std::set<std::pair<uint32_t, uint32_t>> forward, backward;
    for (const Function &f : m.functions()) {
      for (FunctionId g : m.Callees(f.id)) forward.emplace(Raw(f.id), Raw(g));
      for (FunctionId g : m.Callers(f.id)) backward.emplace(Raw(g), Raw(f.id));
    }
    EXPECT_EQ(forward, backward);
    for (const CallEdge &e : m.call_edges()) {
      EXPECT_TRUE(forward.contains({Raw(e.caller), Raw(e.callee)}));
    }
  }
}

// Property: every edge id maps back to itself and predecessor lists are the
// transpose of successor lists.
TEST(ProgramModelTest, DenseIndexIsConsistent) {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 50; ++round) {
    ProgramModel m = testing::RandomDagFunction(rng, 2 + round % 18, 0.3);
    for (uint32_t id = 0; id < m.edge_count(); ++id) {
      EXPECT_EQ(m.EdgeId(m.edge(id)), id);
    }
    const size_t n = m.functions()[0].blocks.size();
    size_t succ_total = 0, pred_total = 0;
    for (size_t b = 0; b < n; ++b) {
      succ_total += m.SuccessorIndices(0, b).size();
      pred_total += m.PredecessorIndices(0, b).size();
      for (uint32_t s : m.SuccessorIndices(0, b)) {
        auto preds = m.PredecessorIndices(0, s);
        EXPECT_NE(std::find(preds.begin(), preds.end(), b), preds.end());
      }
    }
    EXPECT_EQ(succ_total, m.edge_count());
    EXPECT_EQ(pred_total, m.edge_count());
  }
}

}  // namespace
}  // namespace uafd
