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

// Pre-fuzzing analysis: caller sets of the UAF events, the UAF-weighted call
// graph, function/basic-block distances toward the use function, and the
// cut / non-cut edges between consecutive targets.

#ifndef UAFD_STATIC_METRICS_H_
#define UAFD_STATIC_METRICS_H_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "uafd/bugtrace.h"
#include "uafd/error.h"
#include "uafd/graph.h"

namespace uafd {

// Sentinel for "no path". Excluded from normalization bounds.
inline constexpr double kInfiniteDistance = std::numeric_limits<double>::max();
inline bool IsFiniteDistance(double d) { return d < kInfiniteDistance; }

inline constexpr double kDefaultBeta = 0.25;
inline constexpr double kDefaultCScale = 10.0;

struct CallerSets {
  // Functions from which the event's function is reachable, itself included.
  std::set<FunctionId> r_alloc;
  std::set<FunctionId> r_free;
  std::set<FunctionId> r_use;
  // The functions containing the events.
  FunctionId alloc_function{};
  FunctionId free_function{};
  FunctionId use_function{};

  const std::set<FunctionId> &For(UafEvent event) const;
  FunctionId FunctionOf(UafEvent event) const;
};

CallerSets ComputeCallerSets(const ProgramModel &model,
                             const TargetSequence &seq);
CallerSets ComputeCallerSets(const ProgramModel &model, FunctionId alloc_function,
                             FunctionId free_function, FunctionId use_function);

// beta if the call edge caller->callee can take the execution through the UAF
// events in order (or, for double frees, through both frees), 1 otherwise.
// Throws UnknownEdge when the model has no such call edge.
double ThetaUaf(const ProgramModel &model, const CallerSets &callers,
                FunctionId caller, FunctionId callee, BugKind kind,
                double beta = kDefaultBeta);

struct WeightedCallEdge {
  FunctionId caller;
  FunctionId callee;
  double base_weight = 1.0;
  double weight = 1.0;
  bool favored = false;
};

// Optional per-edge base weights; edges not listed weigh 1.
using BaseWeightTable = std::map<std::pair<FunctionId, FunctionId>, double>;

struct WeightedCallGraph {
  std::vector<FunctionId> functions;
  // One entry per distinct (caller, callee) pair, sorted.
  std::vector<WeightedCallEdge> edges;

  std::vector<size_t> FavoredEdges() const;
};

WeightedCallGraph BuildWeightedCallGraph(const ProgramModel &model,
                                         const CallerSets &callers, BugKind kind,
                                         double beta = kDefaultBeta,
                                         const BaseWeightTable *base = nullptr);

// Shortest weighted path length from every function to `use_function`.
std::map<FunctionId, double> FunctionDistance(const WeightedCallGraph &wcg,
                                              FunctionId use_function);

// Distances of every block of function `f`. Event-target blocks are 0; other
// blocks take the cheapest c_scale * hops + cost over the reachable call sites
// (cost = callee distance) and event-target blocks (cost = 0).
std::vector<double> BlockDistances(const ProgramModel &model,
                                   const std::map<FunctionId, double> &fdist,
                                   FunctionId f,
                                   const std::set<BlockRef> &event_blocks,
                                   double c_scale = kDefaultCScale);
double BlockDistance(const ProgramModel &model,
                     const std::map<FunctionId, double> &fdist, FunctionId f,
                     BlockId m, const std::set<BlockRef> &event_blocks,
                     double c_scale = kDefaultCScale);

struct CutEdgeSets {
  std::set<CfgEdge> cut;
  std::set<CfgEdge> noncut;
};

// Decision nodes are blocks with two or more successors lying on some
// source ->* dn ->* sink path. Their out-edges that can still reach the sink
// are cut edges, the rest are non-cut.
CutEdgeSets CalculateCutEdges(const ProgramModel &model, FunctionId f,
                              BlockId source, BlockId sink);

// Unions the per-pair cut edges over consecutive resolved targets. An edge
// that is cut for any pair is never reported as non-cut.
CutEdgeSets AccumulateCutEdges(const ProgramModel &model,
                               const TargetSequence &seq,
                               Warnings *warnings = nullptr);

struct AnalysisOptions {
  double beta = kDefaultBeta;
  double c_scale = kDefaultCScale;
  const BaseWeightTable *base_weights = nullptr;
};

// Everything the fuzzing loop needs besides the target itself.
struct StaticMetadata {
  BugKind kind = BugKind::kUseAfterFree;
  double beta = kDefaultBeta;
  double c_scale = kDefaultCScale;
  size_t edge_count = 0;
  TargetSequence targets;  // resolved
  std::map<FunctionId, double> function_distance;
  std::map<BlockRef, double> block_distance;
  std::vector<WeightedCallEdge> call_graph;
  std::set<CfgEdge> cut_edges;
  std::set<CfgEdge> noncut_edges;
  // Dense CFG edge ids of the sets above, sorted.
  std::vector<uint32_t> cut_edge_ids;
  std::vector<uint32_t> noncut_edge_ids;
  std::map<CfgEdge, uint32_t> decision_edge_ids;

  std::string ToJson() const;
  static StaticMetadata FromJson(std::string_view text);
  void Save(const std::filesystem::path &path) const;
  static StaticMetadata Load(const std::filesystem::path &path);

  size_t favored_edge_count() const;
  double BlockDistanceOf(BlockRef ref) const;
};

StaticMetadata Analyze(const ProgramModel &model, const TargetSequence &resolved,
                       const AnalysisOptions &options = {},
                       Warnings *warnings = nullptr);

}  // namespace uafd

#endif  // UAFD_STATIC_METRICS_H_
