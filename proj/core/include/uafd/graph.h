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

// In-memory program model: a call graph plus one control-flow graph per
// function. Loaded from the JSON graph file produced by an external lifter.
// Immutable after construction.

#ifndef UAFD_GRAPH_H_
#define UAFD_GRAPH_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "uafd/error.h"

namespace uafd {

enum class FunctionId : uint32_t {};
enum class BlockId : uint32_t {};

constexpr uint32_t Raw(FunctionId id) { return static_cast<uint32_t>(id); }
constexpr uint32_t Raw(BlockId id) { return static_cast<uint32_t>(id); }

struct BlockRef {
  FunctionId function;
  BlockId block;
  auto operator<=>(const BlockRef &) const = default;
};

// Intra-procedural CFG edge.
struct CfgEdge {
  FunctionId function;
  BlockId src;
  BlockId dst;
  auto operator<=>(const CfgEdge &) const = default;
};

struct CallEdge {
  FunctionId caller;
  FunctionId callee;
  BlockId call_site;
  auto operator<=>(const CallEdge &) const = default;
};

struct BasicBlock {
  BlockId id;
  // Opaque tag matched by exact equality: "file.c:123" or "0x8085c6e".
  std::string location;
  std::optional<FunctionId> callee;

  bool is_call() const { return callee.has_value(); }
  bool operator==(const BasicBlock &) const = default;
};

struct Function {
  FunctionId id;
  std::string name;
  BlockId entry_block;
  std::vector<BasicBlock> blocks;
  std::vector<std::pair<BlockId, BlockId>> edges;

  bool operator==(const Function &) const = default;
};

std::string ToString(BlockRef ref);
std::string ToString(const CfgEdge &edge);

class ProgramModel {
 public:
  // Validates every invariant and builds the lookup indexes. Call edges implied
  // by block `call` annotations are added when missing.
  static ProgramModel Build(std::vector<Function> functions,
                            std::vector<CallEdge> call_edges,
                            FunctionId entry_function,
                            Warnings *warnings = nullptr);
  static ProgramModel FromJson(std::string_view text,
                               Warnings *warnings = nullptr);
  static ProgramModel Load(const std::filesystem::path &path,
                           Warnings *warnings = nullptr);

  std::string ToJson() const;

  const std::vector<Function> &functions() const { return functions_; }
  const std::vector<CallEdge> &call_edges() const { return call_edges_; }
  FunctionId entry_function() const { return entry_function_; }

  bool HasFunction(FunctionId f) const;
  bool HasBlock(BlockRef ref) const;
  // All of the following throw UnknownId on bad ids.
  const Function &function(FunctionId f) const;
  const BasicBlock &block(BlockRef ref) const;
  size_t FunctionIndex(FunctionId f) const;
  size_t BlockIndex(size_t function_index, BlockId b) const;
  std::optional<FunctionId> FindFunctionByName(std::string_view name) const;

  std::vector<BlockId> Successors(FunctionId f, BlockId b) const;
  std::vector<BlockId> Predecessors(FunctionId f, BlockId b) const;

  // Dense, index-based CFG view for hot paths. Indices follow file order.
  std::span<const uint32_t> SuccessorIndices(size_t fi, size_t bi) const {
    return index_[fi].succ[bi];
  }
  std::span<const uint32_t> PredecessorIndices(size_t fi, size_t bi) const {
    return index_[fi].pred[bi];
  }
  // Global CFG edge ids of the out-edges of (fi, bi), parallel to
  // SuccessorIndices.
  std::span<const uint32_t> OutEdgeIds(size_t fi, size_t bi) const {
    return index_[fi].out_edge_ids[bi];
  }

  // CFG edges are numbered densely: functions in file order, then each
  // function's edge list in file order. Instrumented targets report hits
  // using these ids.
  size_t edge_count() const { return all_edges_.size(); }
  const CfgEdge &edge(uint32_t id) const;
  std::optional<uint32_t> EdgeId(const CfgEdge &edge) const;

  // Callees invoked from a call-site block: its annotation plus any extra
  // call_edges (indirect calls) registered at that site.
  std::span<const FunctionId> CallTargets(size_t fi, size_t bi) const {
    return index_[fi].call_targets[bi];
  }
  std::vector<FunctionId> Callers(FunctionId f) const;
  std::vector<FunctionId> Callees(FunctionId f) const;

  // Every block whose location tag equals `location`, across functions.
  std::vector<BlockRef> FindLocation(std::string_view location) const;

  std::vector<BlockRef> UnreachableBlocks() const;

  bool operator==(const ProgramModel &other) const {
    return functions_ == other.functions_ &&
           call_edges_ == other.call_edges_ &&
           entry_function_ == other.entry_function_;
  }

 private:
  struct FunctionIndexData {
    std::unordered_map<uint32_t, size_t> block_pos;
    std::vector<std::vector<uint32_t>> succ;
    std::vector<std::vector<uint32_t>> pred;
    std::vector<std::vector<uint32_t>> out_edge_ids;
    std::vector<std::vector<FunctionId>> call_targets;
  };

  void BuildIndexes(Warnings *warnings);

  std::vector<Function> functions_;
  std::vector<CallEdge> call_edges_;
  FunctionId entry_function_{};

  std::unordered_map<uint32_t, size_t> function_pos_;
  std::vector<FunctionIndexData> index_;
  std::vector<CfgEdge> all_edges_;
  std::unordered_map<std::string, std::vector<BlockRef>> location_index_;
  std::vector<std::vector<FunctionId>> callers_;
  std::vector<std::vector<FunctionId>> callees_;
};

}  // namespace uafd

template <>
struct std::hash<uafd::BlockRef> {
  size_t operator()(const uafd::BlockRef &r) const noexcept {
    return (static_cast<size_t>(uafd::Raw(r.function)) << 32) ^
           uafd::Raw(r.block);
  }
};

#endif  // UAFD_GRAPH_H_
