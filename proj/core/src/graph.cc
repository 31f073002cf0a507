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
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace uafd {
namespace {

using json = nlohmann::json;

uint32_t ReadId(const json &value, std::string_view what) {
  if (!value.is_number_unsigned()) {
    throw ParseError(std::string(what) + " must be a non-negative integer");
  }
  auto raw = value.get<uint64_t>();
  if (raw > UINT32_MAX) throw ParseError(std::string(what) + " out of range");
  return static_cast<uint32_t>(raw);
}

const json &Require(const json &object, const char *key, std::string_view ctx) {
  auto it = object.find(key);
  if (it == object.end()) {
    throw ParseError(std::string(ctx) + ": missing key '" + key + "'");
  }
  return *it;
}

void WarnUnknownKeys(const json &object, std::initializer_list<const char *> known,
                     std::string_view ctx, Warnings *warnings) {
  for (const auto &[key, unused] : object.items()) {
    if (std::none_of(known.begin(), known.end(),
                     [&](const char *k) { return key == k; })) {
      Warn(warnings, std::string(ctx) + ": ignoring unknown key '" + key + "'");
    }
  }
}

Function ParseFunction(const json &j, Warnings *warnings) {
  if (!j.is_object()) throw ParseError("function entry must be an object");
  Function f;
  f.id = FunctionId{ReadId(Require(j, "id", "function"), "function id")};
  std::string ctx = "function " + std::to_string(Raw(f.id));
  const json &name = Require(j, "name", ctx);
  if (!name.is_string()) throw ParseError(ctx + ": name must be a string");
  f.name = name.get<std::string>();
  f.entry_block = BlockId{ReadId(Require(j, "entry", ctx), "entry")};
  const json &blocks = Require(j, "blocks", ctx);
  if (!blocks.is_array()) throw ParseError(ctx + ": blocks must be an array");
  for (const json &b : blocks) {
    if (!b.is_object()) throw ParseError(ctx + ": block must be an object");
    BasicBlock block;
    block.id = BlockId{ReadId(Require(b, "id", ctx), "block id")};
    const json &loc = Require(b, "loc", ctx);
    if (!loc.is_string()) throw ParseError(ctx + ": loc must be a string");
    block.location = loc.get<std::string>();
    if (auto it = b.find("call"); it != b.end() && !it->is_null()) {
      block.callee = FunctionId{ReadId(*it, "call")};
    }
    WarnUnknownKeys(b, {"id", "loc", "call"}, ctx + " block", warnings);
    f.blocks.push_back(std::move(block));
  }
  if (auto it = j.find("edges"); it != j.end()) {
    if (!it->is_array()) throw ParseError(ctx + ": edges must be an array");
    for (const json &e : *it) {
      if (!e.is_array() || e.size() != 2) {
        throw ParseError(ctx + ": edge must be a [src, dst] pair");
      }
      f.edges.emplace_back(BlockId{ReadId(e[0], "edge src")},
                           BlockId{ReadId(e[1], "edge dst")});
    }
  }
  WarnUnknownKeys(j, {"id", "name", "entry", "blocks", "edges"}, ctx, warnings);
  return f;
}

}  // namespace

AmbiguousLocation::AmbiguousLocation(const std::string &location,
                                     std::vector<std::string> candidates)
    : Error([&] {
        std::string msg = "location '" + location + "' is ambiguous:";
        for (const auto &c : candidates) msg += " " + c;
        return msg;
      }()),
      candidates_(std::move(candidates)) {}

std::string ToString(BlockRef ref) {
  return "f" + std::to_string(Raw(ref.function)) + ":b" +
         std::to_string(Raw(ref.block));
}

std::string ToString(const CfgEdge &edge) {
  return "f" + std::to_string(Raw(edge.function)) + ":b" +
         std::to_string(Raw(edge.src)) + "->b" + std::to_string(Raw(edge.dst));
}

ProgramModel ProgramModel::Build(std::vector<Function> functions,
                                 std::vector<CallEdge> call_edges,
                                 FunctionId entry_function,
                                 Warnings *warnings) {
  ProgramModel model;
  model.functions_ = std::move(functions);
  model.call_edges_ = std::move(call_edges);
  model.entry_function_ = entry_function;
  model.BuildIndexes(warnings);
  return model;
}

void ProgramModel::BuildIndexes(Warnings *warnings) {
  if (functions_.empty()) throw ValidationError("program model has no functions");

  for (size_t fi = 0; fi < functions_.size(); ++fi) {
    if (!function_pos_.emplace(Raw(functions_[fi].id), fi).second) {
      throw ValidationError("duplicate function id " +
                            std::to_string(Raw(functions_[fi].id)));
    }
  }
  if (!function_pos_.contains(Raw(entry_function_))) {
    throw ValidationError("entry_function " +
                          std::to_string(Raw(entry_function_)) +
                          " does not exist");
  }

  index_.resize(functions_.size());
  for (size_t fi = 0; fi < functions_.size(); ++fi) {
    const Function &f = functions_[fi];
    FunctionIndexData &idx = index_[fi];
    const std::string ctx = "function " + std::to_string(Raw(f.id));
    std::set<std::string_view> seen_locations;
    for (size_t bi = 0; bi < f.blocks.size(); ++bi) {
      const BasicBlock &b = f.blocks[bi];
      if (!idx.block_pos.emplace(Raw(b.id), bi).second) {
        throw ValidationError(ctx + ": duplicate block id " +
                              std::to_string(Raw(b.id)));
      }
      if (b.location.empty()) {
        throw ValidationError(ctx + ": block " + std::to_string(Raw(b.id)) +
                              " has an empty location");
      }
      if (!seen_locations.insert(b.location).second) {
        throw ValidationError(ctx + ": location '" + b.location +
                              "' used by two blocks");
      }
      if (b.callee && !function_pos_.contains(Raw(*b.callee))) {
        throw ValidationError(ctx + ": block " + std::to_string(Raw(b.id)) +
                              " calls unknown function " +
                              std::to_string(Raw(*b.callee)));
      }
    }
    if (!idx.block_pos.contains(Raw(f.entry_block))) {
      throw ValidationError(ctx + ": entry block " +
                            std::to_string(Raw(f.entry_block)) +
                            " does not exist");
    }
    idx.succ.resize(f.blocks.size());
    idx.pred.resize(f.blocks.size());
    idx.out_edge_ids.resize(f.blocks.size());
    idx.call_targets.resize(f.blocks.size());
    std::set<std::pair<uint32_t, uint32_t>> seen_edges;
    for (const auto &[src, dst] : f.edges) {
      auto s = idx.block_pos.find(Raw(src));
      auto d = idx.block_pos.find(Raw(dst));
      if (s == idx.block_pos.end() || d == idx.block_pos.end()) {
        throw ValidationError(ctx + ": edge " + std::to_string(Raw(src)) +
                              "->" + std::to_string(Raw(dst)) +
                              " references a missing block");
      }
      if (!seen_edges.emplace(Raw(src), Raw(dst)).second) {
        throw ValidationError(ctx + ": duplicate edge " +
                              std::to_string(Raw(src)) + "->" +
                              std::to_string(Raw(dst)));
      }
      auto id = static_cast<uint32_t>(all_edges_.size());
      all_edges_.push_back(CfgEdge{f.id, src, dst});
      idx.succ[s->second].push_back(static_cast<uint32_t>(d->second));
      idx.out_edge_ids[s->second].push_back(id);
      idx.pred[d->second].push_back(static_cast<uint32_t>(s->second));
    }
    for (size_t bi = 0; bi < f.blocks.size(); ++bi) {
      location_index_[f.blocks[bi].location].push_back(
          BlockRef{f.id, f.blocks[bi].id});
    }
  }

  // Call edges: validate, then merge in the ones implied by annotations.
  std::set<CallEdge> unique;
  for (const CallEdge &e : call_edges_) {
    std::string desc = "call edge " + std::to_string(Raw(e.caller)) + "->" +
                       std::to_string(Raw(e.callee));
    auto caller = function_pos_.find(Raw(e.caller));
    if (caller == function_pos_.end() || !function_pos_.contains(Raw(e.callee))) {
      throw ValidationError(desc + " references an unknown function");
    }
    if (!index_[caller->second].block_pos.contains(Raw(e.call_site))) {
      throw ValidationError(desc + ": call site block " +
                            std::to_string(Raw(e.call_site)) +
                            " is not in the caller");
    }
    unique.insert(e);
  }
  for (const Function &f : functions_) {
    for (const BasicBlock &b : f.blocks) {
      if (b.callee) unique.insert(CallEdge{f.id, *b.callee, b.id});
    }
  }
  call_edges_.assign(unique.begin(), unique.end());

  callers_.assign(functions_.size(), {});
  callees_.assign(functions_.size(), {});
  for (const CallEdge &e : call_edges_) {
    size_t ci = function_pos_.at(Raw(e.caller));
    size_t ei = function_pos_.at(Raw(e.callee));
    index_[ci].call_targets[index_[ci].block_pos.at(Raw(e.call_site))]
        .push_back(e.callee);
    callers_[ei].push_back(e.caller);
    callees_[ci].push_back(e.callee);
  }
  for (auto *lists : {&callers_, &callees_}) {
    for (auto &v : *lists) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  for (BlockRef ref : UnreachableBlocks()) {
    Warn(warnings, "block " + ToString(ref) + " (" + block(ref).location +
                       ") is unreachable from its function entry");
  }
}

ProgramModel ProgramModel::FromJson(std::string_view text, Warnings *warnings) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ParseError(std::string("graph file: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("graph file must be a JSON object");
  const json &fns = Require(doc, "functions", "graph file");
  if (!fns.is_array()) throw ParseError("functions must be an array");
  std::vector<Function> functions;
  for (const json &f : fns) functions.push_back(ParseFunction(f, warnings));

  std::vector<CallEdge> call_edges;
  if (auto it = doc.find("call_edges"); it != doc.end()) {
    if (!it->is_array()) throw ParseError("call_edges must be an array");
    for (const json &e : *it) {
      if (!e.is_array() || e.size() != 3) {
        throw ParseError("call edge must be [caller, callee, call_site_block]");
      }
      call_edges.push_back(CallEdge{FunctionId{ReadId(e[0], "caller")},
                                    FunctionId{ReadId(e[1], "callee")},
                                    BlockId{ReadId(e[2], "call site")}});
    }
  }
  FunctionId entry{ReadId(Require(doc, "entry_function", "graph file"),
                          "entry_function")};
  WarnUnknownKeys(doc, {"functions", "call_edges", "entry_function"},
                  "graph file", warnings);
  return Build(std::move(functions), std::move(call_edges), entry, warnings);
}

ProgramModel ProgramModel::Load(const std::filesystem::path &path,
                                Warnings *warnings) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open graph file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return FromJson(buffer.str(), warnings);
}

std::string ProgramModel::ToJson() const {
  json doc;
  json fns = json::array();
  for (const Function &f : functions_) {
    json jf;
    jf["id"] = Raw(f.id);
    jf["name"] = f.name;
    jf["entry"] = Raw(f.entry_block);
    json blocks = json::array();
    for (const BasicBlock &b : f.blocks) {
      json jb{{"id", Raw(b.id)}, {"loc", b.location}};
      if (b.callee) jb["call"] = Raw(*b.callee);
      blocks.push_back(std::move(jb));
    }
    jf["blocks"] = std::move(blocks);
    json edges = json::array();
    for (const auto &[s, d] : f.edges) edges.push_back({Raw(s), Raw(d)});
    jf["edges"] = std::move(edges);
    fns.push_back(std::move(jf));
  }
  doc["functions"] = std::move(fns);
  json calls = json::array();
  for (const CallEdge &e : call_edges_) {
    calls.push_back({Raw(e.caller), Raw(e.callee), Raw(e.call_site)});
  }
  doc["call_edges"] = std::move(calls);
  doc["entry_function"] = Raw(entry_function_);
  return doc.dump(2);
}

bool ProgramModel::HasFunction(FunctionId f) const {
  return function_pos_.contains(Raw(f));
}

bool ProgramModel::HasBlock(BlockRef ref) const {
  auto it = function_pos_.find(Raw(ref.function));
  return it != function_pos_.end() &&
         index_[it->second].block_pos.contains(Raw(ref.block));
}

size_t ProgramModel::FunctionIndex(FunctionId f) const {
  auto it = function_pos_.find(Raw(f));
  if (it == function_pos_.end()) {
    throw UnknownId("unknown function id " + std::to_string(Raw(f)));
  }
  return it->second;
}

size_t ProgramModel::BlockIndex(size_t function_index, BlockId b) const {
  const auto &pos = index_.at(function_index).block_pos;
  auto it = pos.find(Raw(b));
  if (it == pos.end()) {
    throw UnknownId("unknown block id " + std::to_string(Raw(b)) +
                    " in function " +
                    std::to_string(Raw(functions_[function_index].id)));
  }
  return it->second;
}

const Function &ProgramModel::function(FunctionId f) const {
  return functions_[FunctionIndex(f)];
}

const BasicBlock &ProgramModel::block(BlockRef ref) const {
  size_t fi = FunctionIndex(ref.function);
  return functions_[fi].blocks[BlockIndex(fi, ref.block)];
}

std::optional<FunctionId> ProgramModel::FindFunctionByName(
    std::string_view name) const {
  for (const Function &f : functions_) {
    if (f.name == name) return f.id;
  }
  return std::nullopt;
}

std::vector<BlockId> ProgramModel::Successors(FunctionId f, BlockId b) const {
  size_t fi = FunctionIndex(f);
  size_t bi = BlockIndex(fi, b);
  std::vector<BlockId> out;
  for (uint32_t s : index_[fi].succ[bi]) out.push_back(functions_[fi].blocks[s].id);
  return out;
}

std::vector<BlockId> ProgramModel::Predecessors(FunctionId f, BlockId b) const {
  size_t fi = FunctionIndex(f);
  size_t bi = BlockIndex(fi, b);
  std::vector<BlockId> out;
  for (uint32_t p : index_[fi].pred[bi]) out.push_back(functions_[fi].blocks[p].id);
  std::sort(out.begin(), out.end());
  return out;
}

const CfgEdge &ProgramModel::edge(uint32_t id) const {
  if (id >= all_edges_.size()) {
    throw UnknownId("unknown CFG edge id " + std::to_string(id));
  }
  return all_edges_[id];
}

std::optional<uint32_t> ProgramModel::EdgeId(const CfgEdge &e) const {
  auto fit = function_pos_.find(Raw(e.function));
  if (fit == function_pos_.end()) return std::nullopt;
  const FunctionIndexData &idx = index_[fit->second];
  auto s = idx.block_pos.find(Raw(e.src));
  auto d = idx.block_pos.find(Raw(e.dst));
  if (s == idx.block_pos.end() || d == idx.block_pos.end()) return std::nullopt;
  const auto &succ = idx.succ[s->second];
  for (size_t k = 0; k < succ.size(); ++k) {
    if (succ[k] == d->second) return idx.out_edge_ids[s->second][k];
  }
  return std::nullopt;
}

std::vector<FunctionId> ProgramModel::Callers(FunctionId f) const {
  return callers_[FunctionIndex(f)];
}

std::vector<FunctionId> ProgramModel::Callees(FunctionId f) const {
  return callees_[FunctionIndex(f)];
}

std::vector<BlockRef> ProgramModel::FindLocation(std::string_view location) const {
  auto it = location_index_.find(std::string(location));
  if (it == location_index_.end()) return {};
  return it->second;
}

std::vector<BlockRef> ProgramModel::UnreachableBlocks() const {
  std::vector<BlockRef> out;
  for (size_t fi = 0; fi < functions_.size(); ++fi) {
    const Function &f = functions_[fi];
    std::vector<bool> seen(f.blocks.size(), false);
    std::vector<uint32_t> stack{
        static_cast<uint32_t>(index_[fi].block_pos.at(Raw(f.entry_block)))};
    seen[stack.back()] = true;
    while (!stack.empty()) {
      uint32_t b = stack.back();
      stack.pop_back();
      for (uint32_t s : index_[fi].succ[b]) {
        if (!seen[s]) {
          seen[s] = true;
          stack.push_back(s);
        }
      }
    }
    for (size_t bi = 0; bi < f.blocks.size(); ++bi) {
      if (!seen[bi]) out.push_back(BlockRef{f.id, f.blocks[bi].id});
    }
  }
  return out;
}

}  // namespace uafd
