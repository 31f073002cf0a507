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

#include "uafd/static_metrics.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

namespace uafd {
namespace {

using json = nlohmann::json;

std::set<FunctionId> ReverseReachable(const ProgramModel &model, FunctionId from) {
  std::set<FunctionId> seen{from};
  std::vector<FunctionId> work{from};
  while (!work.empty()) {
    FunctionId f = work.back();
    work.pop_back();
    for (FunctionId caller : model.Callers(f)) {
      if (seen.insert(caller).second) work.push_back(caller);
    }
  }
  return seen;
}

// One step of an event sequence the edge may cover: which functions can reach
// the event through calls, and which functions perform it in their own body.
struct EventSlot {
  std::function<bool(FunctionId)> reaches;
  std::function<bool(FunctionId)> performs;
};

// Downward: the caller runs the first k events, then the call covers the
// rest. Upward: the callee covers the first k events and returns, and the
// caller's own body performs the rest. Both sides must contribute.
bool CoversInSequence(const std::vector<EventSlot> &slots, FunctionId caller,
                      FunctionId callee) {
  const size_t n = slots.size();
  for (size_t k = 1; k < n; ++k) {
    bool down = true;
    bool up = true;
    for (size_t i = 0; i < n; ++i) {
      if (i < k) {
        down = down && slots[i].reaches(caller);
        up = up && slots[i].reaches(callee);
      } else {
        down = down && slots[i].reaches(callee);
        up = up && slots[i].performs(caller);
      }
    }
    if (down || up) return true;
  }
  return false;
}

json TargetToJson(const Target &t) {
  json j{{"function", t.function_name}, {"location", t.location}};
  if (!t.address.empty()) j["address"] = t.address;
  j["event"] = t.event ? json(EventName(*t.event)) : json(nullptr);
  if (t.block) j["block"] = {Raw(t.block->function), Raw(t.block->block)};
  return j;
}

Target TargetFromJson(const json &j) {
  Target t;
  t.function_name = j.at("function").get<std::string>();
  t.location = j.at("location").get<std::string>();
  if (auto it = j.find("address"); it != j.end()) t.address = it->get<std::string>();
  if (auto it = j.find("event"); it != j.end() && !it->is_null()) {
    auto name = it->get<std::string>();
    if (name == "alloc") {
      t.event = UafEvent::kAlloc;
    } else if (name == "free") {
      t.event = UafEvent::kFree;
    } else if (name == "use") {
      t.event = UafEvent::kUse;
    } else {
      throw ParseError("unknown event '" + name + "'");
    }
  }
  if (auto it = j.find("block"); it != j.end()) {
    t.block = BlockRef{FunctionId{it->at(0).get<uint32_t>()},
                       BlockId{it->at(1).get<uint32_t>()}};
  }
  return t;
}

// Edges are stored as [function, src, dst, edge_id].
json EdgesToJson(const std::set<CfgEdge> &edges,
                 const std::map<CfgEdge, uint32_t> &ids) {
  json out = json::array();
  for (const CfgEdge &e : edges) {
    out.push_back({Raw(e.function), Raw(e.src), Raw(e.dst), ids.at(e)});
  }
  return out;
}

void EdgesFromJson(const json &j, std::set<CfgEdge> &edges,
                   std::vector<uint32_t> &ids,
                   std::map<CfgEdge, uint32_t> &id_of) {
  for (const json &e : j) {
    CfgEdge edge{FunctionId{e.at(0).get<uint32_t>()},
                 BlockId{e.at(1).get<uint32_t>()},
                 BlockId{e.at(2).get<uint32_t>()}};
    auto id = e.at(3).get<uint32_t>();
    edges.insert(edge);
    ids.push_back(id);
    id_of[edge] = id;
  }
}

}  // namespace

const std::set<FunctionId> &CallerSets::For(UafEvent event) const {
  switch (event) {
    case UafEvent::kAlloc:
      return r_alloc;
    case UafEvent::kFree:
      return r_free;
    case UafEvent::kUse:
      break;
  }
  return r_use;
}

FunctionId CallerSets::FunctionOf(UafEvent event) const {
  switch (event) {
    case UafEvent::kAlloc:
      return alloc_function;
    case UafEvent::kFree:
      return free_function;
    case UafEvent::kUse:
      break;
  }
  return use_function;
}

CallerSets ComputeCallerSets(const ProgramModel &model, FunctionId alloc_function,
                             FunctionId free_function, FunctionId use_function) {
  CallerSets sets;
  sets.alloc_function = alloc_function;
  sets.free_function = free_function;
  sets.use_function = use_function;
  sets.r_alloc = ReverseReachable(model, alloc_function);
  sets.r_free = ReverseReachable(model, free_function);
  sets.r_use = ReverseReachable(model, use_function);
  return sets;
}

CallerSets ComputeCallerSets(const ProgramModel &model,
                             const TargetSequence &seq) {
  auto fn = [&](UafEvent e) -> FunctionId {
    const Target &t = seq.targets.at(seq.event_index(e));
    if (!t.block) {
      throw UnresolvedEvent(std::string(EventName(e)) + " target is unresolved");
    }
    return t.block->function;
  };
  return ComputeCallerSets(model, fn(UafEvent::kAlloc), fn(UafEvent::kFree),
                           fn(UafEvent::kUse));
}

double ThetaUaf(const ProgramModel &model, const CallerSets &callers,
                FunctionId caller, FunctionId callee, BugKind kind, double beta) {
  if (!model.HasFunction(caller) || !model.HasFunction(callee)) {
    throw UnknownEdge("call edge references an unknown function");
  }
  auto callees = model.Callees(caller);
  if (!std::binary_search(callees.begin(), callees.end(), callee)) {
    throw UnknownEdge("no call edge " + std::to_string(Raw(caller)) + "->" +
                      std::to_string(Raw(callee)));
  }
  std::vector<EventSlot> uaf;
  for (UafEvent e : kAllEvents) {
    uaf.push_back(EventSlot{
        [&, e](FunctionId f) { return callers.For(e).contains(f); },
        [&, e](FunctionId f) { return f == callers.FunctionOf(e); }});
  }
  if (CoversInSequence(uaf, caller, callee)) return beta;

  if (kind == BugKind::kDoubleFree) {
    // Two frees in sequence; either free site may play either role.
    EventSlot any_free{
        [&](FunctionId f) {
          return callers.r_free.contains(f) || callers.r_use.contains(f);
        },
        [&](FunctionId f) {
          return f == callers.free_function || f == callers.use_function;
        }};
    if (CoversInSequence({any_free, any_free}, caller, callee)) return beta;
  }
  return 1.0;
}

std::vector<size_t> WeightedCallGraph::FavoredEdges() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].favored) out.push_back(i);
  }
  return out;
}

WeightedCallGraph BuildWeightedCallGraph(const ProgramModel &model,
                                         const CallerSets &callers, BugKind kind,
                                         double beta, const BaseWeightTable *base) {
  WeightedCallGraph wcg;
  for (const Function &f : model.functions()) wcg.functions.push_back(f.id);
  std::set<std::pair<FunctionId, FunctionId>> pairs;
  for (const CallEdge &e : model.call_edges()) pairs.emplace(e.caller, e.callee);
  for (const auto &[caller, callee] : pairs) {
    WeightedCallEdge edge{caller, callee};
    if (base != nullptr) {
      if (auto it = base->find({caller, callee}); it != base->end()) {
        if (!(it->second > 0)) {
          throw ValidationError("base call edge weights must be positive");
        }
        edge.base_weight = it->second;
      }
    }
    double theta = ThetaUaf(model, callers, caller, callee, kind, beta);
    edge.favored = theta != 1.0;
    edge.weight = edge.base_weight * theta;
    wcg.edges.push_back(edge);
  }
  return wcg;
}

std::map<FunctionId, double> FunctionDistance(const WeightedCallGraph &wcg,
                                              FunctionId use_function) {
  std::map<FunctionId, double> dist;
  for (FunctionId f : wcg.functions) dist[f] = kInfiniteDistance;
  std::map<FunctionId, std::vector<std::pair<FunctionId, double>>> reverse;
  for (const WeightedCallEdge &e : wcg.edges) {
    reverse[e.callee].emplace_back(e.caller, e.weight);
  }
  using Item = std::pair<double, uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[use_function] = 0.0;
  queue.emplace(0.0, Raw(use_function));
  while (!queue.empty()) {
    auto [d, raw] = queue.top();
    queue.pop();
    FunctionId f{raw};
    if (d > dist[f]) continue;
    for (const auto &[caller, w] : reverse[f]) {
      double nd = d + w;
      if (nd < dist[caller]) {
        dist[caller] = nd;
        queue.emplace(nd, Raw(caller));
      }
    }
  }
  return dist;
}

std::vector<double> BlockDistances(const ProgramModel &model,
                                   const std::map<FunctionId, double> &fdist,
                                   FunctionId f,
                                   const std::set<BlockRef> &event_blocks,
                                   double c_scale) {
  const size_t fi = model.FunctionIndex(f);
  const Function &fn = model.functions()[fi];
  std::vector<double> dist(fn.blocks.size(), kInfiniteDistance);
  using Item = std::pair<double, uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  for (size_t bi = 0; bi < fn.blocks.size(); ++bi) {
    double seed = kInfiniteDistance;
    if (event_blocks.contains(BlockRef{f, fn.blocks[bi].id})) seed = 0.0;
    for (FunctionId callee : model.CallTargets(fi, bi)) {
      auto it = fdist.find(callee);
      if (it != fdist.end() && IsFiniteDistance(it->second)) {
        seed = std::min(seed, it->second);
      }
    }
    if (IsFiniteDistance(seed)) {
      dist[bi] = seed;
      queue.emplace(seed, static_cast<uint32_t>(bi));
    }
  }
  while (!queue.empty()) {
    auto [d, bi] = queue.top();
    queue.pop();
    if (d > dist[bi]) continue;
    for (uint32_t p : model.PredecessorIndices(fi, bi)) {
      double nd = d + c_scale;
      if (nd < dist[p]) {
        dist[p] = nd;
        queue.emplace(nd, p);
      }
    }
  }
  return dist;
}

double BlockDistance(const ProgramModel &model,
                     const std::map<FunctionId, double> &fdist, FunctionId f,
                     BlockId m, const std::set<BlockRef> &event_blocks,
                     double c_scale) {
  size_t fi = model.FunctionIndex(f);
  size_t bi = model.BlockIndex(fi, m);
  return BlockDistances(model, fdist, f, event_blocks, c_scale)[bi];
}

CutEdgeSets CalculateCutEdges(const ProgramModel &model, FunctionId f,
                              BlockId source, BlockId sink) {
  const size_t fi = model.FunctionIndex(f);
  const size_t src = model.BlockIndex(fi, source);
  const size_t dst = model.BlockIndex(fi, sink);
  const Function &fn = model.functions()[fi];
  const size_t n = fn.blocks.size();

  auto closure = [&](size_t start, bool forward) {
    std::vector<bool> seen(n, false);
    std::vector<size_t> work{start};
    seen[start] = true;
    while (!work.empty()) {
      size_t b = work.back();
      work.pop_back();
      auto next = forward ? model.SuccessorIndices(fi, b)
                          : model.PredecessorIndices(fi, b);
      for (uint32_t s : next) {
        if (!seen[s]) {
          seen[s] = true;
          work.push_back(s);
        }
      }
    }
    return seen;
  };
  const std::vector<bool> from_source = closure(src, true);
  const std::vector<bool> reaches_sink = closure(dst, false);

  CutEdgeSets out;
  for (size_t b = 0; b < n; ++b) {
    auto succ = model.SuccessorIndices(fi, b);
    if (succ.size() < 2 || !from_source[b] || !reaches_sink[b]) continue;
    for (uint32_t s : succ) {
      CfgEdge e{f, fn.blocks[b].id, fn.blocks[s].id};
      (reaches_sink[s] ? out.cut : out.noncut).insert(e);
    }
  }
  return out;
}

CutEdgeSets AccumulateCutEdges(const ProgramModel &model,
                               const TargetSequence &seq, Warnings *warnings) {
  CutEdgeSets acc;
  for (size_t i = 1; i < seq.targets.size(); ++i) {
    const Target &prev = seq.targets[i - 1];
    const Target &cur = seq.targets[i];
    if (!prev.block || !cur.block) {
      throw UnresolvedEvent("cut edges need resolved targets");
    }
    CutEdgeSets pair;
    if (prev.block->function == cur.block->function) {
      pair = CalculateCutEdges(model, cur.block->function, prev.block->block,
                               cur.block->block);
    } else {
      size_t fi = model.FunctionIndex(prev.block->function);
      auto targets = model.CallTargets(fi, model.BlockIndex(fi, prev.block->block));
      if (std::find(targets.begin(), targets.end(), cur.block->function) ==
          targets.end()) {
        Warn(warnings, "skipping target pair " + prev.function_name + "@" +
                           prev.location + " -> " + cur.function_name + "@" +
                           cur.location + ": neither same function nor a call");
        continue;
      }
      pair = CalculateCutEdges(model, cur.block->function,
                               model.function(cur.block->function).entry_block,
                               cur.block->block);
    }
    acc.cut.insert(pair.cut.begin(), pair.cut.end());
    acc.noncut.insert(pair.noncut.begin(), pair.noncut.end());
  }
  for (const CfgEdge &e : acc.cut) acc.noncut.erase(e);
  return acc;
}

size_t StaticMetadata::favored_edge_count() const {
  return static_cast<size_t>(std::count_if(
      call_graph.begin(), call_graph.end(),
      [](const WeightedCallEdge &e) { return e.favored; }));
}

double StaticMetadata::BlockDistanceOf(BlockRef ref) const {
  auto it = block_distance.find(ref);
  return it == block_distance.end() ? kInfiniteDistance : it->second;
}

StaticMetadata Analyze(const ProgramModel &model, const TargetSequence &resolved,
                       const AnalysisOptions &options, Warnings *warnings) {
  if (!(options.beta > 0 && options.beta <= 1)) {
    throw ConfigError("beta must be in (0, 1]");
  }
  if (!(options.c_scale > 0)) throw ConfigError("c_scale must be positive");
  if (!resolved.resolved()) throw UnresolvedEvent("target sequence is unresolved");

  StaticMetadata meta;
  meta.kind = resolved.kind;
  meta.beta = options.beta;
  meta.c_scale = options.c_scale;
  meta.edge_count = model.edge_count();
  meta.targets = resolved;

  CallerSets callers = ComputeCallerSets(model, resolved);
  WeightedCallGraph wcg = BuildWeightedCallGraph(
      model, callers, resolved.kind, options.beta, options.base_weights);
  meta.call_graph = wcg.edges;
  meta.function_distance = FunctionDistance(wcg, callers.use_function);

  std::set<BlockRef> event_blocks;
  for (UafEvent e : kAllEvents) {
    event_blocks.insert(*resolved.targets[resolved.event_index(e)].block);
  }
  for (const Function &f : model.functions()) {
    auto dist = BlockDistances(model, meta.function_distance, f.id, event_blocks,
                               options.c_scale);
    for (size_t bi = 0; bi < f.blocks.size(); ++bi) {
      meta.block_distance[BlockRef{f.id, f.blocks[bi].id}] = dist[bi];
    }
  }

  CutEdgeSets cut = AccumulateCutEdges(model, resolved, warnings);
  meta.cut_edges = std::move(cut.cut);
  meta.noncut_edges = std::move(cut.noncut);
  for (const auto *edges : {&meta.cut_edges, &meta.noncut_edges}) {
    auto &ids = edges == &meta.cut_edges ? meta.cut_edge_ids : meta.noncut_edge_ids;
    for (const CfgEdge &e : *edges) {
      uint32_t id = *model.EdgeId(e);
      ids.push_back(id);
      meta.decision_edge_ids[e] = id;
    }
    std::sort(ids.begin(), ids.end());
  }
  return meta;
}

std::string StaticMetadata::ToJson() const {
  json doc;
  doc["format"] = "uafd-static-metadata";
  doc["version"] = 1;
  doc["kind"] = KindName(kind);
  doc["beta"] = beta;
  doc["c_scale"] = c_scale;
  doc["edge_count"] = edge_count;
  json ts = json::array();
  for (const Target &t : targets.targets) ts.push_back(TargetToJson(t));
  doc["targets"] = std::move(ts);
  json fd = json::array();
  for (const auto &[f, d] : function_distance) fd.push_back({Raw(f), d});
  doc["function_distance"] = std::move(fd);
  json bd = json::array();
  for (const auto &[ref, d] : block_distance) {
    bd.push_back({Raw(ref.function), Raw(ref.block), d});
  }
  doc["block_distance"] = std::move(bd);
  json cg = json::array();
  for (const WeightedCallEdge &e : call_graph) {
    cg.push_back({{"caller", Raw(e.caller)},
                  {"callee", Raw(e.callee)},
                  {"base_weight", e.base_weight},
                  {"weight", e.weight},
                  {"favored", e.favored}});
  }
  doc["call_graph"] = std::move(cg);
  doc["cut_edges"] = EdgesToJson(cut_edges, decision_edge_ids);
  doc["noncut_edges"] = EdgesToJson(noncut_edges, decision_edge_ids);
  return doc.dump(1);
}

StaticMetadata StaticMetadata::FromJson(std::string_view text) {
  StaticMetadata meta;
  try {
    json doc = json::parse(text);
    if (doc.value("format", "") != "uafd-static-metadata") {
      throw ParseError("not a uafd static metadata file");
    }
    meta.kind = ParseKind(doc.at("kind").get<std::string>());
    meta.beta = doc.at("beta").get<double>();
    meta.c_scale = doc.at("c_scale").get<double>();
    meta.edge_count = doc.at("edge_count").get<size_t>();
    meta.targets.kind = meta.kind;
    for (const json &t : doc.at("targets")) {
      meta.targets.targets.push_back(TargetFromJson(t));
    }
    meta.targets.RecomputeEventIndices();
    for (const json &e : doc.at("function_distance")) {
      meta.function_distance[FunctionId{e.at(0).get<uint32_t>()}] =
          e.at(1).get<double>();
    }
    for (const json &e : doc.at("block_distance")) {
      meta.block_distance[BlockRef{FunctionId{e.at(0).get<uint32_t>()},
                                   BlockId{e.at(1).get<uint32_t>()}}] =
          e.at(2).get<double>();
    }
    for (const json &e : doc.at("call_graph")) {
      meta.call_graph.push_back(WeightedCallEdge{
          FunctionId{e.at("caller").get<uint32_t>()},
          FunctionId{e.at("callee").get<uint32_t>()},
          e.at("base_weight").get<double>(), e.at("weight").get<double>(),
          e.at("favored").get<bool>()});
    }
    EdgesFromJson(doc.at("cut_edges"), meta.cut_edges, meta.cut_edge_ids,
                  meta.decision_edge_ids);
    EdgesFromJson(doc.at("noncut_edges"), meta.noncut_edges,
                  meta.noncut_edge_ids, meta.decision_edge_ids);
  } catch (const json::exception &e) {
    throw ParseError(std::string("static metadata: ") + e.what());
  } catch (const ValidationError &e) {
    throw ParseError(std::string("static metadata: ") + e.what());
  }
  std::sort(meta.cut_edge_ids.begin(), meta.cut_edge_ids.end());
  std::sort(meta.noncut_edge_ids.begin(), meta.noncut_edge_ids.end());
  return meta;
}

void StaticMetadata::Save(const std::filesystem::path &path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << ToJson() << "\n";
}

StaticMetadata StaticMetadata::Load(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open static metadata " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return FromJson(buffer.str());
}

}  // namespace uafd
