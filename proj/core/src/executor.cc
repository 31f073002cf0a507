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

#include "uafd/executor.h"

#include <signal.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace uafd {
namespace {

using json = nlohmann::json;

BlockRef ReadBlockRef(const json &j) {
  return BlockRef{FunctionId{j.at("function").get<uint32_t>()},
                  BlockId{j.at("block").get<uint32_t>()}};
}

UafEvent ParseAction(const std::string &name) {
  if (name == "alloc") return UafEvent::kAlloc;
  if (name == "free") return UafEvent::kFree;
  if (name == "use") return UafEvent::kUse;
  throw ParseError("unknown synthetic action '" + name + "'");
}

void PutU32(std::string &out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU64(std::string &out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  uint64_t Read(int width, const char *what) {
    if (bytes_.size() - pos_ < static_cast<size_t>(width)) {
      throw FeedbackDecodeError(std::string("feedback truncated in ") + what);
    }
    uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }
  uint32_t U32(const char *what) { return static_cast<uint32_t>(Read(4, what)); }
  uint64_t U64(const char *what) { return Read(8, what); }
  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace

void SyntheticProgram::Validate() const {
  auto check = [&](BlockRef ref, const char *what) {
    if (!model.HasBlock(ref)) {
      throw ValidationError(std::string(what) + " references unknown block " +
                            ToString(ref));
    }
  };
  for (const auto &[ref, guard] : guards) {
    check(ref, "guard");
    if (guard.offset >= input_length_bound) {
      throw ValidationError("guard on " + ToString(ref) + " reads offset " +
                            std::to_string(guard.offset) +
                            " beyond the input length bound " +
                            std::to_string(input_length_bound));
    }
  }
  for (const auto &[ref, action] : actions) check(ref, "action");
  for (BlockRef ref : crash_blocks) check(ref, "crash block");
}

SyntheticProgram SyntheticProgram::FromJson(std::string_view text,
                                            const std::filesystem::path &base_dir,
                                            Warnings *warnings) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ParseError(std::string("synthetic program: ") + e.what());
  }
  SyntheticProgram p;
  if (auto it = doc.find("graph"); it != doc.end()) {
    p.model = ProgramModel::FromJson(it->dump(), warnings);
  } else if (auto file = doc.find("graph_file"); file != doc.end()) {
    std::filesystem::path path = file->get<std::string>();
    if (path.is_relative()) path = base_dir / path;
    p.model = ProgramModel::Load(path, warnings);
  } else {
    throw ParseError("synthetic program needs 'graph' or 'graph_file'");
  }
  try {
    p.input_length_bound = doc.at("input_length_bound").get<size_t>();
    for (const json &g : doc.value("guards", json::array())) {
      const json &eq = g.at("equals");
      uint8_t value;
      if (eq.is_string() && eq.get<std::string>().size() == 1) {
        value = static_cast<uint8_t>(eq.get<std::string>()[0]);
      } else if (eq.is_number_unsigned() && eq.get<uint32_t>() <= 0xff) {
        value = static_cast<uint8_t>(eq.get<uint32_t>());
      } else {
        throw ParseError("guard 'equals' must be one character or a byte");
      }
      p.guards[ReadBlockRef(g)] = ByteGuard{g.at("offset").get<uint32_t>(), value};
    }
    for (const json &a : doc.value("actions", json::array())) {
      p.actions[ReadBlockRef(a)] = ParseAction(a.at("action").get<std::string>());
    }
    for (const json &c : doc.value("crashes", json::array())) {
      p.crash_blocks.insert(ReadBlockRef(c));
    }
  } catch (const json::exception &e) {
    throw ParseError(std::string("synthetic program: ") + e.what());
  }
  p.Validate();
  return p;
}

SyntheticProgram SyntheticProgram::Load(const std::filesystem::path &path,
                                        Warnings *warnings) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open synthetic program " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return FromJson(buffer.str(), path.parent_path(), warnings);
}

SyntheticExecutor::SyntheticExecutor(const SyntheticProgram &program,
                                     const StaticMetadata &meta, uint64_t max_steps)
    : program_(program), max_steps_(max_steps) {
  const ProgramModel &model = program_.model;
  if (meta.edge_count != model.edge_count()) {
    throw ValidationError("static metadata was computed for a different model");
  }
  entry_index_ = model.FunctionIndex(model.entry_function());
  blocks_.resize(model.functions().size());
  for (size_t fi = 0; fi < model.functions().size(); ++fi) {
    const Function &f = model.functions()[fi];
    blocks_[fi].resize(f.blocks.size());
    for (size_t bi = 0; bi < f.blocks.size(); ++bi) {
      BlockRef ref{f.id, f.blocks[bi].id};
      BlockInfo &info = blocks_[fi][bi];
      if (auto it = program_.guards.find(ref); it != program_.guards.end()) {
        info.guard = it->second;
      }
      if (auto it = program_.actions.find(ref); it != program_.actions.end()) {
        info.action = it->second;
      }
      info.crashes = program_.crash_blocks.contains(ref);
      double d = meta.BlockDistanceOf(ref);
      info.finite_distance = IsFiniteDistance(d);
      info.distance = info.finite_distance ? d : 0.0;
      for (FunctionId callee : model.CallTargets(fi, bi)) {
        info.callees.push_back(static_cast<uint32_t>(model.FunctionIndex(callee)));
      }
    }
  }
  for (size_t i = 0; i < meta.targets.targets.size(); ++i) {
    const Target &t = meta.targets.targets[i];
    if (!t.block) throw UnresolvedEvent("static metadata has unresolved targets");
    size_t fi = model.FunctionIndex(t.block->function);
    blocks_[fi][model.BlockIndex(fi, t.block->block)].targets.push_back(
        static_cast<uint32_t>(i));
  }
}

ExecutionFeedback SyntheticExecutor::Execute(const ExecRequest &request) {
  ExecutionFeedback fb;
  Run(request.input, fb);
  return fb;
}

void SyntheticExecutor::Run(std::span<const uint8_t> input,
                            ExecutionFeedback &fb) const {
  fb.edge_hits.assign(program_.model.edge_count(), 0);
  fb.unknown_edge_hits = 0;
  fb.target_hits.clear();
  fb.dist_sum = 0;
  fb.block_count = 0;
  fb.status = ExecStatus{};
  fb.object_events.clear();
  uint64_t steps = 0;
  RunFunction(entry_index_, input, fb, steps, 0);
}

bool SyntheticExecutor::RunFunction(size_t fi, std::span<const uint8_t> input,
                                    ExecutionFeedback &fb, uint64_t &steps,
                                    int depth) const {
  constexpr int kMaxDepth = 256;
  const ProgramModel &model = program_.model;
  const Function &fn = model.functions()[fi];
  if (depth > kMaxDepth) {
    fb.status = ExecStatus{ExitKind::kTimeout, 0};
    return false;
  }
  size_t bi = model.BlockIndex(fi, fn.entry_block);
  while (true) {
    if (++steps > max_steps_) {
      fb.status = ExecStatus{ExitKind::kTimeout, 0};
      return false;
    }
    const BlockInfo &info = blocks_[fi][bi];
    if (info.finite_distance) {
      fb.dist_sum += info.distance;
      ++fb.block_count;
    }
    fb.target_hits.insert(fb.target_hits.end(), info.targets.begin(),
                          info.targets.end());
    if (info.action) {
      fb.object_events.push_back(
          ObjectEvent{*info.action, BlockRef{fn.id, fn.blocks[bi].id}});
    }
    if (info.crashes) {
      fb.status = ExecStatus{ExitKind::kCrash, SIGSEGV};
      return false;
    }
    for (uint32_t callee : info.callees) {
      if (!RunFunction(callee, input, fb, steps, depth + 1)) return false;
    }
    auto succ = model.SuccessorIndices(fi, bi);
    auto edge_ids = model.OutEdgeIds(fi, bi);
    size_t next = succ.size();
    for (size_t k = 0; k < succ.size(); ++k) {
      const auto &guard = blocks_[fi][succ[k]].guard;
      if (!guard || (guard->offset < input.size() &&
                     input[guard->offset] == guard->value)) {
        next = k;
        break;
      }
    }
    if (next == succ.size()) return true;  // return from function
    ++fb.edge_hits[edge_ids[next]];
    bi = succ[next];
  }
}

bool SyntheticUafCheck(const SyntheticProgram &program,
                       const ExecutionFeedback &fb) {
  (void)program;
  enum class State { kNone, kAllocated, kFreed } state = State::kNone;
  for (const ObjectEvent &e : fb.object_events) {
    switch (e.action) {
      case UafEvent::kAlloc:
        state = State::kAllocated;
        break;
      case UafEvent::kFree:
        if (state == State::kFreed) return true;  // double free
        if (state == State::kAllocated) state = State::kFreed;
        break;
      case UafEvent::kUse:
        if (state == State::kFreed) return true;
        break;
    }
  }
  return false;
}

std::string EncodeFeedback(const ExecutionFeedback &fb) {
  std::string out(kFeedbackMagic);
  PutU32(out, kFeedbackVersion);
  uint32_t n_edges = 0;
  for (uint32_t h : fb.edge_hits) n_edges += h > 0;
  PutU32(out, n_edges);
  for (size_t id = 0; id < fb.edge_hits.size(); ++id) {
    if (fb.edge_hits[id] == 0) continue;
    PutU32(out, static_cast<uint32_t>(id));
    PutU32(out, fb.edge_hits[id]);
  }
  PutU32(out, static_cast<uint32_t>(fb.target_hits.size()));
  for (uint32_t t : fb.target_hits) PutU32(out, t);
  PutU64(out, static_cast<uint64_t>(fb.dist_sum * kFeedbackFixedPointScale + 0.5));
  PutU32(out, static_cast<uint32_t>(fb.block_count));
  return out;
}

ExecutionFeedback DecodeFeedback(std::span<const uint8_t> bytes, size_t edge_count) {
  if (bytes.size() < 8 ||
      std::memcmp(bytes.data(), kFeedbackMagic.data(), kFeedbackMagic.size()) != 0) {
    throw FeedbackDecodeError("feedback file lacks the UAFB header");
  }
  Reader r(bytes.subspan(4));
  uint32_t version = r.U32("version");
  if (version != kFeedbackVersion) {
    throw FeedbackDecodeError("unsupported feedback version " +
                              std::to_string(version));
  }
  ExecutionFeedback fb;
  fb.edge_hits.assign(edge_count, 0);
  uint32_t n_edges = r.U32("edge count");
  if (r.remaining() / 8 < n_edges) throw FeedbackDecodeError("feedback truncated in edges");
  for (uint32_t i = 0; i < n_edges; ++i) {
    uint32_t id = r.U32("edge id");
    uint32_t hits = r.U32("edge hits");
    if (id < edge_count) {
      fb.edge_hits[id] += hits;
    } else {
      fb.unknown_edge_hits += hits;
    }
  }
  uint32_t n_targets = r.U32("target count");
  if (r.remaining() / 4 < n_targets) {
    throw FeedbackDecodeError("feedback truncated in target hits");
  }
  fb.target_hits.reserve(n_targets);
  for (uint32_t i = 0; i < n_targets; ++i) fb.target_hits.push_back(r.U32("target"));
  fb.dist_sum = static_cast<double>(r.U64("distance sum")) / kFeedbackFixedPointScale;
  fb.block_count = r.U32("block count");
  if (r.remaining() != 0) throw FeedbackDecodeError("trailing bytes in feedback file");
  if (fb.block_count == 0 && fb.dist_sum != 0) {
    throw FeedbackDecodeError("distance sum without executed blocks");
  }
  return fb;
}

SubprocessExecutor::SubprocessExecutor(const CommandTemplate &command,
                                       std::filesystem::path work_dir,
                                       size_t edge_count)
    : command_(command), work_dir_(std::move(work_dir)), edge_count_(edge_count) {
  if (!IsExecutable(command_.program())) {
    throw TargetUnavailable("target '" + command_.program() +
                            "' is missing or not executable");
  }
  std::filesystem::create_directories(work_dir_);
  input_path_ = work_dir_ / ".cur_input";
  feedback_path_ = work_dir_ / ".cur_feedback";
}

ExecutionFeedback SubprocessExecutor::Execute(const ExecRequest &request) {
  {
    std::ofstream out(input_path_, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char *>(request.input.data()),
              static_cast<std::streamsize>(request.input.size()));
  }
  std::error_code ec;
  std::filesystem::remove(feedback_path_, ec);

  ProcessSpec spec;
  spec.argv = command_.Instantiate(input_path_.string());
  if (request.mode == InputMode::kStdin || command_.reads_stdin()) {
    spec.stdin_path = input_path_.string();
  }
  spec.extra_env.emplace_back(kFeedbackEnvVar, feedback_path_.string());
  spec.timeout = request.timeout;
  ProcessResult result = RunProcess(spec);

  ExecStatus status;
  if (result.timed_out) {
    status = ExecStatus{ExitKind::kTimeout, 0};
  } else if (result.signaled) {
    status = ExecStatus{ExitKind::kCrash, result.signal};
  }

  std::vector<uint8_t> bytes;
  if (std::ifstream in(feedback_path_, std::ios::binary); in) {
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  } else if (status.kind == ExitKind::kNormal) {
    throw FeedbackDecodeError("target did not write " + feedback_path_.string());
  }

  ExecutionFeedback fb;
  if (!bytes.empty() || status.kind == ExitKind::kNormal) {
    try {
      fb = DecodeFeedback(bytes, edge_count_);
    } catch (const FeedbackDecodeError &) {
      if (status.kind == ExitKind::kNormal) throw;
      fb = ExecutionFeedback{};  // partial file of a killed run scores as empty
    }
  }
  if (fb.edge_hits.empty()) fb.edge_hits.assign(edge_count_, 0);
  fb.status = status;
  return fb;
}

}  // namespace uafd
