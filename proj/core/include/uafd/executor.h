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

// Running the program under test. Two implementations share the Executor
// contract: a deterministic in-process interpreter over a guarded CFG model
// (SyntheticExecutor) and an out-of-process runner for instrumented targets
// that report through a feedback file (SubprocessExecutor).

#ifndef UAFD_EXECUTOR_H_
#define UAFD_EXECUTOR_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uafd/command.h"
#include "uafd/graph.h"
#include "uafd/runtime_metrics.h"
#include "uafd/static_metrics.h"

namespace uafd {

enum class InputMode : uint8_t { kFile, kStdin };

struct ExecRequest {
  std::span<const uint8_t> input;
  std::chrono::milliseconds timeout{1000};
  InputMode mode = InputMode::kFile;
};

class Executor {
 public:
  virtual ~Executor() = default;
  virtual ExecutionFeedback Execute(const ExecRequest &request) = 0;
};

// Entering a guarded block requires input[offset] == value.
struct ByteGuard {
  uint32_t offset = 0;
  uint8_t value = 0;
};

struct SyntheticProgram {
  ProgramModel model;
  std::map<BlockRef, ByteGuard> guards;
  std::map<BlockRef, UafEvent> actions;  // on the single abstract object
  std::set<BlockRef> crash_blocks;
  size_t input_length_bound = 0;

  // Throws ValidationError on unknown blocks or out-of-bound guard offsets.
  void Validate() const;

  // `graph_file` entries are resolved relative to `base_dir`.
  static SyntheticProgram FromJson(std::string_view text,
                                   const std::filesystem::path &base_dir = {},
                                   Warnings *warnings = nullptr);
  static SyntheticProgram Load(const std::filesystem::path &path,
                               Warnings *warnings = nullptr);
};

// Interprets the program from the entry function. At a branch the first
// successor whose guard holds is taken (unguarded successors always hold);
// a call block runs its callees before continuing. Runs exceeding
// `max_steps` blocks end with status kTimeout.
class SyntheticExecutor : public Executor {
 public:
  SyntheticExecutor(const SyntheticProgram &program, const StaticMetadata &meta,
                    uint64_t max_steps = 1 << 16);

  ExecutionFeedback Execute(const ExecRequest &request) override;
  // Reuses `fb`'s buffers.
  void Run(std::span<const uint8_t> input, ExecutionFeedback &fb) const;

  const SyntheticProgram &program() const { return program_; }

 private:
  struct BlockInfo {
    std::optional<ByteGuard> guard;
    std::optional<UafEvent> action;
    bool crashes = false;
    bool finite_distance = false;
    double distance = 0;
    std::vector<uint32_t> targets;
    std::vector<uint32_t> callees;  // function indices
  };

  // Returns false once the run has ended (crash or step limit).
  bool RunFunction(size_t fi, std::span<const uint8_t> input,
                   ExecutionFeedback &fb, uint64_t &steps, int depth) const;

  const SyntheticProgram &program_;
  uint64_t max_steps_;
  size_t entry_index_;
  std::vector<std::vector<BlockInfo>> blocks_;
};

// True iff the run allocated the abstract object, freed it, and then used or
// freed it again, with no re-allocation in between.
bool SyntheticUafCheck(const SyntheticProgram &program,
                       const ExecutionFeedback &fb);

// Feedback file written by instrumented targets (all integers little-endian):
//   "UAFB" | u32 version=1
//   | u32 n_edges   | n_edges   x (u32 edge_id, u32 hits)
//   | u32 n_targets | n_targets x u32 target_index   (execution order)
//   | u64 dist_sum_fixed (distance x 1000) | u32 block_count
inline constexpr uint32_t kFeedbackVersion = 1;
inline constexpr std::string_view kFeedbackMagic = "UAFB";
inline constexpr double kFeedbackFixedPointScale = 1000.0;

std::string EncodeFeedback(const ExecutionFeedback &fb);
// Edge ids >= edge_count go to unknown_edge_hits. Throws FeedbackDecodeError.
ExecutionFeedback DecodeFeedback(std::span<const uint8_t> bytes, size_t edge_count);

// Environment variable naming the feedback file the target must write.
inline constexpr const char *kFeedbackEnvVar = "UAFD_FEEDBACK_FILE";

class SubprocessExecutor : public Executor {
 public:
  // Throws TargetUnavailable if the program is missing or not executable.
  SubprocessExecutor(const CommandTemplate &command,
                     std::filesystem::path work_dir, size_t edge_count);

  ExecutionFeedback Execute(const ExecRequest &request) override;

  const std::filesystem::path &feedback_path() const { return feedback_path_; }

 private:
  CommandTemplate command_;
  std::filesystem::path work_dir_;
  std::filesystem::path input_path_;
  std::filesystem::path feedback_path_;
  size_t edge_count_;
};

}  // namespace uafd

#endif  // UAFD_EXECUTOR_H_
