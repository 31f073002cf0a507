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

// Bug traces (alloc / free / use stack traces) and their flattening into an
// ordered target sequence.

#ifndef UAFD_BUGTRACE_H_
#define UAFD_BUGTRACE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uafd/error.h"
#include "uafd/graph.h"

namespace uafd {

// Ordered: alloc < free < use. For a double free the second free is kUse.
enum class UafEvent : uint8_t { kAlloc = 0, kFree = 1, kUse = 2 };
inline constexpr std::array<UafEvent, 3> kAllEvents = {
    UafEvent::kAlloc, UafEvent::kFree, UafEvent::kUse};

enum class BugKind : uint8_t { kUseAfterFree, kDoubleFree };

std::string_view EventName(UafEvent event);
std::string_view KindName(BugKind kind);
BugKind ParseKind(std::string_view name);

struct StackFrame {
  std::string function_name;
  // file:line when the report carries one, otherwise the code address.
  std::string location;
  // Raw code address, empty when unknown. Used as a fallback lookup key.
  std::string address;

  bool operator==(const StackFrame &) const = default;
};

struct BugTrace {
  // Every stack is innermost frame first.
  std::vector<StackFrame> alloc_trace;
  std::vector<StackFrame> free_trace;
  std::vector<StackFrame> use_trace;
  BugKind kind = BugKind::kUseAfterFree;

  const std::vector<StackFrame> &stack(UafEvent event) const;
  std::vector<StackFrame> &stack(UafEvent event);
  bool operator==(const BugTrace &) const = default;
};

struct Target {
  std::string location;
  std::string function_name;
  std::string address;
  std::optional<UafEvent> event;
  // Set by ResolveTargets.
  std::optional<BlockRef> block;

  bool operator==(const Target &) const = default;
};

struct TargetSequence {
  std::vector<Target> targets;
  size_t alloc_idx = 0;
  size_t free_idx = 0;
  size_t use_idx = 0;
  BugKind kind = BugKind::kUseAfterFree;

  size_t event_index(UafEvent event) const;
  bool resolved() const;
  // Recomputes alloc_idx/free_idx/use_idx from the event tags. Throws
  // ValidationError unless each event tags exactly one target, in order.
  void RecomputeEventIndices();
  bool operator==(const TargetSequence &) const = default;
};

// Accepts memcheck reports ("Invalid read/write", "Invalid free()") and the
// native format: `[alloc]`, `[free]`, `[use]` (or `[double-free]`) headers,
// each followed by `function@location` lines, innermost first.
BugTrace ParseBugTraceText(std::string_view text);
BugTrace ParseBugTrace(const std::filesystem::path &path);
std::string FormatNativeBugTrace(const BugTrace &trace);

// Drops the innermost frames of each stack that do not belong to the program
// (library code such as libc's vfprintf), so the event lands on the innermost
// frame the model knows. Throws UnresolvedEvent if a stack empties out.
BugTrace TrimToProgram(const BugTrace &trace, const ProgramModel &model);

// Merges the three stacks into one calling tree and returns its preorder.
TargetSequence Flatten(const BugTrace &trace);

// Binds every target to a block. Non-event targets that do not resolve are
// dropped with a warning; event targets must resolve.
TargetSequence ResolveTargets(const TargetSequence &seq,
                              const ProgramModel &model,
                              Warnings *warnings = nullptr);

}  // namespace uafd

#endif  // UAFD_BUGTRACE_H_
