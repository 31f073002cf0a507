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

#include "uafd/bugtrace.h"

#include <algorithm>
#include <fstream>
#include <memory>
#include <regex>
#include <sstream>

namespace uafd {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

bool IsNativeFormat(const std::vector<std::string_view> &lines) {
  for (std::string_view line : lines) {
    line = Trim(line);
    if (line == "[alloc]" || line == "[free]" || line == "[use]" ||
        line == "[double-free]") {
      return true;
    }
  }
  return false;
}

BugTrace ParseNative(const std::vector<std::string_view> &lines) {
  BugTrace trace;
  std::array<bool, 3> seen{};
  std::vector<StackFrame> *current = nullptr;
  for (std::string_view raw : lines) {
    std::string_view line = Trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      UafEvent event;
      if (line == "[alloc]") {
        event = UafEvent::kAlloc;
      } else if (line == "[free]") {
        event = UafEvent::kFree;
      } else if (line == "[use]") {
        event = UafEvent::kUse;
      } else if (line == "[double-free]") {
        event = UafEvent::kUse;
        trace.kind = BugKind::kDoubleFree;
      } else {
        throw ParseError("unknown section header '" + std::string(line) + "'");
      }
      if (seen[static_cast<size_t>(event)]) {
        throw ParseError("duplicate section " + std::string(line));
      }
      seen[static_cast<size_t>(event)] = true;
      current = &trace.stack(event);
      continue;
    }
    if (current == nullptr) {
      throw ParseError("frame outside of a section: '" + std::string(line) + "'");
    }
    size_t at = line.find('@');
    if (at == std::string_view::npos || at == 0 || at + 1 == line.size()) {
      throw ParseError("unreadable frame '" + std::string(line) +
                       "', expected function@location");
    }
    current->push_back(StackFrame{std::string(Trim(line.substr(0, at))),
                                  std::string(Trim(line.substr(at + 1))), ""});
  }
  if (!seen[0] || !seen[1] || !seen[2]) {
    throw ParseError("bug trace needs [alloc], [free] and [use] sections");
  }
  return trace;
}

// memcheck's allocator replacement lives in vgpreload_*.so.
bool IsTriagerFrame(std::string_view where) {
  return where.starts_with("in ") && where.find("vgpreload") != std::string_view::npos;
}

BugTrace ParseMemcheck(const std::vector<std::string_view> &lines) {
  static const std::regex kPrefix(R"(^\s*(==|--)\d+(==|--)\s?)");
  static const std::regex kFrame(
      R"(^(at|by)\s+(?:(0x[0-9A-Fa-f]+):\s+)?(.+?)\s+\((.*)\)\s*$)");

  BugTrace trace;
  enum class Section { kNone, kUse, kFree, kAlloc, kDone };
  Section section = Section::kNone;
  std::array<bool, 3> seen{};
  std::vector<StackFrame> *current = nullptr;

  for (std::string_view raw : lines) {
    std::string line = std::regex_replace(std::string(raw), kPrefix, "");
    std::string_view body = Trim(line);
    if (body.starts_with("Invalid read of size") ||
        body.starts_with("Invalid write of size") ||
        body.starts_with("Invalid free()")) {
      if (section == Section::kAlloc) break;  // next report
      if (section != Section::kNone) {
        // An earlier report lacked its free/alloc stacks; start over.
        trace = BugTrace{};
        seen = {};
      }
      trace.kind = body.starts_with("Invalid free()") ? BugKind::kDoubleFree
                                                      : BugKind::kUseAfterFree;
      section = Section::kUse;
      seen[2] = true;
      current = &trace.use_trace;
      continue;
    }
    if (section == Section::kNone) continue;
    if (body.find("free'd") != std::string_view::npos &&
        body.starts_with("Address")) {
      section = Section::kFree;
      seen[1] = true;
      current = &trace.free_trace;
      continue;
    }
    if (body.starts_with("Block was alloc'd at")) {
      section = Section::kAlloc;
      seen[0] = true;
      current = &trace.alloc_trace;
      continue;
    }
    std::smatch m;
    std::string body_str(body);
    if (current != nullptr && std::regex_match(body_str, m, kFrame)) {
      std::string address = m[2].str();
      std::string function = m[3].str();
      std::string where = m[4].str();
      if (IsTriagerFrame(where)) continue;
      std::string location;
      if (where.starts_with("in ")) {
        location = address.empty() ? where : address;
      } else {
        location = where;
      }
      current->push_back(StackFrame{function, location, address});
      continue;
    }
    if (body.empty()) {
      current = nullptr;
      if (section == Section::kAlloc) section = Section::kDone;
      if (section == Section::kDone) break;
    }
  }
  if (!seen[0] || !seen[1] || !seen[2]) {
    throw ParseError(
        "memcheck report must contain use, free'd and alloc'd stack sections");
  }
  for (UafEvent e : kAllEvents) {
    if (trace.stack(e).empty()) {
      throw ParseError("no readable frames in the " +
                       std::string(EventName(e)) + " stack");
    }
  }
  return trace;
}

struct TreeNode {
  std::string function_name;
  std::string location;
  std::string address;
  std::vector<UafEvent> events;  // events whose stack ends here
  std::vector<std::unique_ptr<TreeNode>> children;
  int min_event = 3;  // smallest event in the subtree, 3 = none
};

int ComputeMinEvent(TreeNode &node) {
  int m = 3;
  for (UafEvent e : node.events) m = std::min(m, static_cast<int>(e));
  for (auto &c : node.children) m = std::min(m, ComputeMinEvent(*c));
  node.min_event = m;
  return m;
}

void EmitTarget(const TreeNode &node, std::optional<UafEvent> event,
                std::vector<Target> &out) {
  out.push_back(Target{node.location, node.function_name, node.address, event,
                       std::nullopt});
}

// Preorder. A node that is the leaf of an event is tagged at its first visit
// when that event precedes everything below it; otherwise the tagged copy is
// emitted at the point in the sibling order where the event occurred.
void Emit(const TreeNode &node, std::vector<Target> &out) {
  std::vector<UafEvent> events = node.events;
  std::sort(events.begin(), events.end());
  size_t next = 0;
  auto before_child = [&](size_t child) {
    return next < events.size() &&
           (child >= node.children.size() ||
            static_cast<int>(events[next]) < node.children[child]->min_event);
  };
  if (before_child(0)) {
    EmitTarget(node, events[next++], out);
  } else {
    EmitTarget(node, std::nullopt, out);
  }
  for (size_t c = 0; c < node.children.size(); ++c) {
    while (before_child(c)) EmitTarget(node, events[next++], out);
    Emit(*node.children[c], out);
  }
  while (next < events.size()) EmitTarget(node, events[next++], out);
}

}  // namespace

std::string_view EventName(UafEvent event) {
  switch (event) {
    case UafEvent::kAlloc:
      return "alloc";
    case UafEvent::kFree:
      return "free";
    case UafEvent::kUse:
      return "use";
  }
  return "?";
}

std::string_view KindName(BugKind kind) {
  return kind == BugKind::kDoubleFree ? "df" : "uaf";
}

BugKind ParseKind(std::string_view name) {
  if (name == "uaf") return BugKind::kUseAfterFree;
  if (name == "df") return BugKind::kDoubleFree;
  throw ParseError("unknown bug kind '" + std::string(name) + "'");
}

const std::vector<StackFrame> &BugTrace::stack(UafEvent event) const {
  switch (event) {
    case UafEvent::kAlloc:
      return alloc_trace;
    case UafEvent::kFree:
      return free_trace;
    case UafEvent::kUse:
      break;
  }
  return use_trace;
}

std::vector<StackFrame> &BugTrace::stack(UafEvent event) {
  return const_cast<std::vector<StackFrame> &>(
      static_cast<const BugTrace *>(this)->stack(event));
}

size_t TargetSequence::event_index(UafEvent event) const {
  switch (event) {
    case UafEvent::kAlloc:
      return alloc_idx;
    case UafEvent::kFree:
      return free_idx;
    case UafEvent::kUse:
      break;
  }
  return use_idx;
}

bool TargetSequence::resolved() const {
  return std::all_of(targets.begin(), targets.end(),
                     [](const Target &t) { return t.block.has_value(); });
}

void TargetSequence::RecomputeEventIndices() {
  std::array<std::optional<size_t>, 3> found;
  for (size_t i = 0; i < targets.size(); ++i) {
    if (!targets[i].event) continue;
    auto &slot = found[static_cast<size_t>(*targets[i].event)];
    if (slot) {
      throw ValidationError("event " + std::string(EventName(*targets[i].event)) +
                            " tags more than one target");
    }
    slot = i;
  }
  for (UafEvent e : kAllEvents) {
    if (!found[static_cast<size_t>(e)]) {
      throw ValidationError("no target carries the " +
                            std::string(EventName(e)) + " event");
    }
  }
  alloc_idx = *found[0];
  free_idx = *found[1];
  use_idx = *found[2];
  if (!(alloc_idx < free_idx && free_idx < use_idx)) {
    throw ValidationError("event targets are out of alloc/free/use order");
  }
}

BugTrace ParseBugTraceText(std::string_view text) {
  auto lines = SplitLines(text);
  return IsNativeFormat(lines) ? ParseNative(lines) : ParseMemcheck(lines);
}

BugTrace ParseBugTrace(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open bug trace " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ParseBugTraceText(buffer.str());
}

std::string FormatNativeBugTrace(const BugTrace &trace) {
  std::string out;
  for (UafEvent e : kAllEvents) {
    if (e == UafEvent::kUse && trace.kind == BugKind::kDoubleFree) {
      out += "[double-free]\n";
    } else {
      out += "[" + std::string(EventName(e)) + "]\n";
    }
    for (const StackFrame &f : trace.stack(e)) {
      out += f.function_name + "@" + f.location + "\n";
    }
    out += "\n";
  }
  return out;
}

BugTrace TrimToProgram(const BugTrace &trace, const ProgramModel &model) {
  auto known = [&](const StackFrame &f) {
    return !model.FindLocation(f.location).empty() ||
           (!f.address.empty() && !model.FindLocation(f.address).empty());
  };
  BugTrace out = trace;
  for (UafEvent e : kAllEvents) {
    auto &frames = out.stack(e);
    auto first = std::find_if(frames.begin(), frames.end(), known);
    if (first == frames.end()) {
      throw UnresolvedEvent("no frame of the " + std::string(EventName(e)) +
                            " stack belongs to the program model");
    }
    frames.erase(frames.begin(), first);
  }
  return out;
}

TargetSequence Flatten(const BugTrace &trace) {
  for (UafEvent e : kAllEvents) {
    if (trace.stack(e).empty()) {
      throw ValidationError("empty " + std::string(EventName(e)) + " stack");
    }
  }
  const std::string &root_fn = trace.alloc_trace.back().function_name;
  for (UafEvent e : kAllEvents) {
    if (trace.stack(e).back().function_name != root_fn) {
      throw InconsistentRoot("outermost frames differ: " + root_fn + " vs " +
                             trace.stack(e).back().function_name);
    }
  }

  // Virtual root; its children are the outermost frames. A frame merges into
  // a sibling only if that sibling is the most recent child, so the preorder
  // follows the temporal order of the three events.
  TreeNode root;
  for (UafEvent e : kAllEvents) {
    TreeNode *node = &root;
    const auto &frames = trace.stack(e);
    for (auto it = frames.rbegin(); it != frames.rend(); ++it) {
      TreeNode *last =
          node->children.empty() ? nullptr : node->children.back().get();
      if (last != nullptr && last->function_name == it->function_name &&
          last->location == it->location) {
        node = last;
        continue;
      }
      auto child = std::make_unique<TreeNode>();
      child->function_name = it->function_name;
      child->location = it->location;
      child->address = it->address;
      node->children.push_back(std::move(child));
      node = node->children.back().get();
    }
    node->events.push_back(e);
  }
  ComputeMinEvent(root);

  TargetSequence seq;
  seq.kind = trace.kind;
  for (const auto &child : root.children) Emit(*child, seq.targets);
  seq.RecomputeEventIndices();
  return seq;
}

TargetSequence ResolveTargets(const TargetSequence &seq,
                              const ProgramModel &model, Warnings *warnings) {
  TargetSequence out;
  out.kind = seq.kind;
  for (const Target &t : seq.targets) {
    std::vector<BlockRef> candidates = model.FindLocation(t.location);
    if (!t.address.empty() && t.address != t.location) {
      for (BlockRef r : model.FindLocation(t.address)) {
        if (std::find(candidates.begin(), candidates.end(), r) ==
            candidates.end()) {
          candidates.push_back(r);
        }
      }
    }
    if (candidates.size() > 1) {
      std::vector<BlockRef> named;
      for (BlockRef r : candidates) {
        if (model.function(r.function).name == t.function_name) named.push_back(r);
      }
      if (named.size() != 1) {
        std::vector<std::string> desc;
        for (BlockRef r : candidates) {
          desc.push_back(model.function(r.function).name + "/" + ToString(r));
        }
        throw AmbiguousLocation(t.location, std::move(desc));
      }
      candidates = named;
    }
    if (candidates.empty()) {
      if (t.event) {
        throw UnresolvedEvent(std::string(EventName(*t.event)) + " target " +
                              t.function_name + "@" + t.location +
                              " has no matching block");
      }
      Warn(warnings, "dropping unresolved target " + t.function_name + "@" +
                         t.location);
      continue;
    }
    Target resolved = t;
    resolved.block = candidates.front();
    out.targets.push_back(std::move(resolved));
  }
  out.RecomputeEventIndices();
  return out;
}

}  // namespace uafd
