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

// Post-campaign triage: keep only the inputs whose persisted scores say they
// covered alloc, free and use in order (plus crashes), confirm those with a
// memory-error detector and group the confirmed ones by bug trace.

#ifndef UAFD_TRIAGE_H_
#define UAFD_TRIAGE_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uafd/bugtrace.h"
#include "uafd/command.h"
#include "uafd/executor.h"
#include "uafd/runtime_metrics.h"

namespace uafd {

struct CorpusEntry {
  std::string id;  // path relative to the corpus root, e.g. "queue/id_000003"
  SimilarityTuple sim;
  double dist = kInfiniteDistance;
  double cut_score = 0;
  bool crashed = false;
};

struct Corpus {
  std::filesystem::path root;
  std::vector<CorpusEntry> entries;

  std::filesystem::path PathOf(const CorpusEntry &e) const { return root / e.id; }
  std::vector<uint8_t> ReadInput(const CorpusEntry &e) const;

  // Reads the corpus_meta index. A directory without index or inputs is an
  // empty corpus. Throws CorpusReadError on malformed or dangling entries.
  static Corpus Load(const std::filesystem::path &root);
};

// Indices of the entries covering every UAF event in order, plus crashes.
std::vector<size_t> Preidentify(const Corpus &corpus);

struct TriageVerdict {
  std::string input_id;
  bool sent_to_triager = false;
  bool confirmed = false;
  bool timed_out = false;
  std::optional<BugTrace> bug_trace;
  std::chrono::duration<double> triager_seconds{0};
};

class Triager {
 public:
  virtual ~Triager() = default;
  // Must be safe to call from several threads at once.
  virtual TriageVerdict Confirm(const Corpus &corpus, const CorpusEntry &entry) = 0;
};

// True if a detector report shows a use-after-free ("Invalid read/write" of a
// block that was free'd) or a double free ("Invalid free()").
bool HasUafSignature(std::string_view report);

inline constexpr std::chrono::seconds kDefaultTriagerTimeout{60};

class SubprocessTriager : public Triager {
 public:
  // Throws TriagerUnavailable if the triager program cannot be run.
  SubprocessTriager(const CommandTemplate &command, std::filesystem::path work_dir,
                    std::chrono::milliseconds timeout = kDefaultTriagerTimeout);

  TriageVerdict Confirm(const Corpus &corpus, const CorpusEntry &entry) override;

 private:
  CommandTemplate command_;
  std::filesystem::path work_dir_;
  std::chrono::milliseconds timeout_;
};

// Replays inputs on the synthetic program; the bug trace is made of the
// blocks performing the offending alloc, free and use.
class SyntheticTriager : public Triager {
 public:
  SyntheticTriager(const SyntheticProgram &program, const StaticMetadata &meta);

  TriageVerdict Confirm(const Corpus &corpus, const CorpusEntry &entry) override;

 private:
  SyntheticExecutor executor_;
};

// Builds the alloc/free/use trace of the first violation in `fb`, if any.
std::optional<BugTrace> SyntheticBugTrace(const SyntheticProgram &program,
                                          const ExecutionFeedback &fb);

// 64-bit FNV-1a over the (function, location) frames of the three stacks, as
// 16 hex digits. Raw addresses are ignored.
std::string BugHash(const BugTrace &trace);

struct UniqueBug {
  std::string hash;
  std::string representative;  // first input id in the group
  size_t inputs = 0;
};

// One group per distinct bug hash among the confirmed verdicts, in order of
// first appearance.
std::vector<UniqueBug> Dedup(std::span<const TriageVerdict> verdicts);

struct TriageReport {
  size_t total_inputs = 0;
  size_t triaged = 0;
  size_t confirmed = 0;
  size_t unique_bugs = 0;
  double tir = 0;  // triaged / total_inputs, 0 for an empty corpus
  std::chrono::duration<double> total_triage_time{0};
  std::vector<TriageVerdict> verdicts;  // one per corpus entry, corpus order
  std::vector<UniqueBug> bugs;
};

// Confirms the preidentified inputs with up to `jobs` concurrent calls.
TriageReport RunTriage(const Corpus &corpus, Triager &triager, unsigned jobs = 1);

// One line per input: id, sent, confirmed, bug hash ("-" if none), seconds;
// then a summary block of key=value lines prefixed by '#'.
std::string FormatTriageReport(const TriageReport &report);
void WriteTriageReport(const TriageReport &report, const std::filesystem::path &path);

}  // namespace uafd

#endif  // UAFD_TRIAGE_H_
