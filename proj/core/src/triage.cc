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

#include "uafd/triage.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "uafd/fuzzer.h"

namespace uafd {
namespace {

std::vector<std::string> SplitTabs(const std::string &line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) return fields;
    start = tab + 1;
  }
}

uint32_t ParseCount(const std::string &s, const std::string &where) {
  try {
    size_t used = 0;
    unsigned long v = std::stoul(s, &used);
    if (used == s.size() && v <= UINT32_MAX) return static_cast<uint32_t>(v);
  } catch (const std::exception &) {
  }
  throw CorpusReadError(where + ": bad count '" + s + "'");
}

double ParseReal(const std::string &s, const std::string &where) {
  if (s == "inf") return kInfiniteDistance;
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception &) {
  }
  throw CorpusReadError(where + ": bad number '" + s + "'");
}

StackFrame FrameOf(const ProgramModel &model, BlockRef ref) {
  return StackFrame{model.function(ref.function).name, model.block(ref).location, ""};
}

}  // namespace

std::vector<uint8_t> Corpus::ReadInput(const CorpusEntry &e) const {
  std::ifstream in(PathOf(e), std::ios::binary);
  if (!in) throw CorpusReadError("cannot read corpus input " + PathOf(e).string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

Corpus Corpus::Load(const std::filesystem::path &root) {
  if (!std::filesystem::is_directory(root)) {
    throw CorpusReadError("corpus directory " + root.string() + " does not exist");
  }
  Corpus corpus;
  corpus.root = root;
  const auto meta_path = root / kCorpusMetaFile;
  std::ifstream in(meta_path);
  if (!in) {
    std::error_code ec;
    if (std::filesystem::exists(root / "queue", ec) &&
        !std::filesystem::is_empty(root / "queue", ec)) {
      throw CorpusReadError("corpus has inputs but no " + std::string(kCorpusMetaFile) +
                            " index with their scores");
    }
    return corpus;
  }
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("path\t", 0) == 0)) continue;
    const std::string where = meta_path.string() + ":" + std::to_string(lineno);
    auto f = SplitTabs(line);
    if (f.size() != 8) throw CorpusReadError(where + ": expected 8 fields");
    CorpusEntry e;
    e.id = f[0];
    e.sim = SimilarityTuple{ParseCount(f[1], where), ParseCount(f[2], where),
                            ParseCount(f[3], where), ParseCount(f[4], where)};
    e.dist = ParseReal(f[5], where);
    e.cut_score = ParseReal(f[6], where);
    if (f[7] != "0" && f[7] != "1") throw CorpusReadError(where + ": bad crash flag");
    e.crashed = f[7] == "1";
    if (!std::filesystem::is_regular_file(corpus.PathOf(e))) {
      throw CorpusReadError(where + ": input " + e.id + " is missing");
    }
    corpus.entries.push_back(std::move(e));
  }
  return corpus;
}

std::vector<size_t> Preidentify(const Corpus &corpus) {
  std::vector<size_t> picked;
  for (size_t i = 0; i < corpus.entries.size(); ++i) {
    const CorpusEntry &e = corpus.entries[i];
    if (e.crashed || CoversAllEvents(e.sim)) picked.push_back(i);
  }
  return picked;
}

bool HasUafSignature(std::string_view report) {
  if (report.find("Invalid free()") != std::string_view::npos) return true;
  bool invalid_access = report.find("Invalid read of size") != std::string_view::npos ||
                        report.find("Invalid write of size") != std::string_view::npos;
  return invalid_access && report.find("free'd") != std::string_view::npos;
}

SubprocessTriager::SubprocessTriager(const CommandTemplate &command,
                                     std::filesystem::path work_dir,
                                     std::chrono::milliseconds timeout)
    : command_(command), work_dir_(std::move(work_dir)), timeout_(timeout) {
  if (!IsExecutable(command_.program())) {
    throw TriagerUnavailable("triager '" + command_.program() +
                             "' is missing or not executable");
  }
  std::filesystem::create_directories(work_dir_);
}

TriageVerdict SubprocessTriager::Confirm(const Corpus &corpus,
                                         const CorpusEntry &entry) {
  TriageVerdict v;
  v.input_id = entry.id;
  v.sent_to_triager = true;

  std::string log_name = entry.id;
  std::replace(log_name.begin(), log_name.end(), '/', '_');
  const auto log_path = work_dir_ / (log_name + ".log");
  const std::string input = corpus.PathOf(entry).string();

  ProcessSpec spec;
  spec.argv = command_.Instantiate(input);
  if (command_.reads_stdin()) spec.stdin_path = input;
  spec.output_path = log_path.string();
  spec.timeout = timeout_;
  ProcessResult result = RunProcess(spec);
  v.triager_seconds = result.elapsed;
  if (result.timed_out) {
    v.timed_out = true;
    return v;
  }

  std::ifstream in(log_path);
  std::stringstream text;
  text << in.rdbuf();
  if (!HasUafSignature(text.str())) return v;
  try {
    v.bug_trace = ParseBugTraceText(text.str());
    v.confirmed = true;
  } catch (const ParseError &) {
    // A signature without parseable stacks is not a confirmation.
  }
  return v;
}

std::optional<BugTrace> SyntheticBugTrace(const SyntheticProgram &program,
                                          const ExecutionFeedback &fb) {
  const ObjectEvent *alloc = nullptr;
  const ObjectEvent *freed = nullptr;
  for (const ObjectEvent &e : fb.object_events) {
    switch (e.action) {
      case UafEvent::kAlloc:
        alloc = &e;
        freed = nullptr;
        break;
      case UafEvent::kFree:
      case UafEvent::kUse:
        if (freed != nullptr) {
          BugTrace trace;
          trace.kind = e.action == UafEvent::kFree ? BugKind::kDoubleFree
                                                   : BugKind::kUseAfterFree;
          trace.alloc_trace = {FrameOf(program.model, alloc->block)};
          trace.free_trace = {FrameOf(program.model, freed->block)};
          trace.use_trace = {FrameOf(program.model, e.block)};
          return trace;
        }
        if (e.action == UafEvent::kFree && alloc != nullptr) freed = &e;
        break;
    }
  }
  return std::nullopt;
}

SyntheticTriager::SyntheticTriager(const SyntheticProgram &program,
                                   const StaticMetadata &meta)
    : executor_(program, meta) {}

TriageVerdict SyntheticTriager::Confirm(const Corpus &corpus,
                                        const CorpusEntry &entry) {
  TriageVerdict v;
  v.input_id = entry.id;
  v.sent_to_triager = true;
  auto start = std::chrono::steady_clock::now();
  std::vector<uint8_t> bytes = corpus.ReadInput(entry);
  ExecutionFeedback fb;
  executor_.Run(bytes, fb);
  if (SyntheticUafCheck(executor_.program(), fb)) {
    v.confirmed = true;
    v.bug_trace = SyntheticBugTrace(executor_.program(), fb);
  }
  v.triager_seconds = std::chrono::steady_clock::now() - start;
  return v;
}

std::string BugHash(const BugTrace &trace) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;  // field separator that cannot occur in text
    h *= 0x100000001b3ULL;
  };
  mix(KindName(trace.kind));
  for (UafEvent event : kAllEvents) {
    mix(EventName(event));
    for (const StackFrame &f : trace.stack(event)) {
      mix(f.function_name);
      mix(f.location);
    }
  }
  return fmt::format("{:016x}", h);
}

std::vector<UniqueBug> Dedup(std::span<const TriageVerdict> verdicts) {
  std::vector<UniqueBug> bugs;
  for (const TriageVerdict &v : verdicts) {
    if (!v.confirmed || !v.bug_trace) continue;
    std::string hash = BugHash(*v.bug_trace);
    auto it = std::find_if(bugs.begin(), bugs.end(),
                           [&](const UniqueBug &b) { return b.hash == hash; });
    if (it == bugs.end()) {
      bugs.push_back(UniqueBug{hash, v.input_id, 1});
    } else {
      ++it->inputs;
    }
  }
  return bugs;
}

TriageReport RunTriage(const Corpus &corpus, Triager &triager, unsigned jobs) {
  TriageReport report;
  report.total_inputs = corpus.entries.size();
  report.verdicts.resize(corpus.entries.size());
  for (size_t i = 0; i < corpus.entries.size(); ++i) {
    report.verdicts[i].input_id = corpus.entries[i].id;
  }
  const std::vector<size_t> picked = Preidentify(corpus);

  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (size_t k; (k = next++) < picked.size();) {
      try {
        report.verdicts[picked[k]] = triager.Confirm(corpus, corpus.entries[picked[k]]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(picked.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (unsigned j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto &t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const TriageVerdict &v : report.verdicts) {
    report.triaged += v.sent_to_triager;
    report.confirmed += v.confirmed;
    report.total_triage_time += v.triager_seconds;
  }
  report.tir = report.total_inputs == 0
                   ? 0.0
                   : static_cast<double>(report.triaged) / report.total_inputs;
  report.bugs = Dedup(report.verdicts);
  report.unique_bugs = report.bugs.size();
  return report;
}

std::string FormatTriageReport(const TriageReport &report) {
  std::string out;
  for (const TriageVerdict &v : report.verdicts) {
    std::string hash = v.bug_trace && v.confirmed ? BugHash(*v.bug_trace) : "-";
    out += fmt::format("{} {} {} {} {:.3f}\n", v.input_id, v.sent_to_triager ? 1 : 0,
                       v.confirmed ? 1 : 0, hash, v.triager_seconds.count());
  }
  out += fmt::format(
      "# total_inputs={}\n# triaged={}\n# confirmed={}\n# unique_bugs={}\n"
      "# tir={:.6f}\n# total_triage_time={:.3f}\n",
      report.total_inputs, report.triaged, report.confirmed, report.unique_bugs,
      report.tir, report.total_triage_time.count());
  return out;
}

void WriteTriageReport(const TriageReport &report, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::trunc);
  out << FormatTriageReport(report);
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace uafd
