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

#include "commands.h"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <csignal>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "uafd/bugtrace.h"
#include "uafd/executor.h"
#include "uafd/fuzzer.h"
#include "uafd/static_metrics.h"
#include "uafd/triage.h"

namespace uafd::cli {
namespace {

constexpr std::string_view kSyntheticPrefix = "synthetic:";

std::atomic<Campaign *> g_active_campaign{nullptr};

void OnInterrupt(int) {
  if (Campaign *c = g_active_campaign.load()) c->RequestStop();
}

std::optional<std::filesystem::path> SyntheticPath(const std::string &spec) {
  if (spec.rfind(kSyntheticPrefix, 0) != 0) return std::nullopt;
  return std::filesystem::path(spec.substr(kSyntheticPrefix.size()));
}

void PrintWarnings(const Warnings &warnings, std::ostream &err) {
  for (const std::string &w : warnings) err << "warning: " << w << "\n";
}

void WriteText(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::vector<uint8_t> ReadBytes(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

// Owns whichever executor the target spec asks for.
struct TargetRunner {
  std::unique_ptr<SyntheticProgram> program;
  std::unique_ptr<Executor> executor;
  bool synthetic() const { return program != nullptr; }
};

TargetRunner MakeRunner(const std::string &target, const StaticMetadata &meta,
                        const std::filesystem::path &work_dir, Warnings *warnings) {
  TargetRunner r;
  if (auto path = SyntheticPath(target)) {
    r.program = std::make_unique<SyntheticProgram>(SyntheticProgram::Load(*path, warnings));
    r.executor = std::make_unique<SyntheticExecutor>(*r.program, meta);
  } else {
    if (target.empty()) throw ConfigError("--target is required");
    r.executor = std::make_unique<SubprocessExecutor>(CommandTemplate::Parse(target),
                                                      work_dir, meta.edge_count);
  }
  return r;
}

// Prints a stats snapshot every few seconds while alive.
class ProgressMonitor {
 public:
  ProgressMonitor(const Campaign &campaign, std::ostream &err, bool enabled) {
    if (!enabled) return;
    thread_ = std::thread([this, &campaign, &err] {
      std::unique_lock<std::mutex> lock(mu_);
      while (!cv_.wait_for(lock, std::chrono::seconds(5), [this] { return done_; })) {
        StatsSnapshot s = campaign.Snapshot();
        err << fmt::format("execs={} queue={} potential={} crashes={} t_max={}\n",
                           s.stats.execs, s.queue_size, s.stats.potential,
                           s.stats.crashes, ToString(s.t_max));
      }
    });
  }
  ~ProgressMonitor() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      done_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  bool done_ = false;
  std::thread thread_;
};

// Routes SIGINT to Campaign::RequestStop while alive.
class InterruptScope {
 public:
  explicit InterruptScope(Campaign &campaign) {
    g_active_campaign = &campaign;
    previous_ = std::signal(SIGINT, OnInterrupt);
  }
  ~InterruptScope() {
    std::signal(SIGINT, previous_);
    g_active_campaign = nullptr;
  }

 private:
  void (*previous_)(int) = SIG_DFL;
};

std::string FormatMilestone(const std::optional<Milestone> &m) {
  if (!m) return "none";
  return fmt::format("exec {} after {:.3f}s", m->exec, m->elapsed.count() / 1000.0);
}

}  // namespace

int CmdAnalyze(const AnalyzeArgs &args, const Config &config, std::ostream &out,
               std::ostream &err) {
  Warnings warnings;
  ProgramModel model = ProgramModel::Load(args.graph, &warnings);
  BugTrace trace = ParseBugTrace(args.trace);
  TargetSequence seq = ResolveTargets(Flatten(TrimToProgram(trace, model)), model, &warnings);
  AnalysisOptions options;
  options.beta = config.beta;
  options.c_scale = config.c_scale;
  StaticMetadata meta = Analyze(model, seq, options, &warnings);
  PrintWarnings(warnings, err);
  meta.Save(args.out);

  fmt::print(out, "bug kind: {}\n", KindName(meta.kind));
  fmt::print(out, "targets: {}\n", meta.targets.targets.size());
  for (size_t i = 0; i < seq.targets.size(); ++i) {
    const Target &t = seq.targets[i];
    fmt::print(out, "  {:2} {}@{}{}\n", i, t.function_name, t.location,
               t.event ? fmt::format(" [{}]", EventName(*t.event)) : "");
  }
  fmt::print(out, "favored edges: {}\n", meta.favored_edge_count());
  fmt::print(out, "cut edges: {}\nnon-cut edges: {}\n", meta.cut_edges.size(),
             meta.noncut_edges.size());
  fmt::print(out, "metadata written to {}\n", args.out.string());
  return kExitOk;
}

int CmdFuzz(const FuzzArgs &args, const Config &config, std::ostream &out,
            std::ostream &err) {
  if (args.out.empty()) throw ConfigError("--out is required");
  StaticMetadata meta = StaticMetadata::Load(args.meta);
  std::filesystem::create_directories(args.out);
  WriteText(args.out / "uafd_config",
            config.Echo({{"meta", args.meta.string()},
                         {"target", args.target},
                         {"seeds", args.seeds.string()},
                         {"out", args.out.string()}}));

  Warnings warnings;
  TargetRunner runner = MakeRunner(args.target, meta, args.out / ".work", &warnings);
  PrintWarnings(warnings, err);

  FuzzerOptions options;
  options.alpha = config.alpha;
  options.delta = config.delta;
  options.havoc_budget = config.havoc;
  options.max_input_size = config.max_input_size;
  options.rng_seed = config.rng_seed;
  options.exec_budget = config.exec_budget;
  options.time_budget = config.timeout;
  options.exec_timeout = config.exec_timeout;
  options.mode = ParseScheduleMode(config.schedule);
  options.stop_on_potential = args.stop_on_potential;
  options.output_dir = args.out;
  if (config.beta != meta.beta) {
    err << fmt::format("warning: beta={} differs from the metadata's {}; the call graph "
                       "weights come from the metadata\n",
                       config.beta, meta.beta);
  }

  Campaign campaign(meta, *runner.executor, options);
  if (!args.seeds.empty()) {
    if (!std::filesystem::is_directory(args.seeds)) {
      throw ConfigError("seed directory " + args.seeds.string() + " does not exist");
    }
    std::vector<std::filesystem::path> files;
    for (const auto &entry : std::filesystem::directory_iterator(args.seeds)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto &f : files) campaign.AddSeed(ReadBytes(f));
  }
  if (runner.synthetic()) {
    const SyntheticProgram &program = *runner.program;
    campaign.set_confirm_hook([&program](std::span<const uint8_t>,
                                         const ExecutionFeedback &fb) {
      return SyntheticUafCheck(program, fb);
    });
  }

  CampaignReport report;
  {
    ProgressMonitor monitor(campaign, err, args.progress);
    InterruptScope interrupt(campaign);
    report = campaign.Run();
  }

  fmt::print(out, "stop reason: {}\n", report.stop_reason);
  fmt::print(out, "execs: {}\nqueue: {}\ncrashes: {}\npotential: {}\n", report.execs,
             report.queue_size, report.crashes, report.potential);
  fmt::print(out, "t_max: {}\n", ToString(report.t_max));
  fmt::print(out, "elapsed: {:.3f}s\n", report.elapsed.count() / 1000.0);
  fmt::print(out, "first potential: {}\n", FormatMilestone(report.first_potential));
  if (runner.synthetic()) {
    fmt::print(out, "first confirmed: {}\n", FormatMilestone(report.first_confirmed));
  }
  return kExitOk;
}

int CmdTriage(const TriageArgs &args, const Config &config, std::ostream &out,
              std::ostream &err) {
  Corpus corpus = Corpus::Load(args.corpus);
  std::filesystem::path report_path =
      args.report.empty() ? args.corpus / "triage_report" : args.report;

  std::unique_ptr<SyntheticProgram> program;
  std::unique_ptr<StaticMetadata> meta;
  std::unique_ptr<Triager> triager;
  if (auto path = SyntheticPath(args.triager)) {
    if (args.meta.empty()) throw ConfigError("a synthetic triager needs --meta");
    Warnings warnings;
    program = std::make_unique<SyntheticProgram>(SyntheticProgram::Load(*path, &warnings));
    PrintWarnings(warnings, err);
    meta = std::make_unique<StaticMetadata>(StaticMetadata::Load(args.meta));
    triager = std::make_unique<SyntheticTriager>(*program, *meta);
  } else {
    if (args.triager.empty()) throw ConfigError("--triager is required");
    triager = std::make_unique<SubprocessTriager>(
        CommandTemplate::Parse(args.triager),
        report_path.parent_path() / ".triage_logs", config.triager_timeout);
  }

  TriageReport report = RunTriage(corpus, *triager, config.jobs);
  WriteTriageReport(report, report_path);
  WriteText(report_path.parent_path() / "triage_config",
            config.Echo({{"corpus", args.corpus.string()},
                         {"triager", args.triager},
                         {"report", report_path.string()}}));
  fmt::print(out, "total inputs: {}\ntriaged: {}\nconfirmed: {}\nunique bugs: {}\n",
             report.total_inputs, report.triaged, report.confirmed, report.unique_bugs);
  fmt::print(out, "TIR: {:.4f}\ntriage time: {:.3f}s\n", report.tir,
             report.total_triage_time.count());
  for (const UniqueBug &bug : report.bugs) {
    fmt::print(out, "bug {}: {} ({} inputs)\n", bug.hash, bug.representative, bug.inputs);
  }
  fmt::print(out, "report written to {}\n", report_path.string());
  return kExitOk;
}

int CmdReplay(const ReplayArgs &args, const Config &config, std::ostream &out,
              std::ostream &err) {
  StaticMetadata meta = StaticMetadata::Load(args.meta);
  std::vector<uint8_t> input = ReadBytes(args.input);
  Warnings warnings;
  auto work = std::filesystem::temp_directory_path() /
              fmt::format("uafd-replay-{}", static_cast<long>(::getpid()));
  TargetRunner runner = MakeRunner(args.target, meta, work, &warnings);
  PrintWarnings(warnings, err);
  ExecRequest request{input, config.exec_timeout, InputMode::kFile};
  ExecutionFeedback fb = runner.executor->Execute(request);
  if (!runner.synthetic()) {
    std::error_code ec;
    std::filesystem::remove_all(work, ec);
  }

  fmt::print(out, "similarity (t_p,t_3tp,t_b,t_3tb): {}\n",
             ToString(Similarity(meta.targets, fb)));
  double dist = SeedDistance(fb);
  fmt::print(out, "distance: {}\n",
             IsFiniteDistance(dist) ? fmt::format("{:.6f}", dist) : "inf");
  fmt::print(out, "cut score: {:.6f}\n", CutEdgeScore(meta, fb, config.delta));
  std::string hits;
  for (uint32_t t : fb.target_hits) hits += (hits.empty() ? "" : " ") + std::to_string(t);
  fmt::print(out, "target hits: {}\n", hits.empty() ? "-" : hits);
  fmt::print(out, "status: {}\n", ToString(fb.status));
  if (runner.synthetic()) {
    fmt::print(out, "uaf: {}\n", SyntheticUafCheck(*runner.program, fb) ? "yes" : "no");
  }
  return kExitOk;
}

int RunGuarded(const std::function<int()> &command, std::ostream &err) {
  try {
    return command();
  } catch (const ParseError &e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace uafd::cli
