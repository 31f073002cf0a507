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

// Subcommands of the uafd tool. Each returns a process exit code and writes
// its human-readable output to `out`.

#ifndef UAFD_TOOLS_COMMANDS_H_
#define UAFD_TOOLS_COMMANDS_H_

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>

#include "config.h"

namespace uafd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct AnalyzeArgs {
  std::filesystem::path graph;
  std::filesystem::path trace;
  std::filesystem::path out;
};

struct FuzzArgs {
  std::filesystem::path meta;
  // Target command with @@, or "synthetic:<program.json>".
  std::string target;
  std::filesystem::path seeds;  // optional
  std::filesystem::path out;
  bool stop_on_potential = false;
  bool progress = false;
};

struct TriageArgs {
  std::filesystem::path corpus;
  // Triager command with @@, or "synthetic:<program.json>" (needs `meta`).
  std::string triager;
  std::filesystem::path meta;
  std::filesystem::path report;  // default: <corpus>/triage_report
};

struct ReplayArgs {
  std::filesystem::path meta;
  std::string target;
  std::filesystem::path input;
};

int CmdAnalyze(const AnalyzeArgs &args, const Config &config, std::ostream &out,
               std::ostream &err);
int CmdFuzz(const FuzzArgs &args, const Config &config, std::ostream &out,
            std::ostream &err);
int CmdTriage(const TriageArgs &args, const Config &config, std::ostream &out,
              std::ostream &err);
int CmdReplay(const ReplayArgs &args, const Config &config, std::ostream &out,
              std::ostream &err);

// Runs `command`, turning exceptions into a diagnostic on `err` and an exit
// code: kExitUsage for parse and configuration errors, kExitRuntime otherwise.
int RunGuarded(const std::function<int()> &command, std::ostream &err);

}  // namespace uafd::cli

#endif  // UAFD_TOOLS_COMMANDS_H_
