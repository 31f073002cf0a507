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

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.h"
#include "config.h"

namespace {

using uafd::cli::Settings;

// Registers --<flag> for a config key; only flags actually given end up in
// the command-line settings layer.
class SettingFlags {
 public:
  void Add(CLI::App *app, const std::string &flag, const std::string &key,
           const std::string &help) {
    auto &slot = values_[key];
    options_.emplace_back(key, app->add_option(flag, slot, help));
  }

  Settings Collect() const {
    Settings settings;
    for (const auto &[key, option] : options_) {
      if (option->count() > 0) settings[key] = values_.at(key);
    }
    return settings;
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option *>> options_;
};

}  // namespace

int main(int argc, char **argv) {
  namespace cli = uafd::cli;
  CLI::App app{"Directed greybox fuzzing toward use-after-free bug traces"};
  app.set_version_flag("--version", std::string("uafd ") + UAFD_VERSION);
  app.require_subcommand(1);
  std::string config_file;
  app.add_option("--config", config_file, "key=value configuration file");

  SettingFlags flags;
  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--config", config_file, "key=value configuration file");
  };

  cli::AnalyzeArgs analyze;
  CLI::App *analyze_cmd = app.add_subcommand("analyze", "Compute static metadata");
  add_common(analyze_cmd);
  analyze_cmd->add_option("--graph", analyze.graph, "program model (JSON)")->required();
  analyze_cmd->add_option("--trace", analyze.trace, "bug trace")->required();
  analyze_cmd->add_option("--out", analyze.out, "metadata output file")->required();
  flags.Add(analyze_cmd, "--beta", "beta", "weight of favored call edges");
  flags.Add(analyze_cmd, "--c-scale", "c_scale", "cost of one CFG hop");

  cli::FuzzArgs fuzz;
  CLI::App *fuzz_cmd = app.add_subcommand("fuzz", "Run a fuzzing campaign");
  add_common(fuzz_cmd);
  fuzz_cmd->add_option("--meta", fuzz.meta, "static metadata")->required();
  fuzz_cmd->add_option("--target", fuzz.target,
                       "target command with @@, or synthetic:<program.json>")
      ->required();
  fuzz_cmd->add_option("--seeds", fuzz.seeds, "initial seed directory");
  fuzz_cmd->add_option("--out", fuzz.out, "corpus output directory")->required();
  fuzz_cmd->add_flag("--stop-on-potential", fuzz.stop_on_potential,
                     "stop at the first input covering every UAF event");
  fuzz_cmd->add_flag("--progress", fuzz.progress, "print stats every 5 seconds");
  flags.Add(fuzz_cmd, "--timeout", "timeout", "campaign duration (e.g. 10m)");
  flags.Add(fuzz_cmd, "--exec-budget", "exec_budget", "maximum executions");
  flags.Add(fuzz_cmd, "--rng-seed", "rng_seed", "random seed");
  flags.Add(fuzz_cmd, "--delta", "delta", "non-cut edge penalty");
  flags.Add(fuzz_cmd, "--beta", "beta", "expected favored edge weight");
  flags.Add(fuzz_cmd, "--alpha", "alpha", "chance of fuzzing a non-favored seed");
  flags.Add(fuzz_cmd, "--havoc", "havoc", "havoc budget H");
  flags.Add(fuzz_cmd, "--exec-timeout", "exec_timeout", "per-execution timeout");
  flags.Add(fuzz_cmd, "--max-input-size", "max_input_size", "largest mutant in bytes");
  flags.Add(fuzz_cmd, "--schedule", "schedule", "directed or coverage");

  cli::TriageArgs triage;
  CLI::App *triage_cmd = app.add_subcommand("triage", "Confirm pre-identified inputs");
  add_common(triage_cmd);
  triage_cmd->add_option("--corpus", triage.corpus, "corpus directory")->required();
  triage_cmd->add_option("--triager", triage.triager,
                         "triager command with @@, or synthetic:<program.json>")
      ->required();
  triage_cmd->add_option("--meta", triage.meta, "static metadata (synthetic triager)");
  triage_cmd->add_option("--report", triage.report, "report file");
  flags.Add(triage_cmd, "--jobs", "jobs", "concurrent triager runs");
  flags.Add(triage_cmd, "--triager-timeout", "triager_timeout", "per-input timeout");

  cli::ReplayArgs replay;
  CLI::App *replay_cmd = app.add_subcommand("replay", "Score one input");
  add_common(replay_cmd);
  replay_cmd->add_option("--meta", replay.meta, "static metadata")->required();
  replay_cmd->add_option("--target", replay.target,
                         "target command with @@, or synthetic:<program.json>")
      ->required();
  replay_cmd->add_option("--input", replay.input, "input file")->required();
  flags.Add(replay_cmd, "--delta", "delta", "non-cut edge penalty");
  flags.Add(replay_cmd, "--exec-timeout", "exec_timeout", "execution timeout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  return cli::RunGuarded(
      [&]() -> int {
        Settings file;
        if (!config_file.empty()) file = cli::ReadConfigFile(config_file);
        cli::Config config =
            cli::ResolveConfig(file, cli::EnvSettings(std::getenv), flags.Collect());
        if (analyze_cmd->parsed()) {
          return cli::CmdAnalyze(analyze, config, std::cout, std::cerr);
        }
        if (fuzz_cmd->parsed()) return cli::CmdFuzz(fuzz, config, std::cout, std::cerr);
        if (triage_cmd->parsed()) {
          return cli::CmdTriage(triage, config, std::cout, std::cerr);
        }
        return cli::CmdReplay(replay, config, std::cout, std::cerr);
      },
      std::cerr);
}
