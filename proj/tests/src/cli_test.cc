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

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "commands.h"
#include "config.h"
#include "gtest/gtest.h"
#include "oracles.h"
#include "uafd/command.h"
#include "uafd/error.h"

namespace uafd::cli {
namespace {

namespace fs = std::filesystem;
using std::chrono::milliseconds;

TEST(ParseDurationTest, Units) {
  EXPECT_EQ(ParseDuration("1500ms"), milliseconds(1500));
  EXPECT_EQ(ParseDuration("2s"), milliseconds(2000));
  EXPECT_EQ(ParseDuration("3m"), milliseconds(180000));
  EXPECT_EQ(ParseDuration("3min"), milliseconds(180000));
  EXPECT_EQ(ParseDuration("1h"), milliseconds(3600000));
  EXPECT_EQ(ParseDuration("5"), milliseconds(5000));
  EXPECT_EQ(ParseDuration("0.5s"), milliseconds(500));
  for (const char *bad : {"", "x", "5 parsecs", "-1s", "s"}) {
    EXPECT_THROW(ParseDuration(bad), ConfigError) << bad;
  }
}

TEST(ResolveConfigTest, LayersInOrder) {
  Settings file{{"delta", "0.3"}, {"havoc", "64"}, {"rng_seed", "5"}};
  Settings env{{"delta", "0.4"}, {"rng_seed", "6"}};
  Settings cli{{"delta", "0.6"}};
  Config c = ResolveConfig(file, env, cli);
  EXPECT_DOUBLE_EQ(c.delta, 0.6);
  EXPECT_EQ(c.rng_seed, 6u);
  EXPECT_EQ(c.havoc, 64u);
  EXPECT_DOUBLE_EQ(c.alpha, 0.01);
  EXPECT_DOUBLE_EQ(ResolveConfig(file, env, {}).delta, 0.4);
  EXPECT_DOUBLE_EQ(ResolveConfig(file, {}, {}).delta, 0.3);

  Config d = ResolveConfig({{"exec_budget", "1000"}, {"timeout", "10m"}},
                           {{"exec_budget", "none"}}, {});
  EXPECT_FALSE(d.exec_budget);
  EXPECT_EQ(d.timeout, milliseconds(600000));
}

TEST(ResolveConfigTest, RejectsBadValues) {
  EXPECT_THROW(ResolveConfig({{"delta", "1.5"}}, {}, {}), ConfigError);
  EXPECT_THROW(ResolveConfig({}, {}, {{"beta", "0"}}), ConfigError);
  EXPECT_THROW(ResolveConfig({}, {}, {{"havoc", "many"}}), ConfigError);
  EXPECT_THROW(ResolveConfig({}, {}, {{"schedule", "fast"}}), ConfigError);
  EXPECT_THROW(ResolveConfig({}, {}, {{"jobs", "0"}}), ConfigError);
  EXPECT_THROW(ResolveConfig({}, {}, {{"colour", "blue"}}), ConfigError);
  EXPECT_NO_THROW(ResolveConfig({}, {}, {{"schedule", "coverage"}}));
}

TEST(ConfigFileTest, ReadsKeyValues) {
  fs::path p = fs::temp_directory_path() / ("uafd_cfg_" + std::to_string(::getpid()));
  std::ofstream(p) << "# comment\n\ndelta = 0.25\nrng_seed=9  # trailing\n";
  Settings s = ReadConfigFile(p);
  EXPECT_EQ(s, (Settings{{"delta", "0.25"}, {"rng_seed", "9"}}));
  std::ofstream(p) << "nonsense_key=1\n";
  EXPECT_THROW(ReadConfigFile(p), ConfigError);
  std::ofstream(p) << "no equals sign\n";
  EXPECT_THROW(ReadConfigFile(p), ConfigError);
  fs::remove(p);
  EXPECT_THROW(ReadConfigFile(p), ConfigError);
}

TEST(EnvSettingsTest, UsesThePrefix) {
  std::map<std::string, std::string> env{{"UAFD_DELTA", "0.2"}, {"UAFD_EXEC_TIMEOUT", "2s"},
                                         {"DELTA", "0.9"}};
  Settings s = EnvSettings([&](const char *name) -> const char * {
    auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  EXPECT_EQ(s, (Settings{{"delta", "0.2"}, {"exec_timeout", "2s"}}));
}

TEST(ConfigEchoTest, ListsEverySetting) {
  Config c;
  std::string echo = c.Echo({{"meta", "m.json"}});
  for (const std::string &key : ConfigKeys()) {
    EXPECT_NE(("\n" + echo).find("\n" + key + "="), std::string::npos) << key;
  }
  EXPECT_NE(echo.find("meta=m.json"), std::string::npos);
  EXPECT_NE(echo.find("exec_budget=none"), std::string::npos);
}

// Runs the uafd binary and returns its exit code; stdout and stderr land in
// `output`.
int RunTool(const std::vector<std::string> &args, std::string &output,
            std::vector<std::pair<std::string, std::string>> env = {}) {
  fs::path log = fs::temp_directory_path() / ("uafd_cli_" + std::to_string(::getpid()) + ".log");
  ProcessSpec spec;
  spec.argv = {UAFD_TOOL_PATH};
  spec.argv.insert(spec.argv.end(), args.begin(), args.end());
  spec.output_path = log.string();
  spec.extra_env = std::move(env);
  spec.timeout = std::chrono::seconds(120);
  ProcessResult r = RunProcess(spec);
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  output = ss.str();
  fs::remove(log);
  if (r.timed_out || r.signaled) return -1;
  return r.exit_code;
}

class ToolTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("uafd_tool_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::string out;
    ASSERT_EQ(RunTool({"analyze", "--graph", Data("toy.graph.json"), "--trace",
                       Data("toy.trace"), "--out", Path("meta.json")},
                      out),
              kExitOk)
        << out;
  }
  void TearDown() override { fs::remove_all(dir_); }

  static std::string Data(const std::string &name) { return testing::TestData(name).string(); }
  std::string Path(const std::string &name) const { return (dir_ / name).string(); }
  std::string Synthetic() const { return "synthetic:" + Data("toy.synthetic.json"); }

  fs::path dir_;
};

TEST_F(ToolTest, VersionAndUsage) {
  std::string out;
  EXPECT_EQ(RunTool({"--version"}, out), kExitOk);
  EXPECT_NE(out.find("uafd 0.1.0"), std::string::npos);
  EXPECT_EQ(RunTool({}, out), kExitUsage);
  EXPECT_EQ(RunTool({"fuzz", "--meta", Path("meta.json")}, out), kExitUsage);
  EXPECT_EQ(RunTool({"analyze", "--graph", Data("toy.graph.json"), "--trace",
                     Path("missing.trace"), "--out", Path("x.json")},
                    out),
            kExitUsage);
}

TEST_F(ToolTest, AnalyzeSummary) {
  std::string out;
  ASSERT_EQ(RunTool({"analyze", "--graph", Data("toy.graph.json"), "--trace",
                     Data("toy.trace"), "--out", Path("meta2.json")},
                    out),
            kExitOk);
  EXPECT_NE(out.find("targets: 5"), std::string::npos);
  EXPECT_NE(out.find("favored edges: 0"), std::string::npos);
  EXPECT_NE(out.find("warning: skipping target pair"), std::string::npos);
  EXPECT_TRUE(fs::exists(Path("meta2.json")));
}

TEST_F(ToolTest, ReplayScoresAnInput) {
  std::ofstream(Path("abua")) << "ABUA";
  std::string out;
  ASSERT_EQ(RunTool({"replay", "--meta", Path("meta.json"), "--target", Synthetic(),
                     "--input", Path("abua")},
                    out),
            kExitOk)
      << out;
  EXPECT_NE(out.find("(2,1,3,2)"), std::string::npos);
  EXPECT_NE(out.find("distance: 8.000000"), std::string::npos);
  EXPECT_NE(out.find("uaf: no"), std::string::npos);

  // A subprocess target gives the same score.
  std::string cmd = std::string(FAKE_TARGET_PATH) + " " + Data("toy.synthetic.json") +
                    " " + Path("meta.json") + " @@";
  ASSERT_EQ(RunTool({"replay", "--meta", Path("meta.json"), "--target", cmd, "--input",
                     Path("abua")},
                    out),
            kExitOk)
      << out;
  EXPECT_NE(out.find("(2,1,3,2)"), std::string::npos);
}

TEST_F(ToolTest, ConfigErrorsAreUsageErrors) {
  std::ofstream(Path("abua")) << "ABUA";
  std::string out;
  std::vector<std::string> replay{"replay", "--meta", Path("meta.json"), "--target",
                                  Synthetic(), "--input", Path("abua")};
  EXPECT_EQ(RunTool(replay, out, {{"UAFD_DELTA", "3"}}), kExitUsage);
  EXPECT_NE(out.find("delta"), std::string::npos);
  // The flag wins over the environment.
  replay.insert(replay.end(), {"--delta", "0.5"});
  EXPECT_EQ(RunTool(replay, out, {{"UAFD_DELTA", "3"}}), kExitOk);
  std::ofstream(Path("bad.conf")) << "delta=0.5\nunknown=1\n";
  EXPECT_EQ(RunTool({"--config", Path("bad.conf"), "replay", "--meta", Path("meta.json"),
                     "--target", Synthetic(), "--input", Path("abua")},
                    out),
            kExitUsage);
}

TEST_F(ToolTest, FuzzThenTriage) {
  std::string out;
  ASSERT_EQ(RunTool({"fuzz", "--meta", Path("meta.json"), "--target", Synthetic(), "--out",
                     Path("corpus"), "--exec-budget", "300000", "--rng-seed", "7"},
                    out),
            kExitOk)
      << out;
  EXPECT_TRUE(fs::exists(Path("corpus/campaign_stats")));
  std::ifstream echo(Path("corpus/uafd_config"));
  std::stringstream echo_text;
  echo_text << echo.rdbuf();
  EXPECT_NE(echo_text.str().find("rng_seed=7"), std::string::npos);
  EXPECT_NE(echo_text.str().find("exec_budget=300000"), std::string::npos);

  ASSERT_EQ(RunTool({"triage", "--corpus", Path("corpus"), "--triager", Synthetic(), "--meta",
                     Path("meta.json"), "--jobs", "2"},
                    out),
            kExitOk)
      << out;
  EXPECT_NE(out.find("unique bugs: 1"), std::string::npos) << out;
  EXPECT_TRUE(fs::exists(Path("corpus/triage_report")));
  EXPECT_TRUE(fs::exists(Path("corpus/triage_config")));
}

TEST_F(ToolTest, TriageEdgeCases) {
  std::string out;
  fs::create_directories(Path("empty"));
  ASSERT_EQ(RunTool({"triage", "--corpus", Path("empty"), "--triager", Synthetic(), "--meta",
                     Path("meta.json")},
                    out),
            kExitOk);
  EXPECT_NE(out.find("TIR: 0.0000"), std::string::npos);
  EXPECT_EQ(RunTool({"triage", "--corpus", Path("nope"), "--triager", Synthetic(), "--meta",
                     Path("meta.json")},
                    out),
            kExitRuntime);
  EXPECT_EQ(RunTool({"triage", "--corpus", Path("empty"), "--triager", "/nonexistent/tool @@"},
                    out),
            kExitRuntime);
}

TEST_F(ToolTest, ZeroBudgetFuzz) {
  std::string out;
  ASSERT_EQ(RunTool({"fuzz", "--meta", Path("meta.json"), "--target", Synthetic(), "--out",
                     Path("c0"), "--exec-budget", "0"},
                    out),
            kExitOk)
      << out;
  EXPECT_TRUE(fs::is_empty(Path("c0/queue")));
}

}  // namespace
}  // namespace uafd::cli
