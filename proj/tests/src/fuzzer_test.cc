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

#include "uafd/fuzzer.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "gtest/gtest.h"
#include "oracles.h"

namespace uafd {
namespace {

namespace fs = std::filesystem;
using testing::Bytes;

SeedEntry Seed(SimilarityTuple sim, bool new_coverage = false) {
  SeedEntry s;
  s.sim = sim;
  s.new_coverage = new_coverage;
  return s;
}

TEST(IsFavoredTest, DirectedUsesTheSelectionKey) {
  CampaignState state;
  state.t_max = {2, 1, 3, 2};
  // Equal key (t_3tb is not part of it) counts as favored.
  EXPECT_TRUE(IsFavored(Seed({2, 1, 3, 0}), state));
  EXPECT_FALSE(IsFavored(Seed({2, 1, 2, 3}), state));
  EXPECT_TRUE(IsFavored(Seed({1, 0, 0, 0}, true), state));
  EXPECT_TRUE(IsFavored(Seed({3, 0, 0, 0}), state));
  EXPECT_EQ(state.t_max, (SimilarityTuple{3, 0, 0, 0}));
}

TEST(IsFavoredTest, CoverageOnlyIgnoresSimilarity) {
  CampaignState state;
  EXPECT_FALSE(IsFavored(Seed({9, 3, 9, 3}), state, ScheduleMode::kCoverageOnly));
  EXPECT_TRUE(IsFavored(Seed({0, 0, 0, 0}, true), state, ScheduleMode::kCoverageOnly));
  EXPECT_EQ(state.t_max, SimilarityTuple{});
}

// Oracle: replays the selection loop with an independent copy of the RNG.
// Each non-favored seed costs one coin; favored seeds take none.
size_t SimulatedSelect(const std::vector<bool> &favored, size_t cursor, double alpha,
                       std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const size_t n = favored.size();
  for (size_t k = 0; k < n; ++k) {
    size_t i = (cursor % n + k) % n;
    if (favored[i]) return i;
    if (coin(rng) < alpha) return i;
  }
  return cursor % n;
}

TEST(SelectNextTest, MatchesCoinSimulation) {
  std::mt19937_64 gen(31);
  for (int round = 0; round < 500; ++round) {
    CampaignState state;
    std::vector<bool> favored;
    size_t n = 1 + gen() % 12;
    for (size_t i = 0; i < n; ++i) {
      bool f = gen() % 5 == 0;
      favored.push_back(f);
      // t_max stays far above every seed, so only new_coverage favors.
      state.queue.push_back(Seed({0, 0, 0, 0}, f));
    }
    state.t_max = {100, 3, 100, 3};
    state.cursor = gen() % 20;
    double alpha = std::vector<double>{0.0, 0.01, 0.3, 1.0}[gen() % 4];
    uint64_t seed = gen();
    std::mt19937_64 a(seed), b(seed);
    size_t want = SimulatedSelect(favored, state.cursor, alpha, b);
    size_t cursor = state.cursor;
    size_t got = SelectNext(state, alpha, a, ScheduleMode::kDirected);
    EXPECT_EQ(got, want);
    EXPECT_EQ(a(), b()) << "different number of coins drawn";
    EXPECT_EQ(state.cursor, got == cursor % n && !favored[got] && alpha == 0.0
                                ? cursor % n + 1
                                : got + 1);
  }
}

TEST(SelectNextTest, RoundRobinWithoutFavoredSeeds) {
  CampaignState state;
  for (int i = 0; i < 3; ++i) state.queue.push_back(Seed({0, 0, 0, 0}));
  state.t_max = {5, 0, 0, 0};
  std::mt19937_64 rng(1);
  std::vector<size_t> picks;
  for (int i = 0; i < 6; ++i) picks.push_back(SelectNext(state, 0.0, rng));
  EXPECT_EQ(picks, (std::vector<size_t>{0, 1, 2, 0, 1, 2}));
  CampaignState empty;
  EXPECT_THROW(SelectNext(empty, 0.0, rng), Error);
}

TEST(SelectNextTest, AlphaIsTheSkipProbability) {
  // One favored seed among 20: a non-favored seed scanned first is taken
  // with probability alpha.
  CampaignState state;
  for (int i = 0; i < 20; ++i) state.queue.push_back(Seed({0, 0, 0, 0}, i == 19));
  state.t_max = {9, 0, 0, 0};
  std::mt19937_64 rng(77);
  int early = 0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    state.cursor = 0;
    if (SelectNext(state, 0.01, rng) == 0) ++early;
  }
  // Binomial(20000, 0.01): mean 200, sd about 14. Six sd either way.
  EXPECT_GT(early, 200 - 6 * 14);
  EXPECT_LT(early, 200 + 6 * 14);
}

CampaignState Bounded() {
  CampaignState state;
  state.has_distance_bounds = true;
  state.min_d = 0;
  state.max_d = 10;
  state.has_cut_bounds = true;
  state.min_e = 0;
  state.max_e = 10;
  return state;
}

TEST(PowerScheduleTest, Normalize) {
  EXPECT_DOUBLE_EQ(Normalize(5, true, 0, 10), 0.5);
  EXPECT_DOUBLE_EQ(Normalize(0, true, 0, 10), 0.01);
  EXPECT_DOUBLE_EQ(Normalize(10, true, 0, 10), 0.99);
  EXPECT_DOUBLE_EQ(Normalize(-3, true, 0, 10), 0.01);
  EXPECT_DOUBLE_EQ(Normalize(5, false, 0, 10), 0.5);
  EXPECT_DOUBLE_EQ(Normalize(5, true, 5, 5), 0.5);
}

TEST(PowerScheduleTest, FrozenValues) {
  CampaignState state = Bounded();
  SeedEntry s = Seed({4, 2, 4, 2});
  s.dist = 5;
  s.cut_score = 5;
  // (1 + 4) * 0.5 * (1 - 0.5)
  EXPECT_DOUBLE_EQ(PowerScore(s, state), 1.25);
  EXPECT_EQ(AssignEnergy(s, state, 256), 320u);
  SeedEntry t = s;
  t.sim.t_p = 1;
  EXPECT_EQ(AssignEnergy(t, state, 256), 128u);
  // Energy ratio follows (1 + t_p): 5 / 2.
  EXPECT_DOUBLE_EQ(static_cast<double>(AssignEnergy(s, state, 256)) /
                       AssignEnergy(t, state, 256),
                   2.5);

  // Unreachable seeds get the worst normalized distance.
  s.dist = kInfiniteDistance;
  EXPECT_NEAR(PowerScore(s, state), 5 * 0.5 * 0.01, 1e-12);
  // Without bounds both factors sit at the midpoint.
  CampaignState fresh;
  s.dist = 3;
  EXPECT_DOUBLE_EQ(PowerScore(s, fresh), 5 * 0.25);
  // Energy never drops below one mutation.
  SeedEntry worst = Seed({0, 0, 0, 0});
  worst.dist = 10;
  worst.cut_score = 0;
  EXPECT_EQ(AssignEnergy(worst, state, 256), 1u);
}

TEST(PowerScheduleTest, CoverageOnlyIsFlat) {
  CampaignState state = Bounded();
  SeedEntry a = Seed({0, 0, 0, 0});
  SeedEntry b = Seed({5, 3, 5, 3});
  b.dist = 0;
  b.cut_score = 10;
  for (const SeedEntry &s : {a, b}) {
    EXPECT_DOUBLE_EQ(PowerScore(s, state, ScheduleMode::kCoverageOnly), kCoverageOnlyPower);
    EXPECT_EQ(AssignEnergy(s, state, 256, ScheduleMode::kCoverageOnly), 64u);
  }
}

// Property: p grows with t_p and the cut score and shrinks with distance.
TEST(PowerScheduleTest, MonotoneOnAGrid) {
  CampaignState state = Bounded();
  for (uint32_t tp = 0; tp < 6; ++tp) {
    for (double d = 0; d <= 10; d += 1) {
      for (double e = 0; e <= 10; e += 1) {
        SeedEntry s = Seed({tp, 0, 0, 0});
        s.dist = d;
        s.cut_score = e;
        double p = PowerScore(s, state);
        EXPECT_GT(p, 0);
        SeedEntry more_tp = s;
        ++more_tp.sim.t_p;
        EXPECT_GT(PowerScore(more_tp, state), p);
        SeedEntry further = s;
        further.dist = d + 1;
        EXPECT_LE(PowerScore(further, state), p);
        SeedEntry better_cut = s;
        better_cut.cut_score = e + 1;
        EXPECT_GE(PowerScore(better_cut, state), p);
      }
    }
  }
}

TEST(CampaignStateTest, BoundsSkipInfiniteDistances) {
  CampaignState state;
  state.UpdateBounds(kInfiniteDistance, -1);
  EXPECT_FALSE(state.has_distance_bounds);
  EXPECT_TRUE(state.has_cut_bounds);
  state.UpdateBounds(4, 2);
  state.UpdateBounds(7, -3);
  EXPECT_EQ(state.min_d, 4);
  EXPECT_EQ(state.max_d, 7);
  EXPECT_EQ(state.min_e, -3);
  EXPECT_EQ(state.max_e, 2);
}

TEST(MutateInputTest, DeterministicAndNeverEmpty) {
  std::mt19937_64 a(5), b(5);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 5000; ++i) {
    std::vector<uint8_t> input(rng() % 16);
    for (uint8_t &x : input) x = static_cast<uint8_t>(rng());
    auto x = MutateInput(input, a, 32);
    auto y = MutateInput(input, b, 32);
    EXPECT_EQ(x, y);
    EXPECT_GE(x.size(), 1u);
    EXPECT_LE(x.size(), 32u);
  }
}

TEST(MutateInputTest, RespectsMaxSizeWithSplicing) {
  std::mt19937_64 rng(8);
  std::vector<SeedEntry> pool(3);
  pool[0].bytes = std::vector<uint8_t>(50, 'x');
  pool[1].bytes = Bytes("short");
  auto input = Bytes("0123456789");
  bool spliced = false;
  for (int i = 0; i < 3000; ++i) {
    auto out = MutateInput(input, rng, 12, pool);
    ASSERT_LE(out.size(), 12u);
    ASSERT_GE(out.size(), 1u);
    spliced |= std::count(out.begin(), out.end(), 'x') > 0;
  }
  EXPECT_TRUE(spliced);
  // Oversized inputs are truncated first.
  auto big = std::vector<uint8_t>(100, 1);
  EXPECT_LE(MutateInput(big, rng, 10).size(), 10u);
}

TEST(MutateInputTest, ReachesSingleByteChanges) {
  std::mt19937_64 rng(12);
  auto input = Bytes("AAAA");
  const auto want = Bytes("AFAA");
  int found = 0;
  for (int i = 0; i < 200000 && found == 0; ++i) {
    if (MutateInput(input, rng, 64) == want) ++found;
  }
  EXPECT_EQ(found, 1);
}

TEST(FuzzerOptionsTest, Validate) {
  FuzzerOptions o;
  EXPECT_NO_THROW(o.Validate());
  o.alpha = 1.5;
  EXPECT_THROW(o.Validate(), ConfigError);
  o = {};
  o.delta = 1.0;
  EXPECT_THROW(o.Validate(), ConfigError);
  o = {};
  o.havoc_budget = 0;
  EXPECT_THROW(o.Validate(), ConfigError);
  o = {};
  o.max_input_size = 0;
  EXPECT_THROW(o.Validate(), ConfigError);
  o = {};
  o.exec_timeout = std::chrono::milliseconds(0);
  EXPECT_THROW(o.Validate(), ConfigError);
  EXPECT_EQ(ParseScheduleMode("coverage"), ScheduleMode::kCoverageOnly);
  EXPECT_EQ(ScheduleModeName(ScheduleMode::kDirected), "directed");
  EXPECT_THROW(ParseScheduleMode("fast"), ConfigError);
}

class CampaignTest : public ::testing::Test {
 protected:
  void SetUp() override {
    l_ = testing::ToyProgram::Load();
    exec_ = std::make_unique<SyntheticExecutor>(l_.program, l_.meta);
  }

  CampaignReport RunWith(FuzzerOptions o, std::vector<std::vector<uint8_t>> seeds = {},
                         const CampaignState **state_out = nullptr) {
    campaign_ = std::make_unique<Campaign>(l_.meta, *exec_, o);
    for (auto &s : seeds) campaign_->AddSeed(std::move(s));
    campaign_->set_confirm_hook([this](std::span<const uint8_t>, const ExecutionFeedback &fb) {
      return SyntheticUafCheck(l_.program, fb);
    });
    CampaignReport r = campaign_->Run();
    if (state_out != nullptr) *state_out = &campaign_->state();
    return r;
  }

  testing::ToyProgram l_;
  std::unique_ptr<SyntheticExecutor> exec_;
  std::unique_ptr<Campaign> campaign_;
};

TEST_F(CampaignTest, ZeroBudgetDoesNothing) {
  FuzzerOptions o;
  o.exec_budget = 0;
  CampaignReport r = RunWith(o);
  EXPECT_EQ(r.execs, 0u);
  EXPECT_EQ(r.queue_size, 0u);
  EXPECT_EQ(r.stop_reason, "budget");
  EXPECT_FALSE(r.first_potential);
}

TEST_F(CampaignTest, FindsTheBugAndStops) {
  FuzzerOptions o;
  o.rng_seed = 7;
  o.exec_budget = 2'000'000;
  o.stop_on_confirmed = true;
  CampaignReport r = RunWith(o, {Bytes("ABUA")});
  ASSERT_EQ(r.stop_reason, "confirmed");
  ASSERT_TRUE(r.first_confirmed);
  ASSERT_TRUE(r.first_potential);
  EXPECT_LE(r.first_potential->exec, r.first_confirmed->exec);
  EXPECT_EQ(r.execs, r.first_confirmed->exec);
  auto fb = exec_->Execute({.input = r.first_confirmed->input});
  EXPECT_TRUE(SyntheticUafCheck(l_.program, fb));
  EXPECT_TRUE(CoversAllEvents(Similarity(l_.meta.targets, fb)));
}

TEST_F(CampaignTest, StopOnPotential) {
  FuzzerOptions o;
  o.exec_budget = 2'000'000;
  o.stop_on_potential = true;
  CampaignReport r = RunWith(o, {Bytes("AFUA")});
  EXPECT_EQ(r.stop_reason, "potential");
  EXPECT_EQ(r.execs, 1u);
  EXPECT_EQ(r.potential, 1u);
}

TEST_F(CampaignTest, QueueInvariants) {
  FuzzerOptions o;
  o.rng_seed = 3;
  o.exec_budget = 60'000;
  const CampaignState *state = nullptr;
  CampaignReport r = RunWith(o, {Bytes("ABUA"), Bytes("ABUA"), Bytes("zz")}, &state);
  EXPECT_EQ(r.stop_reason, "budget");
  EXPECT_EQ(r.execs, 60'000u);
  // Duplicate seeds collapse; content is unique across the queue.
  std::set<std::vector<uint8_t>> contents;
  uint64_t potential = 0;
  for (size_t i = 0; i < state->queue.size(); ++i) {
    const SeedEntry &s = state->queue[i];
    EXPECT_EQ(s.id, i);
    EXPECT_TRUE(contents.insert(s.bytes).second);
    EXPECT_LE(s.bytes.size(), o.max_input_size);
    // t_max dominates every queued seed.
    EXPECT_TRUE(CompareSelection(s.sim, r.t_max) <= 0);
    // The recorded score is what a fresh execution gives.
    auto fb = exec_->Execute({.input = s.bytes});
    EXPECT_EQ(Similarity(l_.meta.targets, fb), s.sim);
    EXPECT_EQ(SeedDistance(fb), s.dist);
    potential += CoversAllEvents(s.sim);
    if (s.parent) {
      EXPECT_LT(*s.parent, s.id);
    }
  }
  EXPECT_EQ(r.potential, potential);
  EXPECT_EQ(r.queue_size, state->queue.size());
}

TEST_F(CampaignTest, DeterministicForAFixedSeed) {
  FuzzerOptions o;
  o.rng_seed = 99;
  o.exec_budget = 30'000;
  const CampaignState *state = nullptr;
  CampaignReport a = RunWith(o, {}, &state);
  std::vector<std::vector<uint8_t>> first;
  for (const SeedEntry &s : state->queue) first.push_back(s.bytes);
  CampaignReport b = RunWith(o, {}, &state);
  std::vector<std::vector<uint8_t>> second;
  for (const SeedEntry &s : state->queue) second.push_back(s.bytes);
  EXPECT_EQ(first, second);
  EXPECT_EQ(a.t_max, b.t_max);
  EXPECT_EQ(a.crashes, b.crashes);
  o.rng_seed = 100;
  RunWith(o, {}, &state);
  std::vector<std::vector<uint8_t>> third;
  for (const SeedEntry &s : state->queue) third.push_back(s.bytes);
  EXPECT_NE(first, third);
}

TEST_F(CampaignTest, RequestStopFromAnotherThread) {
  FuzzerOptions o;
  Campaign c(l_.meta, *exec_, o);
  std::thread stopper([&] {
    while (c.Snapshot().stats.execs < 2048) std::this_thread::yield();
    c.RequestStop();
  });
  CampaignReport r = c.Run();
  stopper.join();
  EXPECT_EQ(r.stop_reason, "interrupted");
  EXPECT_GE(r.execs, 2048u);
}

std::string fmt_id(uint64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "id_%06llu", static_cast<unsigned long long>(id));
  return buf;
}

std::string ReadAll(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> ReadKeyValues(const fs::path &p) {
  std::map<std::string, std::string> out;
  std::istringstream in(ReadAll(p));
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

TEST_F(CampaignTest, PersistsTheCorpus) {
  fs::path dir = fs::temp_directory_path() / ("uafd_campaign_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  FuzzerOptions o;
  o.rng_seed = 7;
  o.exec_budget = 2'000'000;
  o.stop_on_confirmed = true;
  o.output_dir = dir;
  const CampaignState *state = nullptr;
  CampaignReport r = RunWith(o, {Bytes("ABUA")}, &state);
  ASSERT_EQ(r.stop_reason, "confirmed");

  for (const SeedEntry &s : state->queue) {
    auto name = fmt_id(s.id);
    std::string bytes = ReadAll(dir / "queue" / name);
    EXPECT_EQ(bytes, std::string(s.bytes.begin(), s.bytes.end()));
    EXPECT_EQ(fs::exists(dir / "potential" / name), CoversAllEvents(s.sim));
  }
  size_t queue_files = std::distance(fs::directory_iterator(dir / "queue"), {});
  EXPECT_EQ(queue_files, state->queue.size());
  size_t crash_files = std::distance(fs::directory_iterator(dir / "crashes"), {});
  EXPECT_EQ(crash_files, r.crashes);

  std::istringstream meta(ReadAll(dir / kCorpusMetaFile));
  std::string line;
  std::getline(meta, line);
  EXPECT_EQ(line, "path\tt_p\tt_3tp\tt_b\tt_3tb\tdist\tcut_score\tcrashed");
  size_t rows = 0;
  while (std::getline(meta, line)) ++rows;
  EXPECT_EQ(rows, state->queue.size() + r.crashes);

  auto stats = ReadKeyValues(dir / "campaign_stats");
  for (const char *key : {"start_time", "last_update", "execs_done", "paths_total",
                          "potential_total", "crashes_total", "timeouts_total", "t_max",
                          "rng_seed", "schedule", "first_potential_exec",
                          "first_confirmed_exec"}) {
    EXPECT_TRUE(stats.contains(key)) << key;
  }
  EXPECT_EQ(stats["execs_done"], std::to_string(r.execs));
  EXPECT_EQ(stats["paths_total"], std::to_string(r.queue_size));
  EXPECT_EQ(stats["schedule"], "directed");
  EXPECT_EQ(stats["first_confirmed_exec"], std::to_string(r.first_confirmed->exec));
  EXPECT_FALSE(fs::exists(dir / "campaign_stats.tmp"));
  EXPECT_EQ(ReadAll(dir / "plot.csv").substr(0, 61),
            "unix_time,execs_done,paths_total,potential_total,crashes_tota");
  fs::remove_all(dir);
}

}  // namespace
}  // namespace uafd
