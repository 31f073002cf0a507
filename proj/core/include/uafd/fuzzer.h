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

// The directed fuzzing loop: seed queue, favored-seed selection, power
// schedule, havoc-style mutation and on-disk corpus.

#ifndef UAFD_FUZZER_H_
#define UAFD_FUZZER_H_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "uafd/executor.h"
#include "uafd/runtime_metrics.h"
#include "uafd/static_metrics.h"

namespace uafd {

enum class ScheduleMode : uint8_t {
  kDirected,
  // Ablation: selection only looks at new coverage and every seed gets the
  // same energy.
  kCoverageOnly,
};

std::string_view ScheduleModeName(ScheduleMode mode);
ScheduleMode ParseScheduleMode(std::string_view name);

inline constexpr double kDefaultAlpha = 0.01;
inline constexpr uint32_t kDefaultHavocBudget = 256;
inline constexpr size_t kDefaultMaxInputSize = 1 << 20;
inline constexpr double kNormalizationEpsilon = 0.01;
// p of the coverage-only ablation: (1 + 0) * 0.5 * (1 - 0.5), i.e. the
// directed formula with every seed-dependent term at its neutral value.
inline constexpr double kCoverageOnlyPower = 0.25;

struct FuzzerOptions {
  double alpha = kDefaultAlpha;
  double delta = kDefaultDelta;
  uint32_t havoc_budget = kDefaultHavocBudget;
  size_t max_input_size = kDefaultMaxInputSize;
  uint64_t rng_seed = 0;
  // Unset means unlimited.
  std::optional<uint64_t> exec_budget;
  std::optional<std::chrono::milliseconds> time_budget;
  bool stop_on_potential = false;
  bool stop_on_confirmed = false;
  ScheduleMode mode = ScheduleMode::kDirected;
  // Empty: keep the corpus in memory only.
  std::filesystem::path output_dir;
  std::chrono::milliseconds exec_timeout{1000};
  InputMode input_mode = InputMode::kFile;

  // Throws ConfigError.
  void Validate() const;
};

struct SeedEntry {
  uint64_t id = 0;
  std::vector<uint8_t> bytes;
  SimilarityTuple sim;
  double dist = kInfiniteDistance;
  double cut_score = 0;
  bool new_coverage = false;
  uint64_t times_fuzzed = 0;
  // Executions done when the seed was found, and wall time since start.
  uint64_t discovered_at_exec = 0;
  std::chrono::milliseconds discovered_at{0};
  std::optional<uint64_t> parent;
};

struct CampaignCounters {
  uint64_t execs = 0;
  uint64_t crashes = 0;
  uint64_t timeouts = 0;
  uint64_t potential = 0;
};

struct CampaignState {
  std::vector<SeedEntry> queue;
  SimilarityTuple t_max;
  // Running bounds over every scored execution. Only finite distances count.
  bool has_distance_bounds = false;
  double min_d = 0, max_d = 0;
  bool has_cut_bounds = false;
  double min_e = 0, max_e = 0;
  uint64_t rng_seed = 0;
  CampaignCounters stats;
  size_t cursor = 0;  // next queue position select_next looks at

  void UpdateBounds(double dist, double cut_score);
};

// Directed mode: true if s.sim >= t_max on (t_p, t_3tp, t_b), which also
// raises t_max to s.sim, else s.new_coverage. Coverage-only: s.new_coverage.
bool IsFavored(const SeedEntry &s, CampaignState &state,
               ScheduleMode mode = ScheduleMode::kDirected);

// Walks the queue from the cursor and returns the index of the first favored
// entry, taking a non-favored one with probability `alpha`. After a full pass
// without a pick, the entry the pass started on is returned.
size_t SelectNext(CampaignState &state, double alpha, std::mt19937_64 &rng,
                  ScheduleMode mode = ScheduleMode::kDirected);

// Min-max normalization into [eps, 1 - eps]; 0.5 when the bounds are missing
// or degenerate.
double Normalize(double value, bool has_bounds, double lo, double hi);

// p = (1 + t_p) * e~ * (1 - d~). An infinite distance normalizes to 1 - eps.
double PowerScore(const SeedEntry &s, const CampaignState &state,
                  ScheduleMode mode = ScheduleMode::kDirected);
// max(1, round(p * havoc_budget)).
uint32_t AssignEnergy(const SeedEntry &s, const CampaignState &state,
                      uint32_t havoc_budget,
                      ScheduleMode mode = ScheduleMode::kDirected);

// Stacks 1..64 random operators: bit flip, random or interesting byte,
// byte add/sub of 1..35, block delete, block duplicate, block overwrite and
// splice with `splice_pool`. The result has 1..max_size bytes.
std::vector<uint8_t> MutateInput(std::span<const uint8_t> input,
                                 std::mt19937_64 &rng, size_t max_size,
                                 std::span<const SeedEntry> splice_pool = {});

struct Milestone {
  uint64_t exec = 0;
  std::chrono::milliseconds elapsed{0};
  std::vector<uint8_t> input;
};

struct CampaignReport {
  uint64_t execs = 0;
  size_t queue_size = 0;
  uint64_t crashes = 0;
  uint64_t potential = 0;
  SimilarityTuple t_max;
  std::chrono::milliseconds elapsed{0};
  std::optional<Milestone> first_potential;
  std::optional<Milestone> first_confirmed;
  std::string stop_reason;
};

struct StatsSnapshot {
  CampaignCounters stats;
  size_t queue_size = 0;
  SimilarityTuple t_max;
};

// Called on crashing and full-event-coverage executions until it first
// returns true.
using ConfirmHook =
    std::function<bool(std::span<const uint8_t> input, const ExecutionFeedback &fb)>;

class Campaign {
 public:
  Campaign(const StaticMetadata &meta, Executor &executor, FuzzerOptions options);

  void set_confirm_hook(ConfirmHook hook) { confirm_ = std::move(hook); }
  // Initial seeds; without any, the campaign starts from the empty input.
  void AddSeed(std::vector<uint8_t> bytes);

  CampaignReport Run();
  // Makes Run() return after the current execution. Thread-safe.
  void RequestStop() { stop_requested_ = true; }

  const CampaignState &state() const { return state_; }
  // Safe to call from another thread while Run() is active.
  StatsSnapshot Snapshot() const;

 private:
  struct Outcome {
    SimilarityTuple sim;
    double dist = kInfiniteDistance;
    double cut_score = 0;
    bool new_coverage = false;
    bool crashed = false;
    bool timed_out = false;
  };

  Outcome ExecuteAndScore(std::span<const uint8_t> input);
  // Returns true when a stop condition was reached.
  bool HandleMutant(std::vector<uint8_t> bytes, const SeedEntry &parent);
  void Enqueue(std::vector<uint8_t> bytes, const Outcome &outcome,
               std::optional<uint64_t> parent);
  void CheckMilestones(std::span<const uint8_t> input, const Outcome &outcome);
  bool BudgetExhausted() const;
  std::chrono::milliseconds Elapsed() const;
  bool StopConditionReached() const;

  void PrepareOutputDir();
  void PersistSeed(const SeedEntry &s);
  void PersistCrash(std::span<const uint8_t> input, const Outcome &outcome);
  void WriteStats(bool final);
  void AppendPlotRow();
  void AppendMeta(const std::string &path, const Outcome &outcome);
  void Publish();

  const StaticMetadata &meta_;
  Executor &executor_;
  FuzzerOptions options_;
  ConfirmHook confirm_;
  std::vector<std::vector<uint8_t>> initial_seeds_;

  CampaignState state_;
  std::mt19937_64 rng_;
  std::vector<bool> seen_edges_;
  std::unordered_set<std::string> queue_hashes_;
  std::unordered_set<std::string> crash_hashes_;
  ExecutionFeedback last_fb_;
  bool queue_has_potential_ = false;
  uint64_t crash_count_ = 0;
  std::atomic<bool> stop_requested_{false};
  std::optional<Milestone> first_potential_;
  std::optional<Milestone> first_confirmed_;
  std::chrono::steady_clock::time_point start_;
  int64_t start_unix_ = 0;

  mutable std::mutex snapshot_mu_;
  StatsSnapshot snapshot_;
};

// Convenience wrapper around Campaign.
CampaignReport RunCampaign(const StaticMetadata &meta, Executor &executor,
                           const FuzzerOptions &options,
                           std::vector<std::vector<uint8_t>> seeds = {},
                           ConfirmHook confirm = {});

// Corpus index written next to queue/ so triage can work from persisted
// scores alone. One line per saved input, after a header line:
//   path  t_p  t_3tp  t_b  t_3tb  dist  cut_score  crashed
inline constexpr const char *kCorpusMetaFile = "corpus_meta";

}  // namespace uafd

#endif  // UAFD_FUZZER_H_
