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

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>

#include <fmt/format.h>

namespace uafd {
namespace {

constexpr uint8_t kInterestingBytes[] = {0x00, 0x01, 0x7f, 0x80, 0xff};
constexpr uint32_t kArithMax = 35;
constexpr size_t kMaxBlock = 32;
constexpr uint64_t kStatsEvery = 1 << 16;
constexpr uint64_t kPublishEvery = 1 << 10;

size_t Below(std::mt19937_64 &rng, size_t n) {
  return std::uniform_int_distribution<size_t>(0, n - 1)(rng);
}

std::string Key(std::span<const uint8_t> bytes) {
  return std::string(reinterpret_cast<const char *>(bytes.data()), bytes.size());
}

void WriteFile(const std::filesystem::path &path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

std::string FormatDistance(double d) {
  return IsFiniteDistance(d) ? fmt::format("{:.6f}", d) : "inf";
}

}  // namespace

std::string_view ScheduleModeName(ScheduleMode mode) {
  return mode == ScheduleMode::kDirected ? "directed" : "coverage";
}

ScheduleMode ParseScheduleMode(std::string_view name) {
  if (name == "directed") return ScheduleMode::kDirected;
  if (name == "coverage") return ScheduleMode::kCoverageOnly;
  throw ConfigError("unknown schedule '" + std::string(name) +
                    "' (expected directed or coverage)");
}

void FuzzerOptions::Validate() const {
  if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(delta > 0 && delta < 1)) throw ConfigError("delta must lie in (0, 1)");
  if (havoc_budget == 0) throw ConfigError("havoc budget must be positive");
  if (max_input_size == 0) throw ConfigError("max input size must be positive");
  if (exec_timeout.count() <= 0) throw ConfigError("exec timeout must be positive");
  if (time_budget && time_budget->count() < 0) {
    throw ConfigError("time budget must not be negative");
  }
}

void CampaignState::UpdateBounds(double dist, double cut_score) {
  if (IsFiniteDistance(dist)) {
    if (!has_distance_bounds) {
      min_d = max_d = dist;
      has_distance_bounds = true;
    } else {
      min_d = std::min(min_d, dist);
      max_d = std::max(max_d, dist);
    }
  }
  if (!has_cut_bounds) {
    min_e = max_e = cut_score;
    has_cut_bounds = true;
  } else {
    min_e = std::min(min_e, cut_score);
    max_e = std::max(max_e, cut_score);
  }
}

bool IsFavored(const SeedEntry &s, CampaignState &state, ScheduleMode mode) {
  if (mode == ScheduleMode::kDirected && CompareSelection(s.sim, state.t_max) >= 0) {
    state.t_max = s.sim;
    return true;
  }
  return s.new_coverage;
}

size_t SelectNext(CampaignState &state, double alpha, std::mt19937_64 &rng,
                  ScheduleMode mode) {
  const size_t n = state.queue.size();
  if (n == 0) throw Error("select_next on an empty queue");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const size_t start = state.cursor % n;
  for (size_t k = 0; k < n; ++k) {
    size_t i = (start + k) % n;
    if (IsFavored(state.queue[i], state, mode) || coin(rng) < alpha) {
      state.cursor = i + 1;
      return i;
    }
  }
  state.cursor = start + 1;
  return start;
}

double Normalize(double value, bool has_bounds, double lo, double hi) {
  if (!has_bounds || !(hi > lo)) return 0.5;
  return std::clamp((value - lo) / (hi - lo), kNormalizationEpsilon,
                    1.0 - kNormalizationEpsilon);
}

double PowerScore(const SeedEntry &s, const CampaignState &state, ScheduleMode mode) {
  if (mode == ScheduleMode::kCoverageOnly) return kCoverageOnlyPower;
  double d = IsFiniteDistance(s.dist)
                 ? Normalize(s.dist, state.has_distance_bounds, state.min_d, state.max_d)
                 : 1.0 - kNormalizationEpsilon;
  double e = Normalize(s.cut_score, state.has_cut_bounds, state.min_e, state.max_e);
  return (1.0 + s.sim.t_p) * e * (1.0 - d);
}

uint32_t AssignEnergy(const SeedEntry &s, const CampaignState &state,
                      uint32_t havoc_budget, ScheduleMode mode) {
  double m = std::round(PowerScore(s, state, mode) * havoc_budget);
  return m < 1 ? 1 : static_cast<uint32_t>(m);
}

std::vector<uint8_t> MutateInput(std::span<const uint8_t> input,
                                 std::mt19937_64 &rng, size_t max_size,
                                 std::span<const SeedEntry> splice_pool) {
  std::vector<uint8_t> buf(input.begin(), input.end());
  if (buf.size() > max_size) buf.resize(max_size);
  auto random_byte = [&] { return static_cast<uint8_t>(Below(rng, 256)); };

  const size_t stack = size_t{1} << Below(rng, 7);  // 1..64
  for (size_t op = 0; op < stack; ++op) {
    if (buf.empty()) {
      buf.push_back(random_byte());
      continue;
    }
    const size_t len = buf.size();
    switch (Below(rng, 9)) {
      case 0:
        buf[Below(rng, len)] ^= static_cast<uint8_t>(1u << Below(rng, 8));
        break;
      case 1:
        buf[Below(rng, len)] = kInterestingBytes[Below(rng, std::size(kInterestingBytes))];
        break;
      case 2:
        buf[Below(rng, len)] = random_byte();
        break;
      case 3:
        buf[Below(rng, len)] += static_cast<uint8_t>(1 + Below(rng, kArithMax));
        break;
      case 4:
        buf[Below(rng, len)] -= static_cast<uint8_t>(1 + Below(rng, kArithMax));
        break;
      case 5: {  // delete, keeping at least one byte
        if (len < 2) break;
        size_t n = 1 + Below(rng, std::min(len - 1, kMaxBlock));
        size_t at = Below(rng, len - n + 1);
        buf.erase(buf.begin() + at, buf.begin() + at + n);
        break;
      }
      case 6: {  // duplicate a block, or insert a run of one random byte
        std::vector<uint8_t> block;
        if (Below(rng, 4) != 0) {
          size_t n = 1 + Below(rng, std::min(len, kMaxBlock));
          size_t from = Below(rng, len - n + 1);
          block.assign(buf.begin() + from, buf.begin() + from + n);
        } else {
          block.assign(1 + Below(rng, 8), random_byte());
        }
        if (len + block.size() > max_size) break;
        size_t at = Below(rng, len + 1);
        buf.insert(buf.begin() + at, block.begin(), block.end());
        break;
      }
      case 7: {  // overwrite one block with another
        if (len < 2) break;
        size_t n = 1 + Below(rng, std::min(len - 1, kMaxBlock));
        size_t from = Below(rng, len - n + 1);
        size_t to = Below(rng, len - n + 1);
        std::vector<uint8_t> block(buf.begin() + from, buf.begin() + from + n);
        std::copy(block.begin(), block.end(), buf.begin() + to);
        break;
      }
      case 8: {  // splice: our head, another seed's tail
        if (splice_pool.empty()) break;
        const auto &other = splice_pool[Below(rng, splice_pool.size())].bytes;
        if (other.empty()) break;
        size_t head = Below(rng, len + 1);
        size_t tail = Below(rng, other.size());
        buf.resize(head);
        buf.insert(buf.end(), other.begin() + tail, other.end());
        if (buf.size() > max_size) buf.resize(max_size);
        break;
      }
    }
  }
  if (buf.empty()) buf.push_back(random_byte());
  return buf;
}

Campaign::Campaign(const StaticMetadata &meta, Executor &executor,
                   FuzzerOptions options)
    : meta_(meta), executor_(executor), options_(std::move(options)) {
  options_.Validate();
  state_.rng_seed = options_.rng_seed;
  rng_.seed(options_.rng_seed);
  seen_edges_.assign(meta_.edge_count, false);
}

void Campaign::AddSeed(std::vector<uint8_t> bytes) {
  if (bytes.size() > options_.max_input_size) bytes.resize(options_.max_input_size);
  initial_seeds_.push_back(std::move(bytes));
}

std::chrono::milliseconds Campaign::Elapsed() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start_);
}

bool Campaign::BudgetExhausted() const {
  if (stop_requested_) return true;
  if (options_.exec_budget && state_.stats.execs >= *options_.exec_budget) return true;
  return options_.time_budget && Elapsed() >= *options_.time_budget;
}

bool Campaign::StopConditionReached() const {
  return (options_.stop_on_potential && first_potential_) ||
         (options_.stop_on_confirmed && first_confirmed_);
}

Campaign::Outcome Campaign::ExecuteAndScore(std::span<const uint8_t> input) {
  ExecRequest request{input, options_.exec_timeout, options_.input_mode};
  last_fb_ = executor_.Execute(request);
  ++state_.stats.execs;

  Outcome out;
  out.sim = Similarity(meta_.targets, last_fb_);
  out.dist = SeedDistance(last_fb_);
  out.cut_score = CutEdgeScore(meta_, last_fb_, options_.delta);
  const size_t n = std::min(last_fb_.edge_hits.size(), seen_edges_.size());
  for (size_t id = 0; id < n; ++id) {
    if (last_fb_.edge_hits[id] != 0 && !seen_edges_[id]) {
      seen_edges_[id] = true;
      out.new_coverage = true;
    }
  }
  out.crashed = last_fb_.status.kind == ExitKind::kCrash;
  out.timed_out = last_fb_.status.kind == ExitKind::kTimeout;
  if (out.timed_out) ++state_.stats.timeouts;
  state_.UpdateBounds(out.dist, out.cut_score);

  if (state_.stats.execs % kPublishEvery == 0) Publish();
  if (state_.stats.execs % kStatsEvery == 0) WriteStats(false);
  return out;
}

void Campaign::CheckMilestones(std::span<const uint8_t> input, const Outcome &outcome) {
  const bool full = CoversAllEvents(outcome.sim);
  if (full && !first_potential_) {
    first_potential_ = Milestone{state_.stats.execs, Elapsed(),
                                 std::vector<uint8_t>(input.begin(), input.end())};
  }
  if (confirm_ && !first_confirmed_ && (full || outcome.crashed) &&
      confirm_(input, last_fb_)) {
    first_confirmed_ = Milestone{state_.stats.execs, Elapsed(),
                                 std::vector<uint8_t>(input.begin(), input.end())};
  }
}

void Campaign::Enqueue(std::vector<uint8_t> bytes, const Outcome &outcome,
                       std::optional<uint64_t> parent) {
  if (!queue_hashes_.insert(Key(bytes)).second) return;
  SeedEntry s;
  s.id = state_.queue.size();
  s.bytes = std::move(bytes);
  s.sim = outcome.sim;
  s.dist = outcome.dist;
  s.cut_score = outcome.cut_score;
  s.new_coverage = outcome.new_coverage;
  s.discovered_at_exec = state_.stats.execs;
  s.discovered_at = Elapsed();
  s.parent = parent;
  if (CompareSelection(s.sim, state_.t_max) > 0) state_.t_max = s.sim;
  if (CoversAllEvents(s.sim)) {
    queue_has_potential_ = true;
    ++state_.stats.potential;
  }
  state_.queue.push_back(std::move(s));
  PersistSeed(state_.queue.back());
}

bool Campaign::HandleMutant(std::vector<uint8_t> bytes, const SeedEntry &parent) {
  Outcome outcome = ExecuteAndScore(bytes);
  CheckMilestones(bytes, outcome);
  if (outcome.crashed) {
    PersistCrash(bytes, outcome);
    return StopConditionReached();
  }
  if (outcome.timed_out) return StopConditionReached();

  const bool raises_t_max = CompareSelection(outcome.sim, state_.t_max) > 0;
  const bool beats_parent =
      outcome.cut_score > parent.cut_score ||
      (outcome.cut_score == parent.cut_score && outcome.dist < parent.dist);
  const bool first_full = CoversAllEvents(outcome.sim) && !queue_has_potential_;
  if (raises_t_max || outcome.new_coverage || beats_parent || first_full) {
    Enqueue(std::move(bytes), outcome, parent.id);
  }
  return StopConditionReached();
}

CampaignReport Campaign::Run() {
  start_ = std::chrono::steady_clock::now();
  start_unix_ = static_cast<int64_t>(std::time(nullptr));
  PrepareOutputDir();

  CampaignReport report;
  if (BudgetExhausted()) {
    report.stop_reason = "budget";
    WriteStats(true);
    return report;
  }

  std::vector<std::vector<uint8_t>> seeds = initial_seeds_;
  if (seeds.empty()) seeds.emplace_back();
  bool stop = false;
  for (auto &seed : seeds) {
    if (BudgetExhausted()) break;
    Outcome outcome = ExecuteAndScore(seed);
    CheckMilestones(seed, outcome);
    if (outcome.crashed) {
      PersistCrash(seed, outcome);
    } else {
      Enqueue(std::move(seed), outcome, std::nullopt);
    }
    if (StopConditionReached()) {
      stop = true;
      break;
    }
  }

  if (!stop && state_.queue.empty() && !BudgetExhausted()) {
    report.stop_reason = "no usable seeds";
    stop = true;
  }
  while (!stop && !BudgetExhausted()) {
    size_t idx = SelectNext(state_, options_.alpha, rng_, options_.mode);
    uint32_t energy = AssignEnergy(state_.queue[idx], state_,
                                   options_.havoc_budget, options_.mode);
    ++state_.queue[idx].times_fuzzed;
    const SeedEntry parent = state_.queue[idx];  // the queue may grow below
    for (uint32_t i = 0; i < energy && !stop; ++i) {
      if (BudgetExhausted()) break;
      stop = HandleMutant(
          MutateInput(parent.bytes, rng_, options_.max_input_size, state_.queue),
          parent);
    }
  }

  if (report.stop_reason.empty()) {
    if (StopConditionReached()) {
      report.stop_reason = options_.stop_on_confirmed && first_confirmed_
                               ? "confirmed"
                               : "potential";
    } else if (stop_requested_) {
      report.stop_reason = "interrupted";
    } else {
      report.stop_reason = "budget";
    }
  }
  report.execs = state_.stats.execs;
  report.queue_size = state_.queue.size();
  report.crashes = state_.stats.crashes;
  report.potential = state_.stats.potential;
  report.t_max = state_.t_max;
  report.elapsed = Elapsed();
  report.first_potential = first_potential_;
  report.first_confirmed = first_confirmed_;
  Publish();
  WriteStats(true);
  return report;
}

StatsSnapshot Campaign::Snapshot() const {
  std::lock_guard<std::mutex> lock(snapshot_mu_);
  return snapshot_;
}

void Campaign::Publish() {
  StatsSnapshot snap{state_.stats, state_.queue.size(), state_.t_max};
  std::lock_guard<std::mutex> lock(snapshot_mu_);
  snapshot_ = snap;
}

void Campaign::PrepareOutputDir() {
  if (options_.output_dir.empty()) return;
  const auto &dir = options_.output_dir;
  for (const char *sub : {"queue", "crashes", "potential"}) {
    std::filesystem::create_directories(dir / sub);
  }
  std::ofstream(dir / kCorpusMetaFile, std::ios::trunc)
      << "path\tt_p\tt_3tp\tt_b\tt_3tb\tdist\tcut_score\tcrashed\n";
  std::ofstream(dir / "plot.csv", std::ios::trunc)
      << "unix_time,execs_done,paths_total,potential_total,crashes_total\n";
}

void Campaign::AppendMeta(const std::string &path, const Outcome &outcome) {
  std::ofstream out(options_.output_dir / kCorpusMetaFile, std::ios::app);
  out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{:.6f}\t{}\n", path, outcome.sim.t_p,
                     outcome.sim.t_3tp, outcome.sim.t_b, outcome.sim.t_3tb,
                     FormatDistance(outcome.dist), outcome.cut_score,
                     outcome.crashed ? 1 : 0);
}

void Campaign::PersistSeed(const SeedEntry &s) {
  if (options_.output_dir.empty()) return;
  std::string name = fmt::format("id_{:06d}", s.id);
  WriteFile(options_.output_dir / "queue" / name, s.bytes);
  if (CoversAllEvents(s.sim)) {
    WriteFile(options_.output_dir / "potential" / name, s.bytes);
  }
  Outcome o;
  o.sim = s.sim;
  o.dist = s.dist;
  o.cut_score = s.cut_score;
  AppendMeta("queue/" + name, o);
  AppendPlotRow();
}

void Campaign::PersistCrash(std::span<const uint8_t> input, const Outcome &outcome) {
  if (!crash_hashes_.insert(Key(input)).second) return;
  ++state_.stats.crashes;
  uint64_t id = crash_count_++;
  if (options_.output_dir.empty()) return;
  std::string name = fmt::format("id_{:06d}", id);
  WriteFile(options_.output_dir / "crashes" / name, input);
  AppendMeta("crashes/" + name, outcome);
  AppendPlotRow();
}

void Campaign::AppendPlotRow() {
  if (options_.output_dir.empty()) return;
  std::ofstream(options_.output_dir / "plot.csv", std::ios::app)
      << fmt::format("{},{},{},{},{}\n", static_cast<int64_t>(std::time(nullptr)),
                     state_.stats.execs, state_.queue.size(), state_.stats.potential,
                     state_.stats.crashes);
}

void Campaign::WriteStats(bool final) {
  if (options_.output_dir.empty()) return;
  const SimilarityTuple &t = state_.t_max;
  std::string text = fmt::format(
      "start_time={}\nlast_update={}\nexecs_done={}\npaths_total={}\n"
      "potential_total={}\ncrashes_total={}\ntimeouts_total={}\n"
      "t_max={},{},{},{}\nrng_seed={}\nschedule={}\n",
      start_unix_, static_cast<int64_t>(std::time(nullptr)), state_.stats.execs,
      state_.queue.size(), state_.stats.potential, state_.stats.crashes,
      state_.stats.timeouts, t.t_p, t.t_3tp, t.t_b, t.t_3tb, state_.rng_seed,
      ScheduleModeName(options_.mode));
  if (first_potential_) text += fmt::format("first_potential_exec={}\n", first_potential_->exec);
  if (first_confirmed_) text += fmt::format("first_confirmed_exec={}\n", first_confirmed_->exec);
  if (final) AppendPlotRow();
  // Write then rename so pollers never see a torn file.
  auto tmp = options_.output_dir / "campaign_stats.tmp";
  std::ofstream(tmp, std::ios::trunc) << text;
  std::filesystem::rename(tmp, options_.output_dir / "campaign_stats");
}

CampaignReport RunCampaign(const StaticMetadata &meta, Executor &executor,
                           const FuzzerOptions &options,
                           std::vector<std::vector<uint8_t>> seeds,
                           ConfirmHook confirm) {
  Campaign campaign(meta, executor, options);
  for (auto &s : seeds) campaign.AddSeed(std::move(s));
  campaign.set_confirm_hook(std::move(confirm));
  return campaign.Run();
}

}  // namespace uafd
