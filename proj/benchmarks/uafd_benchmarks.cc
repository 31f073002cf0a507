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

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "benchmark/benchmark.h"
#include "uafd/bugtrace.h"
#include "uafd/executor.h"
#include "uafd/fuzzer.h"
#include "uafd/static_metrics.h"

namespace {

std::filesystem::path Data(const std::string &name) {
  return std::filesystem::path(UAFD_TESTDATA_DIR) / name;
}

void BM_AnalyzeToy(benchmark::State &state) {
  uafd::ProgramModel model = uafd::ProgramModel::Load(Data("toy.graph.json"));
  uafd::TargetSequence seq = uafd::ResolveTargets(
      uafd::Flatten(uafd::ParseBugTrace(Data("toy.trace"))), model);
  for (auto _ : state) {
    benchmark::DoNotOptimize(uafd::Analyze(model, seq));
  }
}
BENCHMARK(BM_AnalyzeToy);

void BM_AnalyzeReadelf(benchmark::State &state) {
  uafd::ProgramModel model = uafd::ProgramModel::Load(Data("readelf.graph.json"));
  uafd::BugTrace trace = uafd::TrimToProgram(
      uafd::ParseBugTrace(Data("cve-2018-20623.memcheck")), model);
  uafd::TargetSequence seq = uafd::ResolveTargets(uafd::Flatten(trace), model);
  for (auto _ : state) {
    benchmark::DoNotOptimize(uafd::Analyze(model, seq));
  }
}
BENCHMARK(BM_AnalyzeReadelf);

void BM_ParseMemcheck(benchmark::State &state) {
  uafd::BugTrace trace = uafd::ParseBugTrace(Data("cve-2018-20623.memcheck"));
  std::string text = uafd::FormatNativeBugTrace(trace);
  for (auto _ : state) {
    benchmark::DoNotOptimize(uafd::ParseBugTraceText(text));
  }
}
BENCHMARK(BM_ParseMemcheck);

void BM_SyntheticExecute(benchmark::State &state) {
  uafd::SyntheticProgram program =
      uafd::SyntheticProgram::Load(Data("toy.synthetic.json"));
  uafd::TargetSequence seq = uafd::ResolveTargets(
      uafd::Flatten(uafd::ParseBugTrace(Data("toy.trace"))), program.model);
  uafd::StaticMetadata meta = uafd::Analyze(program.model, seq);
  uafd::SyntheticExecutor exec(program, meta);
  std::vector<uint8_t> input = {'A', 'F', 'U', 'A', 0x78, 0x71, 0x7a, 0x6b, 0x6d, 0};
  uafd::ExecutionFeedback fb;
  for (auto _ : state) {
    exec.Run(input, fb);
    benchmark::DoNotOptimize(uafd::Similarity(meta.targets, fb));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SyntheticExecute);

void BM_MutateInput(benchmark::State &state) {
  std::mt19937_64 rng(1);
  std::vector<uint8_t> input(static_cast<size_t>(state.range(0)), 'A');
  for (auto _ : state) {
    benchmark::DoNotOptimize(uafd::MutateInput(input, rng, 1 << 20));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_MutateInput)->Arg(16)->Arg(1024)->Arg(65536);

}  // namespace

BENCHMARK_MAIN();
