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

// Per-execution scores: target similarity, seed distance and cut-edge score.

#ifndef UAFD_RUNTIME_METRICS_H_
#define UAFD_RUNTIME_METRICS_H_

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "uafd/bugtrace.h"
#include "uafd/static_metrics.h"

namespace uafd {

struct SimilarityTuple {
  uint32_t t_p = 0;    // targets covered in order, up to the first divergence
  uint32_t t_3tp = 0;  // same, restricted to the alloc/free/use targets
  uint32_t t_b = 0;    // distinct targets covered
  uint32_t t_3tb = 0;  // distinct event targets covered

  bool operator==(const SimilarityTuple &) const = default;
};

// Seed selection order: lexicographic on (t_p, t_3tp, t_b). t_3tb is not
// part of the key.
inline std::strong_ordering CompareSelection(const SimilarityTuple &a,
                                             const SimilarityTuple &b) {
  if (auto c = a.t_p <=> b.t_p; c != 0) return c;
  if (auto c = a.t_3tp <=> b.t_3tp; c != 0) return c;
  return a.t_b <=> b.t_b;
}

std::string ToString(const SimilarityTuple &s);

enum class ExitKind : uint8_t { kNormal, kCrash, kTimeout };

struct ExecStatus {
  ExitKind kind = ExitKind::kNormal;
  int signal = 0;  // for kCrash

  bool operator==(const ExecStatus &) const = default;
};

std::string ToString(const ExecStatus &status);

// An alloc/free/use performed on the synthetic program's abstract object.
struct ObjectEvent {
  UafEvent action;
  BlockRef block;
  bool operator==(const ObjectEvent &) const = default;
};

struct ExecutionFeedback {
  // Indexed by dense CFG edge id.
  std::vector<uint32_t> edge_hits;
  // Hits on edge ids the model does not know; counted, never scored.
  uint64_t unknown_edge_hits = 0;
  // Target indices in the order their blocks executed, repeats included.
  std::vector<uint32_t> target_hits;
  double dist_sum = 0.0;
  uint64_t block_count = 0;
  ExecStatus status;
  // Only the synthetic executor fills this.
  std::vector<ObjectEvent> object_events;

  uint32_t hits(uint32_t edge_id) const {
    return edge_id < edge_hits.size() ? edge_hits[edge_id] : 0;
  }
  bool operator==(const ExecutionFeedback &) const = default;
};

SimilarityTuple Similarity(const TargetSequence &seq, const ExecutionFeedback &fb);

// Mean finite block distance of the run; kInfiniteDistance without blocks.
double SeedDistance(const ExecutionFeedback &fb);

// floor(log2(hits) + 1) for hits > 0, i.e. the bit width of the count.
uint32_t HitWeight(uint32_t hits);

inline constexpr double kDefaultDelta = 0.5;

double CutEdgeScore(const StaticMetadata &meta, const ExecutionFeedback &fb,
                    double delta = kDefaultDelta);

// Number of alloc/free/use events that must be covered in order for an input
// to count as a likely reproducer.
inline constexpr uint32_t kFullEventCount = 3;

inline bool CoversAllEvents(const SimilarityTuple &s) {
  return s.t_3tp >= kFullEventCount;
}

}  // namespace uafd

#endif  // UAFD_RUNTIME_METRICS_H_
