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

#include "uafd/runtime_metrics.h"

#include <bit>

namespace uafd {
namespace {

// Greedy in-order prefix: advance on the expected index, ignore re-hits of
// already matched entries, stop at the first hit of a later entry.
uint32_t PrefixLength(const std::vector<uint32_t> &stream, uint32_t length) {
  uint32_t next = 0;
  for (uint32_t h : stream) {
    if (next == length) break;
    if (h < next) continue;
    if (h == next) {
      ++next;
      continue;
    }
    break;
  }
  return next;
}

}  // namespace

std::string ToString(const SimilarityTuple &s) {
  return "(" + std::to_string(s.t_p) + "," + std::to_string(s.t_3tp) + "," +
         std::to_string(s.t_b) + "," + std::to_string(s.t_3tb) + ")";
}

std::string ToString(const ExecStatus &status) {
  switch (status.kind) {
    case ExitKind::kNormal:
      return "normal";
    case ExitKind::kCrash:
      return "crash(" + std::to_string(status.signal) + ")";
    case ExitKind::kTimeout:
      return "timeout";
  }
  return "?";
}

SimilarityTuple Similarity(const TargetSequence &seq, const ExecutionFeedback &fb) {
  const auto n = static_cast<uint32_t>(seq.targets.size());
  SimilarityTuple s;
  std::vector<bool> seen(n, false);
  std::vector<uint32_t> events;
  std::vector<uint32_t> stream;
  stream.reserve(fb.target_hits.size());
  for (uint32_t h : fb.target_hits) {
    if (h >= n) continue;
    stream.push_back(h);
    if (!seen[h]) {
      seen[h] = true;
      ++s.t_b;
    }
    if (h == seq.alloc_idx) {
      events.push_back(0);
    } else if (h == seq.free_idx) {
      events.push_back(1);
    } else if (h == seq.use_idx) {
      events.push_back(2);
    }
  }
  for (UafEvent e : kAllEvents) {
    if (seen[seq.event_index(e)]) ++s.t_3tb;
  }
  s.t_p = PrefixLength(stream, n);
  s.t_3tp = PrefixLength(events, 3);
  return s;
}

double SeedDistance(const ExecutionFeedback &fb) {
  if (fb.block_count == 0) return kInfiniteDistance;
  return fb.dist_sum / static_cast<double>(fb.block_count);
}

uint32_t HitWeight(uint32_t hits) { return static_cast<uint32_t>(std::bit_width(hits)); }

double CutEdgeScore(const StaticMetadata &meta, const ExecutionFeedback &fb,
                    double delta) {
  double cut = 0;
  double noncut = 0;
  for (uint32_t id : meta.cut_edge_ids) cut += HitWeight(fb.hits(id));
  for (uint32_t id : meta.noncut_edge_ids) noncut += HitWeight(fb.hits(id));
  return cut - delta * noncut;
}

}  // namespace uafd
