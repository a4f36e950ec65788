// Copyright 2026 The msf-snn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "msf/common.hpp"

namespace msf::metrics {

inline constexpr double kAlarmThreshold = 0.5;

/// Repeats each clip score `frames_per_clip` times, then truncates or pads
/// with the last score to exactly `total_frames`.
inline std::vector<double> expand_scores(std::span<const double> clip_scores,
                                         std::size_t frames_per_clip, std::size_t total_frames) {
  if (clip_scores.empty()) throw ShapeError("expand_scores: empty clip scores");
  if (frames_per_clip == 0) throw ShapeError("expand_scores: frames_per_clip must be >= 1");
  if (clip_scores.size() * frames_per_clip + frames_per_clip < total_frames) {
    throw ShapeError("expand_scores: clips do not cover the frame count");
  }
  std::vector<double> out(total_frames);
  for (std::size_t f = 0; f < total_frames; ++f) {
    out[f] = clip_scores[std::min(f / frames_per_clip, clip_scores.size() - 1)];
  }
  return out;
}

/// Area under the ROC curve via the Mann-Whitney statistic; tied scores
/// across classes count one half.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t q = i; q < j; ++q) {
      if (labels[order[q]] != 0 && labels[order[q]] != 1) throw ShapeError("roc_auc: labels must be 0/1");
      if (labels[order[q]] == 1) {
        pos += 1;
        rank_sum += avg_rank;
      } else {
        neg += 1;
      }
    }
    i = j;
  }
  if (pos == 0 || neg == 0) throw DataError("roc_auc: undefined with a single class present");
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

struct MetricReport {
  double auc = 0.0;
  double far = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Confusion counts with score >= threshold as an alarm.
inline MetricReport confusion(std::span<const double> scores, std::span<const int> labels,
                              double threshold = kAlarmThreshold) {
  if (scores.size() != labels.size()) throw ShapeError("confusion: size mismatch");
  MetricReport r;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool alarm = scores[i] >= threshold;
    if (labels[i] == 1) {
      alarm ? ++r.tp : ++r.fn;
    } else {
      alarm ? ++r.fp : ++r.tn;
    }
  }
  return r;
}

/// False alarm rate FP / (FP + TN).
inline double far(std::span<const double> scores, std::span<const int> labels,
                  double threshold = kAlarmThreshold) {
  const auto r = confusion(scores, labels, threshold);
  if (r.fp + r.tn == 0) throw DataError("far: undefined without negative frames");
  return static_cast<double>(r.fp) / static_cast<double>(r.fp + r.tn);
}

inline MetricReport evaluate(std::span<const double> scores, std::span<const int> labels,
                             double threshold = kAlarmThreshold) {
  auto r = confusion(scores, labels, threshold);
  r.auc = roc_auc(scores, labels);
  r.far = far(scores, labels, threshold);
  return r;
}

}  // namespace msf::metrics
