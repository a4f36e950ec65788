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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msf/common.hpp"
#include "msf/metrics.hpp"
#include "msf/model.hpp"
#include "msf/synth.hpp"
#include "msf/training.hpp"

namespace msf::pipeline {

inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kTrainStream = 2;

/// Initial weights for a run; depends only on (config, seed).
inline model::MsfModel init_model(const model::MsfConfig& cfg, std::uint64_t seed) {
  Rng rng(split_seed(seed, kInitStream));
  return model::MsfModel::init(cfg, rng);
}

using EpochCallback = std::function<void(std::size_t epoch, const training::EpochMetrics&,
                                         const model::MsfModel&)>;

/// Trains for tc.epochs epochs from init_model(cfg, tc.seed).
inline model::MsfModel fit(std::span<const synth::LabeledVideo> videos, const model::MsfConfig& cfg,
                           const training::TrainConfig& tc, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  tc.validate();
  std::vector<training::VideoBag> bags;
  bags.reserve(videos.size());
  for (const auto& v : videos) {
    model::check_features(v.bag.features, cfg);
    bags.push_back(v.bag);
  }
  auto m = init_model(cfg, tc.seed);
  training::AdamState adam;
  Rng rng(split_seed(tc.seed, kTrainStream));
  for (std::size_t e = 0; e < tc.epochs; ++e) {
    const auto metrics = training::train_epoch(bags, m, adam, tc, rng);
    if (on_epoch) on_epoch(e + 1, metrics, m);
  }
  return m;
}

struct VideoResult {
  std::string id;
  std::vector<double> frame_scores;
  std::vector<int> frame_labels;
  std::optional<double> auc;  // undefined for single-class videos
  std::optional<double> far;  // undefined without normal frames
};

struct Evaluation {
  metrics::MetricReport pooled;
  std::vector<VideoResult> videos;
};

/// Frame-level scores for every video, pooled AUC and FAR over all frames.
inline Evaluation evaluate(const model::MsfModel& m, std::span<const synth::LabeledVideo> videos,
                           std::size_t frames_per_clip) {
  Evaluation out;
  std::vector<double> all_scores;
  std::vector<int> all_labels;
  for (const auto& v : videos) {
    model::check_features(v.bag.features, m.config);
    const Tensor clip_scores = model::msf_forward(v.bag.features, m);
    VideoResult r;
    r.id = v.bag.id;
    r.frame_labels = v.frame_labels(frames_per_clip);
    r.frame_scores = metrics::expand_scores(clip_scores.data(), frames_per_clip, r.frame_labels.size());
    const auto conf = metrics::confusion(r.frame_scores, r.frame_labels);
    if (conf.tp + conf.fn > 0 && conf.fp + conf.tn > 0) r.auc = metrics::roc_auc(r.frame_scores, r.frame_labels);
    if (conf.fp + conf.tn > 0) r.far = metrics::far(r.frame_scores, r.frame_labels);
    all_scores.insert(all_scores.end(), r.frame_scores.begin(), r.frame_scores.end());
    all_labels.insert(all_labels.end(), r.frame_labels.begin(), r.frame_labels.end());
    out.videos.push_back(std::move(r));
  }
  out.pooled = metrics::evaluate(all_scores, all_labels);
  return out;
}

/// Frame AUC of a score oracle that knows the planted channels: the mean
/// spike count on those channels per clip. Certifies the corpus is solvable.
inline double separability_auc(const synth::FeatureCorpus& corpus, std::size_t frames_per_clip) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& v : corpus.test) {
    const auto& f = v.bag.features;
    std::vector<double> clip(f.dim(1), 0.0);
    for (std::size_t s = 0; s < f.dim(0); ++s)
      for (std::size_t c = 0; c < f.dim(1); ++c)
        for (auto d : corpus.planted_channels) clip[c] += f(s, c, d);
    for (auto& x : clip) x /= static_cast<double>(f.dim(0) * corpus.planted_channels.size());
    const auto fl = v.frame_labels(frames_per_clip);
    const auto fs = metrics::expand_scores(clip, frames_per_clip, fl.size());
    scores.insert(scores.end(), fs.begin(), fs.end());
    labels.insert(labels.end(), fl.begin(), fl.end());
  }
  return metrics::roc_auc(scores, labels);
}

}  // namespace msf::pipeline
