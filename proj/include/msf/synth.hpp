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

// Seeded synthetic corpora with planted anomaly spans, for spike features
// and for raw event streams, plus a fixed untrained event-frame encoder.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "msf/common.hpp"
#include "msf/event.hpp"
#include "msf/snn.hpp"
#include "msf/tensor.hpp"
#include "msf/training.hpp"

namespace msf::synth {

struct SynthSpec {
  std::size_t n_train = 40;
  std::size_t n_test = 20;
  std::size_t clips_min = 30;
  std::size_t clips_max = 60;
  std::size_t channels = 16;  // D
  std::size_t steps = 4;      // T_sim
  double anomaly_fraction = 0.5;
  std::size_t span_min = 5;
  std::size_t span_max = 15;
  double base_rate = 0.05;
  double anomaly_rate = 0.5;
  std::size_t frames_per_clip = 16;
  std::uint64_t seed = 7;

  void validate() const {
    if (clips_min == 0 || clips_min > clips_max) throw ConfigError("need 1 <= clips_min <= clips_max");
    if (channels == 0 || channels % 4 != 0) throw ConfigError("channels must be a positive multiple of 4");
    if (steps == 0) throw ConfigError("steps must be >= 1");
    if (!(anomaly_fraction >= 0.0 && anomaly_fraction <= 1.0)) {
      throw ConfigError("anomaly_fraction must lie in [0, 1]");
    }
    if (!(base_rate >= 0.0 && base_rate < anomaly_rate && anomaly_rate <= 1.0)) {
      throw ConfigError("need 0 <= base_rate < anomaly_rate <= 1");
    }
    if (frames_per_clip == 0) throw ConfigError("frames_per_clip must be >= 1");
    if (anomaly_fraction > 0.0 && (span_min == 0 || span_min > span_max || span_min > clips_min)) {
      throw ConfigError("infeasible anomaly span: need 1 <= span_min <= min(span_max, clips_min)");
    }
  }
};

/// Half-open clip range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  bool contains(std::size_t clip) const noexcept { return clip >= start && clip < end; }
  bool operator==(const Span&) const = default;
};

/// Layout of one synthetic video, shared by the feature and event generators.
struct VideoPlan {
  std::string id;
  int label = 0;
  std::size_t clips = 0;
  std::optional<Span> span;
  std::uint64_t seed = 0;
};

struct LabeledVideo {
  training::VideoBag bag;
  std::optional<Span> span;

  /// Per-frame ground truth, `frames_per_clip` frames per clip.
  std::vector<int> frame_labels(std::size_t frames_per_clip) const {
    std::vector<int> out(bag.clips() * frames_per_clip, 0);
    if (span) {
      for (std::size_t f = span->start * frames_per_clip; f < span->end * frames_per_clip; ++f) out[f] = 1;
    }
    return out;
  }
};

struct FeatureCorpus {
  std::vector<LabeledVideo> train;
  std::vector<LabeledVideo> test;
  std::vector<std::size_t> planted_channels;
};

namespace detail {

inline constexpr std::uint64_t kChannelStream = 0xC4A77E15ULL;
inline constexpr std::uint64_t kLabelStream = 0x1ABE15ULL;

/// The channel subset carrying anomalies, fixed per corpus seed.
inline std::vector<std::size_t> planted_channels(const SynthSpec& spec) {
  Rng rng(split_seed(spec.seed, kChannelStream));
  std::vector<std::size_t> all(spec.channels);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (std::size_t i = all.size(); i > 1; --i) {
    std::swap(all[i - 1], all[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)))]);
  }
  all.resize(spec.channels / 4);
  std::sort(all.begin(), all.end());
  return all;
}

inline std::vector<VideoPlan> plan_split(const SynthSpec& spec, std::size_t count,
                                         const std::string& prefix, std::uint64_t stream) {
  const auto abnormal = static_cast<std::size_t>(std::llround(spec.anomaly_fraction * static_cast<double>(count)));
  std::vector<int> labels(count, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(abnormal), 1);
  Rng label_rng(split_seed(spec.seed, kLabelStream + stream));
  for (std::size_t i = labels.size(); i > 1; --i) {
    std::swap(labels[i - 1], labels[static_cast<std::size_t>(uniform_int(label_rng, 0, static_cast<std::int64_t>(i - 1)))]);
  }
  std::vector<VideoPlan> plans;
  for (std::size_t i = 0; i < count; ++i) {
    VideoPlan p;
    char name[32];
    std::snprintf(name, sizeof name, "%s_%04zu", prefix.c_str(), i);
    p.id = name;
    p.label = labels[i];
    p.seed = split_seed(spec.seed, (stream << 32) + i);
    Rng rng(p.seed);
    p.clips = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(spec.clips_min),
                                                   static_cast<std::int64_t>(spec.clips_max)));
    if (p.label == 1) {
      const std::size_t max_len = std::min(spec.span_max, p.clips);
      const auto len = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(spec.span_min),
                                                            static_cast<std::int64_t>(max_len)));
      const auto start = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(p.clips - len)));
      p.span = Span{start, start + len};
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

inline LabeledVideo render_features(const SynthSpec& spec, const VideoPlan& plan,
                                    const std::vector<std::size_t>& planted) {
  // Draws come from a stream separate from the one that picked the layout.
  Rng rng(split_seed(plan.seed, 1));
  Tensor f({spec.steps, plan.clips, spec.channels});
  for (std::size_t s = 0; s < spec.steps; ++s)
    for (std::size_t c = 0; c < plan.clips; ++c)
      for (std::size_t d = 0; d < spec.channels; ++d) f(s, c, d) = uniform01(rng) < spec.base_rate ? 1.0 : 0.0;
  if (plan.span) {
    for (std::size_t s = 0; s < spec.steps; ++s)
      for (std::size_t c = plan.span->start; c < plan.span->end; ++c)
        for (auto d : planted) f(s, c, d) = uniform01(rng) < spec.anomaly_rate ? 1.0 : 0.0;
  }
  return {training::VideoBag{plan.id, std::move(f), plan.label}, plan.span};
}

}  // namespace detail

/// Bernoulli(base_rate) spike features; abnormal videos carry one span
/// redrawn at Bernoulli(anomaly_rate) on a fixed quarter of the channels.
inline FeatureCorpus gen_feature_corpus(const SynthSpec& spec) {
  spec.validate();
  FeatureCorpus out;
  out.planted_channels = detail::planted_channels(spec);
  for (const auto& p : detail::plan_split(spec, spec.n_train, "train", 1)) {
    out.train.push_back(detail::render_features(spec, p, out.planted_channels));
  }
  for (const auto& p : detail::plan_split(spec, spec.n_test, "test", 2)) {
    out.test.push_back(detail::render_features(spec, p, out.planted_channels));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Event streams

struct EventSynthSpec {
  events::SensorSize sensor{64, 48};
  std::uint64_t window_us = events::kPaperWindowUs;
  double background_per_window = 20.0;  // Poisson mean, whole sensor
  double cluster_per_window = 200.0;    // Poisson mean inside anomaly spans
  double cluster_radius = 2.0;          // pixels, Gaussian spread

  void validate() const {
    if (sensor.width == 0 || sensor.height == 0) throw ConfigError("sensor size must be positive");
    if (window_us == 0) throw ConfigError("window_us must be positive");
    if (!(background_per_window >= 0.0) || !(cluster_per_window >= 0.0)) {
      throw ConfigError("event intensities must be >= 0");
    }
  }
};

struct EventVideo {
  std::string id;
  int label = 0;
  std::size_t clips = 0;
  std::optional<Span> span;
  events::EventStream stream;
};

struct EventCorpus {
  std::vector<EventVideo> train;
  std::vector<EventVideo> test;
};

namespace detail {

inline EventVideo render_events(const SynthSpec& spec, const EventSynthSpec& es, const VideoPlan& plan) {
  Rng rng(split_seed(plan.seed, 2));
  EventVideo v{plan.id, plan.label, plan.clips, plan.span, {es.sensor, {}}};
  const std::size_t windows = plan.clips * spec.frames_per_clip;
  const auto w = static_cast<std::int64_t>(es.sensor.width), h = static_cast<std::int64_t>(es.sensor.height);
  std::poisson_distribution<long> background(es.background_per_window);
  std::poisson_distribution<long> cluster(es.cluster_per_window);
  std::normal_distribution<double> jitter(0.0, es.cluster_radius);
  std::vector<events::Event> window_events;
  for (std::size_t j = 0; j < windows; ++j) {
    window_events.clear();
    const std::uint64_t t_begin = j * es.window_us;
    auto stamp = [&] { return t_begin + static_cast<std::uint64_t>(uniform_int(rng, 0, static_cast<std::int64_t>(es.window_us - 1))); };
    const long n_bg = es.background_per_window > 0 ? background(rng) : 0;
    for (long i = 0; i < n_bg; ++i) {
      window_events.push_back({static_cast<std::uint16_t>(uniform_int(rng, 0, w - 1)),
                               static_cast<std::uint16_t>(uniform_int(rng, 0, h - 1)),
                               static_cast<std::uint8_t>(uniform_int(rng, 0, 1)), stamp()});
    }
    const std::size_t clip = j / spec.frames_per_clip;
    if (plan.span && plan.span->contains(clip) && es.cluster_per_window > 0) {
      // The cluster sweeps left to right across the span.
      const double progress = (static_cast<double>(j) - static_cast<double>(plan.span->start * spec.frames_per_clip)) /
                              static_cast<double>((plan.span->end - plan.span->start) * spec.frames_per_clip);
      const double cx = progress * static_cast<double>(w - 1);
      const double cy = 0.5 * static_cast<double>(h - 1) * (1.0 + 0.5 * std::sin(6.283185307179586 * progress));
      const long n = cluster(rng);
      for (long i = 0; i < n; ++i) {
        const auto x = std::clamp<std::int64_t>(std::llround(cx + jitter(rng)), 0, w - 1);
        const auto y = std::clamp<std::int64_t>(std::llround(cy + jitter(rng)), 0, h - 1);
        window_events.push_back({static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                                 static_cast<std::uint8_t>(uniform_int(rng, 0, 1)), stamp()});
      }
    }
    std::stable_sort(window_events.begin(), window_events.end(),
                     [](const auto& a, const auto& b) { return a.t < b.t; });
    v.stream.events.insert(v.stream.events.end(), window_events.begin(), window_events.end());
  }
  return v;
}

}  // namespace detail

/// Poisson background over the whole sensor, plus a moving high-rate
/// cluster during anomaly spans. Video layout matches gen_feature_corpus.
inline EventCorpus gen_event_corpus(const SynthSpec& spec, const EventSynthSpec& es) {
  spec.validate();
  es.validate();
  EventCorpus out;
  for (const auto& p : detail::plan_split(spec, spec.n_train, "train", 1)) {
    out.train.push_back(detail::render_events(spec, es, p));
  }
  for (const auto& p : detail::plan_split(spec, spec.n_test, "test", 2)) {
    out.test.push_back(detail::render_events(spec, es, p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoder

struct EncoderSpec {
  std::size_t grid_x = 4;
  std::size_t grid_y = 2;
  std::size_t frames_per_clip = 16;
  double gain = 0.5;
  std::uint64_t seed = 0x5EED;
  snn::LifParams lif{};
};

/// Fixed, untrained encoder from event frames to spike features
/// [T_sim, ceil(J / frames_per_clip), D]. Counts are pooled on a coarse
/// grid per polarity and summed over each clip's frames; channel d reads
/// pooled cell (d * stride) mod cells through a positive random gain on
/// log1p of the mean per-frame count, and LIF neurons driven by that
/// constant current over T_sim steps emit the spikes. All weights are
/// positive, so more events never mean fewer spikes.
inline Tensor toy_encoder(const events::EventFrameTensor& frames, std::size_t steps, std::size_t channels,
                          const EncoderSpec& enc = {}) {
  if (steps == 0 || channels == 0) throw ShapeError("toy_encoder: steps and channels must be >= 1");
  if (enc.frames_per_clip == 0 || enc.grid_x == 0 || enc.grid_y == 0) throw ShapeError("toy_encoder: bad encoder spec");
  const std::size_t clips = (frames.frames + enc.frames_per_clip - 1) / enc.frames_per_clip;
  Tensor out({steps, clips, channels});
  if (clips == 0) return out;

  const std::size_t cells = 2 * enc.grid_x * enc.grid_y;
  std::size_t stride = 1;
  for (std::size_t s = cells / 2 + 1; s < cells; ++s) {
    if (std::gcd(s, cells) == 1) {
      stride = s;
      break;
    }
  }
  Rng rng(enc.seed);
  std::vector<double> gains(channels);
  for (auto& g : gains) g = enc.gain * uniform(rng, 0.75, 1.25);

  std::vector<double> pooled(cells);
  Tensor current({steps, channels});
  for (std::size_t c = 0; c < clips; ++c) {
    std::fill(pooled.begin(), pooled.end(), 0.0);
    const std::size_t j0 = c * enc.frames_per_clip;
    const std::size_t j1 = std::min<std::size_t>(j0 + enc.frames_per_clip, frames.frames);
    for (std::size_t j = j0; j < j1; ++j)
      for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t y = 0; y < frames.height; ++y)
          for (std::size_t x = 0; x < frames.width; ++x) {
            const std::size_t gx = x * enc.grid_x / frames.width, gy = y * enc.grid_y / frames.height;
            pooled[(p * enc.grid_y + gy) * enc.grid_x + gx] += frames.at(j, p, y, x);
          }
    for (auto& v : pooled) v /= static_cast<double>(j1 - j0);
    for (std::size_t s = 0; s < steps; ++s)
      for (std::size_t d = 0; d < channels; ++d) current(s, d) = gains[d] * std::log1p(pooled[(d * stride) % cells]);
    const Tensor spikes = snn::lif_sequence(current, enc.lif);
    for (std::size_t s = 0; s < steps; ++s)
      for (std::size_t d = 0; d < channels; ++d) out(s, c, d) = spikes(s, d);
  }
  return out;
}

}  // namespace msf::synth
