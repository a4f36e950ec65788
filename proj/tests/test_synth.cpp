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


#include <gtest/gtest.h>

#include <cmath>

#include "msf/checkpoint.hpp"
#include "msf/event.hpp"
#include "msf/pipeline.hpp"
#include "msf/synth.hpp"

namespace sy = msf::synth;
using msf::Tensor;

namespace {

sy::SynthSpec small_spec() {
  sy::SynthSpec s;
  s.n_train = 10;
  s.n_test = 6;
  s.clips_min = 8;
  s.clips_max = 14;
  s.span_min = 2;
  s.span_max = 5;
  return s;
}

TEST(FeatureCorpus, NoAnomalies) {
  auto s = small_spec();
  s.anomaly_fraction = 0.0;
  const auto c = sy::gen_feature_corpus(s);
  for (const auto* split : {&c.train, &c.test})
    for (const auto& v : *split) {
      EXPECT_EQ(v.bag.label, 0);
      EXPECT_FALSE(v.span.has_value());
    }
}

TEST(FeatureCorpus, ExtremeRatesMarkPlantedChannelsExactly) {
  auto s = small_spec();
  s.base_rate = 0.0;
  s.anomaly_rate = 1.0;
  const auto c = sy::gen_feature_corpus(s);
  ASSERT_EQ(c.planted_channels.size(), s.channels / 4);
  std::vector<bool> planted(s.channels, false);
  for (auto d : c.planted_channels) planted[d] = true;
  for (const auto& v : c.train) {
    const auto& f = v.bag.features;
    for (std::size_t st = 0; st < f.dim(0); ++st)
      for (std::size_t t = 0; t < f.dim(1); ++t)
        for (std::size_t d = 0; d < f.dim(2); ++d) {
          const bool on = v.span && v.span->contains(t) && planted[d];
          EXPECT_EQ(f(st, t, d), on ? 1.0 : 0.0);
        }
  }
}

TEST(FeatureCorpus, Deterministic) {
  const auto a = sy::gen_feature_corpus(small_spec());
  const auto b = sy::gen_feature_corpus(small_spec());
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].bag.features, b.train[i].bag.features);
    EXPECT_EQ(a.train[i].span, b.train[i].span);
  }
  auto other = small_spec();
  other.seed = 8;
  EXPECT_NE(sy::gen_feature_corpus(other).train[0].bag.features, a.train[0].bag.features);
}

TEST(FeatureCorpus, LabelsAndShapes) {
  const auto s = small_spec();
  const auto c = sy::gen_feature_corpus(s);
  ASSERT_EQ(c.train.size(), s.n_train);
  ASSERT_EQ(c.test.size(), s.n_test);
  std::size_t abnormal = 0;
  for (const auto& v : c.train) {
    EXPECT_EQ(v.bag.label == 1, v.span.has_value());
    abnormal += v.bag.label;
    EXPECT_GE(v.bag.clips(), s.clips_min);
    EXPECT_LE(v.bag.clips(), s.clips_max);
    EXPECT_EQ(v.bag.features.dim(0), s.steps);
    EXPECT_EQ(v.bag.features.dim(2), s.channels);
    const auto fl = v.frame_labels(s.frames_per_clip);
    EXPECT_EQ(fl.size(), v.bag.clips() * s.frames_per_clip);
    if (v.span) {
      EXPECT_GE(v.span->end - v.span->start, s.span_min);
      EXPECT_LE(v.span->end - v.span->start, s.span_max);
      EXPECT_LE(v.span->end, v.bag.clips());
      EXPECT_EQ(fl[v.span->start * s.frames_per_clip], 1);
    }
  }
  EXPECT_EQ(abnormal, 5u);
}

TEST(FeatureCorpus, InfeasibleSpecs) {
  auto s = small_spec();
  s.span_min = 20;
  EXPECT_THROW(sy::gen_feature_corpus(s), msf::ConfigError);
  s = small_spec();
  s.base_rate = 0.6;
  EXPECT_THROW(sy::gen_feature_corpus(s), msf::ConfigError);
  s = small_spec();
  s.channels = 10;
  EXPECT_THROW(sy::gen_feature_corpus(s), msf::ConfigError);
}

TEST(FeatureCorpus, DefaultSpecIsSeparable) {
  const sy::SynthSpec s;
  EXPECT_GE(msf::pipeline::separability_auc(sy::gen_feature_corpus(s), s.frames_per_clip), 0.99);
}

TEST(EventCorpus, SilentSpecGivesEmptyStreams) {
  auto s = small_spec();
  s.anomaly_fraction = 0.0;
  sy::EventSynthSpec es;
  es.background_per_window = 0.0;
  for (const auto& v : sy::gen_event_corpus(s, es).train) EXPECT_TRUE(v.stream.events.empty());
}

TEST(EventCorpus, PoissonBackgroundRate) {
  auto s = small_spec();
  s.anomaly_fraction = 0.0;
  s.n_train = 2;
  s.clips_min = s.clips_max = 7;  // 112 windows per video
  sy::EventSynthSpec es;
  const auto c = sy::gen_event_corpus(s, es);
  const auto& v = c.train[0];
  const auto frames = msf::events::integrate_frames_from(v.stream, es.window_us, 0);
  ASSERT_GE(frames.frames, 100u);
  double total = 0;
  for (std::size_t j = 0; j < 100; ++j)
    for (auto n : frames.frame(j)) total += n;
  const double mean = total / 100.0, lambda = es.background_per_window;
  EXPECT_LT(std::fabs(mean - lambda), 3.0 * std::sqrt(lambda / 100.0));
}

TEST(EventCorpus, DeterministicBytes) {
  const auto s = small_spec();
  const sy::EventSynthSpec es;
  const auto a = sy::gen_event_corpus(s, es), b = sy::gen_event_corpus(s, es);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(msf::events::serialize_bin(a.train[i].stream), msf::events::serialize_bin(b.train[i].stream));
  }
}

TEST(EventCorpus, StreamsAreValidAndLayoutMatchesFeatures) {
  const auto s = small_spec();
  const sy::EventSynthSpec es;
  const auto ev = sy::gen_event_corpus(s, es);
  const auto feat = sy::gen_feature_corpus(s);
  for (std::size_t i = 0; i < ev.train.size(); ++i) {
    EXPECT_EQ(ev.train[i].span, feat.train[i].span);
    EXPECT_EQ(ev.train[i].clips, feat.train[i].bag.clips());
    // Round trip re-validates bounds and ordering.
    EXPECT_EQ(msf::events::parse_bin_events(msf::events::serialize_bin(ev.train[i].stream)), ev.train[i].stream);
  }
}

TEST(Encoder, ZeroCountsGiveZeroSpikes) {
  msf::events::EventFrameTensor f;
  f.frames = 20;
  f.height = 6;
  f.width = 8;
  f.counts.assign(20 * 2 * 6 * 8, 0);
  const auto out = sy::toy_encoder(f, 4, 16);
  EXPECT_EQ(out.shape(), (msf::Shape{4, 2, 16}));
  for (double v : out.vec()) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, ShapeContract) {
  msf::events::EventFrameTensor f;
  f.frames = 33;
  f.height = 4;
  f.width = 4;
  f.counts.assign(33 * 32, 1);
  EXPECT_EQ(sy::toy_encoder(f, 3, 8).shape(), (msf::Shape{3, 3, 8}));
  f.frames = 0;
  f.counts.clear();
  EXPECT_EQ(sy::toy_encoder(f, 3, 8).shape(), (msf::Shape{3, 0, 8}));
}

TEST(Encoder, MonotoneInCounts) {
  auto s = small_spec();
  const auto c = sy::gen_event_corpus(s, {});
  for (const auto& v : c.train) {
    auto f = msf::events::integrate_frames_from(v.stream, msf::events::kPaperWindowUs, 0);
    const auto base = sy::toy_encoder(f, 4, 16);
    for (auto& n : f.counts) n *= 2;
    const auto doubled = sy::toy_encoder(f, 4, 16);
    for (std::size_t clip = 0; clip < base.dim(1); ++clip) {
      double a = 0, b = 0;
      for (std::size_t st = 0; st < 4; ++st)
        for (std::size_t d = 0; d < 16; ++d) a += base(st, clip, d), b += doubled(st, clip, d);
      EXPECT_GE(b, a);
    }
  }
}

TEST(Encoder, AnomalousClipsSpikeMore) {
  auto s = small_spec();
  s.anomaly_fraction = 1.0;
  const auto c = sy::gen_event_corpus(s, {});
  double in_span = 0, out_span = 0;
  std::size_t n_in = 0, n_out = 0;
  for (const auto& v : c.train) {
    const auto f = sy::toy_encoder(msf::events::integrate_frames_from(v.stream, msf::events::kPaperWindowUs, 0), 4, 16);
    for (std::size_t clip = 0; clip < f.dim(1); ++clip) {
      double total = 0;
      for (std::size_t st = 0; st < 4; ++st)
        for (std::size_t d = 0; d < 16; ++d) total += f(st, clip, d);
      (v.span->contains(clip) ? in_span : out_span) += total;
      ++(v.span->contains(clip) ? n_in : n_out);
    }
  }
  EXPECT_GT(in_span / static_cast<double>(n_in), out_span / static_cast<double>(n_out));
}

}  // namespace
