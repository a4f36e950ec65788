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

// Multi-scale spiking fusion head.
//
// Clip features have shape [T_sim, t, D]: simulation steps, clips, channels.
// Convolutions and graph mixing act along the clip axis independently per
// step; LIF neurons and the temporal interaction recurrence act along the
// step axis.
//
//   F --+-- LSF: 3 dilated convs (d = 1, 2, 4) + LIF --> [T, t, 3D/4] --+
//       |                                                              concat --> TIM --> scorer
//       +-- GSF: 1x1 reduce, cosine + distance graphs, shared W, LIF --+   [T, t, D]      [t]

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "msf/common.hpp"
#include "msf/snn.hpp"
#include "msf/tape.hpp"
#include "msf/tensor.hpp"

namespace msf::model {

using ad::SpikeMode;
using ad::Tape;
using ad::Var;

struct MsfConfig {
  std::size_t channels = 16;  // D, divisible by 4
  std::size_t steps = 4;      // T_sim
  std::size_t kernel = 3;     // LSF kernel width
  std::array<std::size_t, 3> dilations{1, 2, 4};
  std::size_t tim_kernel = 3;
  double alpha = 0.6;
  double sigma = 1.0;
  double tau = snn::kDefaultTau;
  double v_th = snn::kDefaultThreshold;
  double beta = snn::kDefaultSurrogateBeta;
  bool use_lsf = true;
  bool use_gsf = true;
  bool use_tim = true;

  std::size_t quarter() const noexcept { return channels / 4; }

  void validate() const {
    if (channels == 0 || channels % 4 != 0) throw ConfigError("channels (D) must be a positive multiple of 4");
    if (steps == 0) throw ConfigError("steps (T_sim) must be >= 1");
    if (kernel % 2 == 0 || tim_kernel % 2 == 0) throw ConfigError("kernel widths must be odd");
    for (auto d : dilations)
      if (d == 0) throw ConfigError("dilations must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
    if (!(v_th > 0.0)) throw ConfigError("v_th must be positive");
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  }

  ad::LifOptions lif(SpikeMode mode) const { return {{tau, v_th}, mode, beta}; }
};

/// Learnable weights. Linear maps are stored [out, in] except the graph
/// weight, which right-multiplies the reduced features.
struct MsfParams {
  std::array<Tensor, 3> lsf;  // [D/4, D, kernel] each
  Tensor gsf_reduce;          // [D/4, D]
  Tensor gsf_weight;          // [D/4, D/4]
  Tensor tim_kernel;          // [D, tim_kernel], depthwise
  Tensor scorer_w;            // [1, D]
  Tensor scorer_b;            // [1]

  static MsfParams init(const MsfConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t d = cfg.channels, q = cfg.quarter();
    MsfParams p;
    for (auto& k : p.lsf) k = snn::kaiming_uniform({q, d, cfg.kernel}, d * cfg.kernel, rng);
    p.gsf_reduce = snn::kaiming_uniform({q, d}, d, rng);
    p.gsf_weight = snn::kaiming_uniform({q, q}, q, rng);
    p.tim_kernel = Tensor({d, cfg.tim_kernel});
    for (std::size_t c = 0; c < d; ++c) p.tim_kernel(c, cfg.tim_kernel / 2) = 1.0;
    p.scorer_w = snn::kaiming_uniform({1, d}, d, rng);
    p.scorer_b = Tensor({1});
    return p;
  }

 private:
  template <typename Self>
  static auto named_of(Self& s) {
    using Ptr = decltype(&s.gsf_reduce);
    return std::vector<std::pair<std::string, Ptr>>{
        {"lsf.p1", &s.lsf[0]},          {"lsf.p2", &s.lsf[1]},
        {"lsf.p3", &s.lsf[2]},          {"gsf.reduce", &s.gsf_reduce},
        {"gsf.weight", &s.gsf_weight},  {"tim.kernel", &s.tim_kernel},
        {"scorer.weight", &s.scorer_w}, {"scorer.bias", &s.scorer_b}};
  }

 public:
  /// Stable name -> tensor listing, used by the optimizer and checkpoints.
  std::vector<std::pair<std::string, Tensor*>> named() { return named_of(*this); }
  std::vector<std::pair<std::string, const Tensor*>> named() const { return named_of(*this); }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named()) n += t->size();
    return n;
  }

  bool operator==(const MsfParams&) const = default;

};

struct MsfModel {
  MsfConfig config;
  MsfParams params;

  static MsfModel init(const MsfConfig& cfg, Rng& rng) { return {cfg, MsfParams::init(cfg, rng)}; }
};

/// Parameters bound to a tape.
struct ParamVars {
  std::array<Var, 3> lsf;
  Var gsf_reduce, gsf_weight, tim_kernel, scorer_w, scorer_b;

  static ParamVars bind(Tape& tape, const MsfParams& p, bool trainable) {
    auto leaf = [&](const Tensor& t) { return trainable ? tape.variable(t) : tape.constant(t); };
    return {{leaf(p.lsf[0]), leaf(p.lsf[1]), leaf(p.lsf[2])},
            leaf(p.gsf_reduce),
            leaf(p.gsf_weight),
            leaf(p.tim_kernel),
            leaf(p.scorer_w),
            leaf(p.scorer_b)};
  }

  std::vector<Var> list() const {
    return {lsf[0], lsf[1], lsf[2], gsf_reduce, gsf_weight, tim_kernel, scorer_w, scorer_b};
  }
};

inline void check_features(const Tensor& f, const MsfConfig& cfg) {
  if (f.rank() != 3 || f.dim(0) == 0 || f.dim(1) == 0) {
    throw DataError("clip features must be [T_sim >= 1, t >= 1, D], got " + shape_str(f.shape()));
  }
  if (f.dim(2) != cfg.channels) {
    throw DataError("feature width " + std::to_string(f.dim(2)) + " does not match model D = " +
                    std::to_string(cfg.channels));
  }
}

// ---------------------------------------------------------------------------
// Adjacency construction (plain values)

/// Cosine similarity between rows of Fc [t, c]; zero rows score 0 everywhere.
inline Tensor build_similarity_adjacency(const Tensor& fc) {
  require_rank(fc, 2, "build_similarity_adjacency");
  Tape tape;
  return ad::cosine_similarity(tape.constant(fc)).value();
}

/// M(i, j) = -|i - j| / sigma.
inline Tensor build_distance_adjacency(std::size_t t, double sigma) {
  if (t == 0) throw ShapeError("build_distance_adjacency: t must be >= 1");
  if (!(sigma > 0.0)) throw ShapeError("build_distance_adjacency: sigma must be positive");
  Tensor m({t, t});
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j)
      m(i, j) = -std::fabs(static_cast<double>(i) - static_cast<double>(j)) / sigma;
  return m;
}

inline Tensor softmax_rows(const Tensor& m) {
  Tape tape;
  return ad::softmax_last(tape.constant(m)).value();
}

// ---------------------------------------------------------------------------
// Forward stages on a tape

/// Pyramid of dilated convolutions over clips, LIF over steps -> [T, t, 3D/4].
inline Var lsf_forward(Var f, const ParamVars& p, const MsfConfig& cfg, SpikeMode mode) {
  std::array<Var, 3> levels;
  for (std::size_t l = 0; l < 3; ++l) {
    levels[l] = ad::lif(ad::dilated_conv1d(f, p.lsf[l], cfg.dilations[l]), cfg.lif(mode));
  }
  return ad::concat_last(levels);
}

/// Two-branch spiking graph convolution over clips -> [T, t, D/4].
inline Var gsf_forward(Var f, const ParamVars& p, const MsfConfig& cfg, SpikeMode mode) {
  Tape& tape = *f.tape();
  const std::size_t clips = f.shape()[1];
  Var reduced = ad::linear(f, p.gsf_reduce);                              // [T, t, D/4]
  Var sim = ad::softmax_last(ad::cosine_similarity(reduced));             // [T, t, t]
  Var dis = tape.constant(softmax_rows(build_distance_adjacency(clips, cfg.sigma)));
  Var sim_branch = ad::matmul(ad::bmm(sim, reduced), p.gsf_weight);
  Var dis_branch = ad::matmul(ad::bmm(dis, reduced), p.gsf_weight);
  return ad::lif(ad::axpby(0.5, sim_branch, 0.5, dis_branch), cfg.lif(mode));
}

/// Channel concatenation in the order P1, P2, P3, G.
inline Var msf_concat(Var local, Var global, std::size_t channels) {
  const auto& a = local.shape();
  const auto& b = global.shape();
  if (a.size() != 3 || b.size() != 3 || a[0] != b[0] || a[1] != b[1]) {
    throw ShapeError("msf_concat: block shapes " + shape_str(a) + " and " + shape_str(b));
  }
  if (a[2] + b[2] != channels || a[2] != 3 * b[2]) {
    throw ShapeError("msf_concat: channel counts " + std::to_string(a[2]) + " + " +
                     std::to_string(b[2]) + " do not form D = " + std::to_string(channels));
  }
  const std::array<Var, 2> parts{local, global};
  return ad::concat_last(parts);
}

/// state[0] = (1-a) F[0]; state[s] = a conv(state[s-1]) + (1-a) F[s].
/// With a = 0 the input is returned unchanged.
inline Var tim_forward(Var fbar, const ParamVars& p, const MsfConfig& cfg) {
  if (!cfg.use_tim || cfg.alpha == 0.0) return fbar;
  const double a = cfg.alpha;
  const std::size_t steps = fbar.shape()[0];
  std::vector<Var> states;
  states.reserve(steps);
  states.push_back(ad::scale(ad::select0(fbar, 0), 1.0 - a));
  for (std::size_t s = 1; s < steps; ++s) {
    Var history = ad::depthwise_conv1d(states.back(), p.tim_kernel);
    states.push_back(ad::axpby(a, history, 1.0 - a, ad::select0(fbar, s)));
  }
  return ad::stack0(states);
}

/// Rate decoding over steps, affine map, sigmoid -> [t].
inline Var score(Var ftim, const ParamVars& p) {
  const std::size_t clips = ftim.shape()[1];
  Var rate = ad::mean0(ftim);
  Var logits = ad::add_scalar(ad::linear(rate, p.scorer_w), p.scorer_b);
  return ad::reshape(ad::sigmoid(logits), {clips});
}

/// Full head. Disabled LSF/GSF blocks pass the matching input channels
/// through; disabled TIM is the identity.
inline Var msf_forward(Var f, const ParamVars& p, const MsfConfig& cfg,
                       SpikeMode mode = SpikeMode::Hard) {
  check_features(f.value(), cfg);
  const std::size_t d = cfg.channels, q = cfg.quarter();
  Var local = cfg.use_lsf ? lsf_forward(f, p, cfg, mode) : ad::slice_last(f, 0, 3 * q);
  Var global = cfg.use_gsf ? gsf_forward(f, p, cfg, mode) : ad::slice_last(f, 3 * q, d);
  return score(tim_forward(msf_concat(local, global, d), p, cfg), p);
}

// ---------------------------------------------------------------------------
// Value-level wrappers (no gradients)

inline Tensor lsf_forward(const Tensor& f, const MsfModel& m) {
  check_features(f, m.config);
  Tape tape;
  auto p = ParamVars::bind(tape, m.params, false);
  return lsf_forward(tape.constant(f), p, m.config, SpikeMode::Hard).value();
}

inline Tensor gsf_forward(const Tensor& f, const MsfModel& m) {
  check_features(f, m.config);
  Tape tape;
  auto p = ParamVars::bind(tape, m.params, false);
  return gsf_forward(tape.constant(f), p, m.config, SpikeMode::Hard).value();
}

inline Tensor msf_concat(const Tensor& local, const Tensor& global, std::size_t channels) {
  Tape tape;
  return msf_concat(tape.constant(local), tape.constant(global), channels).value();
}

inline Tensor tim_forward(const Tensor& fbar, const MsfModel& m) {
  require_rank(fbar, 3, "tim_forward");
  Tape tape;
  auto p = ParamVars::bind(tape, m.params, false);
  return tim_forward(tape.constant(fbar), p, m.config).value();
}

inline Tensor score(const Tensor& ftim, const MsfModel& m) {
  require_rank(ftim, 3, "score");
  Tape tape;
  auto p = ParamVars::bind(tape, m.params, false);
  return score(tape.constant(ftim), p).value();
}

inline Tensor msf_forward(const Tensor& f, const MsfModel& m, SpikeMode mode = SpikeMode::Hard) {
  Tape tape;
  auto p = ParamVars::bind(tape, m.params, false);
  return msf_forward(tape.constant(f), p, m.config, mode).value();
}

}  // namespace msf::model
