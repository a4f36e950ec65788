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

// Weakly supervised multiple-instance training: each video is a bag of
// clips with a single video-level label.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "msf/common.hpp"
#include "msf/model.hpp"
#include "msf/tape.hpp"
#include "msf/tensor.hpp"

namespace msf::training {

using model::MsfModel;

struct VideoBag {
  std::string id;
  Tensor features;  // [T_sim, t, D]
  int label = 0;    // 0 normal, 1 abnormal

  std::size_t clips() const { return features.rank() == 3 ? features.dim(1) : 0; }
};

struct TrainConfig {
  std::size_t k = 4;
  double lambda = 20.0;
  double lr = 1e-4;
  double weight_decay = 5e-4;
  std::size_t batch = 60;  // half normal, half abnormal
  std::size_t epochs = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (k == 0) throw ConfigError("k must be >= 1");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (batch == 0 || batch % 2 != 0) throw ConfigError("batch must be even and positive");
  }
};

// ---------------------------------------------------------------------------
// Losses on plain values

/// Indices of the min(k, t) largest scores, descending; ties go to the
/// lower clip index.
inline std::vector<std::size_t> topk_indices(std::span<const double> scores, std::size_t k) {
  if (scores.empty()) throw ShapeError("topk: empty score vector");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t n = std::min(k, scores.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  idx.resize(n);
  return idx;
}

inline std::vector<double> topk_scores(std::span<const double> scores, std::size_t k) {
  std::vector<double> out;
  for (auto i : topk_indices(scores, k)) out.push_back(scores[i]);
  return out;
}

inline double dmil_loss(std::span<const double> topk, int label) {
  ad::Tape tape;
  return ad::bce_mean(tape.constant(Tensor({topk.size()}, {topk.begin(), topk.end()})), label)
      .value()[0];
}

inline double center_loss(std::span<const double> scores, int label) {
  ad::Tape tape;
  return ad::center_loss(tape.constant(Tensor({scores.size()}, {scores.begin(), scores.end()})),
                         label)
      .value()[0];
}

struct LossValues {
  double dmil = 0.0;
  double center = 0.0;
  double total = 0.0;
};

struct LossVars {
  ad::Var dmil, center, total;

  LossValues values() const { return {dmil.value()[0], center.value()[0], total.value()[0]}; }
};

/// mean_i DMIL_i + lambda * mean_i center_i over the batch.
inline LossVars total_loss(ad::Tape& tape, std::span<const VideoBag* const> batch,
                           const model::ParamVars& params, const model::MsfConfig& cfg,
                           const TrainConfig& tc, ad::SpikeMode mode = ad::SpikeMode::Hard) {
  if (batch.empty()) throw ShapeError("total_loss: empty batch");
  std::vector<ad::Var> dmil, center;
  for (const VideoBag* bag : batch) {
    ad::Var s = model::msf_forward(tape.constant(bag->features), params, cfg, mode);
    const auto& sv = s.value();
    auto top = topk_indices(sv.data(), tc.k);
    dmil.push_back(ad::bce_mean(ad::gather(s, std::move(top)), bag->label));
    center.push_back(ad::center_loss(s, bag->label));
  }
  LossVars out;
  out.dmil = ad::mean_of(dmil);
  out.center = ad::mean_of(center);
  out.total = ad::axpby(1.0, out.dmil, tc.lambda, out.center);
  return out;
}

inline LossValues total_loss(std::span<const VideoBag> batch, const MsfModel& m,
                             const TrainConfig& tc) {
  std::vector<const VideoBag*> ptrs;
  for (const auto& b : batch) ptrs.push_back(&b);
  ad::Tape tape;
  auto p = model::ParamVars::bind(tape, m.params, false);
  return total_loss(tape, ptrs, p, m.config, tc).values();
}

// ---------------------------------------------------------------------------
// Adam with L2 weight decay folded into the gradient

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                      AdamState& state, double lr, double weight_decay) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() || state.m[i].shape() != grads[i].shape()) {
      throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = grads[i][j] + weight_decay * p[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Epoch loop

struct EpochMetrics {
  double dmil = 0.0;
  double center = 0.0;
  double total = 0.0;
  std::size_t batches = 0;
};

/// Per-class batch share: batch/2, reduced to the smaller class size.
inline std::size_t per_class_batch(std::size_t normal, std::size_t abnormal, const TrainConfig& tc) {
  return std::min({tc.batch / 2, normal, abnormal});
}

/// Draws without replacement from a class, reshuffling once exhausted.
class ClassSampler {
 public:
  explicit ClassSampler(std::vector<std::size_t> members) : items_(std::move(members)) {}

  void reshuffle(Rng& rng) {
    for (std::size_t i = items_.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
      std::swap(items_[i - 1], items_[j]);
    }
    cursor_ = 0;
  }

  std::size_t next(Rng& rng) {
    if (cursor_ == items_.size()) reshuffle(rng);
    return items_[cursor_++];
  }

  std::size_t size() const noexcept { return items_.size(); }

 private:
  std::vector<std::size_t> items_;
  std::size_t cursor_ = 0;
};

/// Balanced batches; ceil(max class size / per-class share) batches cover
/// the corpus once. Returns the mean pre-update losses over the epoch.
inline EpochMetrics train_epoch(std::span<const VideoBag> corpus, MsfModel& m, AdamState& adam,
                                const TrainConfig& tc, Rng& rng) {
  tc.validate();
  std::vector<std::size_t> normal, abnormal;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (corpus[i].label == 0 ? normal : abnormal).push_back(i);
  }
  if (normal.empty() || abnormal.empty()) {
    throw DataError("training corpus must contain both normal and abnormal videos");
  }
  const std::size_t share = per_class_batch(normal.size(), abnormal.size(), tc);
  const std::size_t batches = (std::max(normal.size(), abnormal.size()) + share - 1) / share;
  ClassSampler normals(std::move(normal)), abnormals(std::move(abnormal));
  normals.reshuffle(rng);
  abnormals.reshuffle(rng);

  EpochMetrics out;
  auto named = m.params.named();
  std::vector<Tensor*> ptrs;
  for (auto& [name, t] : named) ptrs.push_back(t);

  for (std::size_t b = 0; b < batches; ++b) {
    std::vector<const VideoBag*> batch;
    for (std::size_t i = 0; i < share; ++i) batch.push_back(&corpus[normals.next(rng)]);
    for (std::size_t i = 0; i < share; ++i) batch.push_back(&corpus[abnormals.next(rng)]);

    ad::Tape tape;
    auto pv = model::ParamVars::bind(tape, m.params, true);
    auto loss = total_loss(tape, batch, pv, m.config, tc);
    const auto lv = loss.values();
    tape.backward(loss.total);
    std::vector<Tensor> grads;
    for (const auto& v : pv.list()) grads.push_back(tape.grad(v));
    adam_step(ptrs, grads, adam, tc.lr, tc.weight_decay);

    out.dmil += lv.dmil;
    out.center += lv.center;
    out.total += lv.total;
    ++out.batches;
  }
  const double inv = 1.0 / static_cast<double>(out.batches);
  out.dmil *= inv;
  out.center *= inv;
  out.total *= inv;
  return out;
}

}  // namespace msf::training
