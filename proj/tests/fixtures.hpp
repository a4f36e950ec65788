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


// Random inputs shared by the unit tests and the acceptance suite.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "msf/common.hpp"
#include "msf/event.hpp"
#include "msf/model.hpp"
#include "msf/tensor.hpp"

namespace fixture {

using msf::Rng;
using msf::Tensor;

inline Tensor random_tensor(msf::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = msf::uniform(rng, lo, hi);
  return t;
}

inline Tensor random_binary(msf::Shape shape, Rng& rng, double p = 0.3) {
  Tensor t(std::move(shape));
  for (auto& v : t.vec()) v = msf::uniform01(rng) < p ? 1.0 : 0.0;
  return t;
}

/// Sorted random events on a w x h sensor within [t_lo, t_hi].
inline msf::events::EventStream random_stream(Rng& rng, std::size_t n, std::uint16_t w, std::uint16_t h,
                                              std::uint64_t t_lo, std::uint64_t t_hi) {
  msf::events::EventStream s{{w, h}, {}};
  s.events.resize(n);
  for (auto& e : s.events) {
    e.x = static_cast<std::uint16_t>(msf::uniform_int(rng, 0, w - 1));
    e.y = static_cast<std::uint16_t>(msf::uniform_int(rng, 0, h - 1));
    e.p = static_cast<std::uint8_t>(msf::uniform_int(rng, 0, 1));
    e.t = static_cast<std::uint64_t>(
        msf::uniform_int(rng, static_cast<std::int64_t>(t_lo), static_cast<std::int64_t>(t_hi)));
  }
  std::stable_sort(s.events.begin(), s.events.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  return s;
}

/// Model with weights scaled up so spikes actually occur on random input.
inline msf::model::MsfModel lively_model(const msf::model::MsfConfig& cfg, Rng& rng, double gain = 3.0) {
  auto m = msf::model::MsfModel::init(cfg, rng);
  for (auto& [name, t] : m.params.named()) {
    if (name == "tim.kernel") continue;
    for (auto& v : t->vec()) v *= gain;
  }
  for (auto& v : m.params.tim_kernel.vec()) v += msf::uniform(rng, -0.3, 0.3);
  return m;
}

}  // namespace fixture
