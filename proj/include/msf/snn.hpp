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

// Spiking primitives without gradient bookkeeping: LIF neurons, the
// sigmoid surrogate derivative, dilated and pointwise 1D convolutions.
// The differentiable counterparts live in tape.hpp.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msf/common.hpp"
#include "msf/tensor.hpp"

namespace msf::snn {

inline constexpr double kDefaultTau = 0.625;
inline constexpr double kDefaultThreshold = 1.0;
inline constexpr double kDefaultSurrogateBeta = 4.0;

struct LifParams {
  double tau = kDefaultTau;
  double v_th = kDefaultThreshold;

  void validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw ShapeError("LIF tau must lie in (0, 1)");
    if (!(v_th > 0.0)) throw ShapeError("LIF threshold must be positive");
  }
};

/// Membrane potentials of a population of LIF neurons.
template <std::floating_point T>
struct LifState {
  std::vector<T> u;
  LifParams params;

  static LifState zeros(std::size_t n, LifParams params) {
    params.validate();
    return LifState{std::vector<T>(n, T{0}), params};
  }
};

/// Charge u' = tau*u + x, fire where u' >= v_th, hard reset to zero.
/// Returns the spikes (0/1) and the post-reset state.
template <std::floating_point T>
std::pair<std::vector<T>, LifState<T>> lif_step(const LifState<T>& state,
                                                std::span<const T> input) {
  if (input.size() != state.u.size()) {
    throw ShapeError("lif_step: input size " + std::to_string(input.size()) +
                     " does not match state size " + std::to_string(state.u.size()));
  }
  LifState<T> next{std::vector<T>(state.u.size()), state.params};
  std::vector<T> spikes(state.u.size());
  const T tau = static_cast<T>(state.params.tau);
  const T v_th = static_cast<T>(state.params.v_th);
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T charged = tau * state.u[i] + input[i];
    const bool fire = charged >= v_th;
    spikes[i] = fire ? T{1} : T{0};
    next.u[i] = fire ? T{0} : charged;
  }
  return {std::move(spikes), std::move(next)};
}

/// Runs LIF neurons over axis 0 of `inputs` ([T, ...]) from a zero state.
template <std::floating_point T>
BasicTensor<T> lif_sequence(const BasicTensor<T>& inputs, LifParams params) {
  params.validate();
  if (inputs.rank() == 0 || inputs.dim(0) == 0) throw ShapeError("lif_sequence: need T >= 1");
  const std::size_t steps = inputs.dim(0);
  const std::size_t n = inputs.size() / steps;
  BasicTensor<T> out(inputs.shape());
  auto state = LifState<T>::zeros(n, params);
  for (std::size_t s = 0; s < steps; ++s) {
    auto [spikes, next] = lif_step<T>(state, inputs.data().subspan(s * n, n));
    std::copy(spikes.begin(), spikes.end(), out.data().begin() + static_cast<std::ptrdiff_t>(s * n));
    state = std::move(next);
  }
  return out;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// d/dx of 1 / (1 + exp(-beta*x)). Stand-in derivative of the Heaviside spike.
inline double surrogate_grad(double x, double beta = kDefaultSurrogateBeta) {
  const double s = sigmoid(beta * x);
  return beta * s * (1.0 - s);
}

template <std::floating_point T>
BasicTensor<T> surrogate_grad(const BasicTensor<T>& x, double beta = kDefaultSurrogateBeta) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<T>(surrogate_grad(static_cast<double>(x[i]), beta));
  }
  return out;
}

inline void check_conv_args(std::size_t omega, std::size_t dilation) {
  if (omega % 2 == 0) throw ShapeError("dilated_conv1d: kernel width must be odd");
  if (dilation == 0) throw ShapeError("dilated_conv1d: dilation must be >= 1");
}

/// Same-padded dilated convolution over the position axis.
/// input [t, C_in], kernel [C_out, C_in, omega] -> [t, C_out].
template <std::floating_point T>
BasicTensor<T> dilated_conv1d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                              std::size_t dilation) {
  if (input.rank() != 2 || kernel.rank() != 3 || kernel.dim(1) != input.dim(1)) {
    throw ShapeError("dilated_conv1d: input " + shape_str(input.shape()) + " vs kernel " +
                     shape_str(kernel.shape()));
  }
  const std::size_t len = input.dim(0), c_in = input.dim(1);
  const std::size_t c_out = kernel.dim(0), omega = kernel.dim(2);
  check_conv_args(omega, dilation);
  const auto half = static_cast<std::ptrdiff_t>(omega / 2);
  BasicTensor<T> out({len, c_out});
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t m = 0; m < omega; ++m) {
      const auto src = static_cast<std::ptrdiff_t>(i) +
                       (static_cast<std::ptrdiff_t>(m) - half) * static_cast<std::ptrdiff_t>(dilation);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      const T* x = &input(static_cast<std::size_t>(src), 0);
      for (std::size_t p = 0; p < c_out; ++p) {
        T acc{0};
        for (std::size_t d = 0; d < c_in; ++d) acc += kernel(p, d, m) * x[d];
        out(i, p) += acc;
      }
    }
  }
  return out;
}

/// input [t, D], weight [D_out, D] -> [t, D_out].
template <std::floating_point T>
BasicTensor<T> pointwise_conv(const BasicTensor<T>& input, const BasicTensor<T>& weight) {
  if (input.rank() != 2 || weight.rank() != 2 || weight.dim(1) != input.dim(1)) {
    throw ShapeError("pointwise_conv: input " + shape_str(input.shape()) + " vs weight " +
                     shape_str(weight.shape()));
  }
  const std::size_t len = input.dim(0), d_in = input.dim(1), d_out = weight.dim(0);
  BasicTensor<T> out({len, d_out});
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t p = 0; p < d_out; ++p) {
      T acc{0};
      for (std::size_t d = 0; d < d_in; ++d) acc += weight(p, d) * input(i, d);
      out(i, p) = acc;
    }
  }
  return out;
}

/// Kaiming-uniform (fan-in, ReLU gain): U(-sqrt(6/fan_in), sqrt(6/fan_in)).
inline Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.data()) v = uniform(rng, -bound, bound);
  return t;
}

}  // namespace msf::snn
