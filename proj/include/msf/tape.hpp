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

// Reverse-mode differentiation over a linear tape.
//
// Every op appends one node holding its output value and a closure that
// scatters the output gradient into its inputs. Inputs always precede
// outputs on the tape, so walking it backwards is a topological order.
// Spikes use the exact Heaviside forward and the sigmoid surrogate in
// backward; the LIF reset factor is treated as a constant.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msf/common.hpp"
#include "msf/snn.hpp"
#include "msf/tensor.hpp"

namespace msf::ad {

/// Hard: spikes are Heaviside(u - v_th). Smooth: spikes are
/// sigmoid(beta*(u - v_th)), which makes the forward differentiable so
/// finite differences can check the surrogate backward pass.
enum class SpikeMode { Hard, Smooth };

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that receives a gradient (a parameter or a checked input).
  Var variable(Tensor value) { return push(std::move(value), {}, true); }

  /// Leaf without a gradient.
  Var constant(Tensor value) { return push(std::move(value), {}, false); }

  /// Records an op output. `requires_grad` should be true when any input
  /// requires a gradient; otherwise the closure is dropped.
  Var record(Tensor value, Backward fn, bool requires_grad) {
    return push(std::move(value), requires_grad ? std::move(fn) : Backward{}, requires_grad);
  }

  const Tensor& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient accumulator for `v`, zero-initialized on first use.
  Tensor& grad_buffer(Var v) {
    auto& n = node(v);
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  /// Runs the reverse pass from scalar `loss`. A tape can be consumed once.
  void backward(Var loss) {
    if (consumed_) throw StateError("tape already consumed by a previous backward pass");
    if (loss.tape_ != this) throw StateError("loss does not belong to this tape");
    if (value(loss).size() != 1) throw ShapeError("backward: loss must be a scalar");
    consumed_ = true;
    grad_buffer(loss)[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      auto& n = nodes_[i];
      ++visits_;
      if (n.fn && !n.grad.empty()) n.fn(*this, n.grad);
      n.fn = nullptr;
    }
  }

  /// Gradient of the last backward pass w.r.t. `v`; zeros if unreached.
  Tensor grad(Var v) const {
    const auto& n = node(v);
    return n.grad.empty() ? Tensor(n.value.shape()) : n.grad;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t visits() const noexcept { return visits_; }
  bool consumed() const noexcept { return consumed_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward fn;
    bool requires_grad = false;
  };

  Var push(Tensor value, Backward fn, bool requires_grad) {
    if (consumed_) throw StateError("cannot record on a consumed tape");
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(fn), requires_grad});
    return Var(this, nodes_.size() - 1);
  }

  const Node& node(Var v) const {
    if (v.tape_ != this || v.id_ >= nodes_.size()) throw StateError("variable from another tape");
    return nodes_[v.id_];
  }
  Node& node(Var v) {
    if (v.tape_ != this || v.id_ >= nodes_.size()) throw StateError("variable from another tape");
    return nodes_[v.id_];
  }

  std::deque<Node> nodes_;
  std::size_t visits_ = 0;
  bool consumed_ = false;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

namespace detail {

inline Tape& same_tape(std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const auto& v : vars) {
    if (!v.valid()) throw StateError("uninitialized variable");
    if (t && v.tape() != t) throw StateError("variables recorded on different tapes");
    t = v.tape();
  }
  return *t;
}

inline bool any_grad(std::initializer_list<Var> vars) {
  return std::any_of(vars.begin(), vars.end(),
                     [](const Var& v) { return v.tape()->requires_grad(v); });
}

inline std::size_t last_dim(const Tensor& t) { return t.rank() == 0 ? 0 : t.shape().back(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and reductions

inline Var sum(Var x) {
  Tape& tape = detail::same_tape({x});
  const auto& xv = x.value();
  const double s = std::accumulate(xv.data().begin(), xv.data().end(), 0.0);
  return tape.record(
      Tensor::scalar(s),
      [x](Tape& t, const Tensor& g) {
        auto& gx = t.grad_buffer(x);
        for (auto& v : gx.data()) v += g[0];
      },
      detail::any_grad({x}));
}

/// a*x + b*y for equal shapes.
inline Var axpby(double a, Var x, double b, Var y) {
  Tape& tape = detail::same_tape({x, y});
  const auto& xv = x.value();
  const auto& yv = y.value();
  if (xv.shape() != yv.shape()) {
    throw ShapeError("axpby: shape " + shape_str(xv.shape()) + " vs " + shape_str(yv.shape()));
  }
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * xv[i] + b * yv[i];
  return tape.record(
      std::move(out),
      [a, b, x, y](Tape& t, const Tensor& g) {
        if (t.requires_grad(x)) {
          auto& gx = t.grad_buffer(x);
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += a * g[i];
        }
        if (t.requires_grad(y)) {
          auto& gy = t.grad_buffer(y);
          for (std::size_t i = 0; i < g.size(); ++i) gy[i] += b * g[i];
        }
      },
      detail::any_grad({x, y}));
}

inline Var add(Var x, Var y) { return axpby(1.0, x, 1.0, y); }

inline Var scale(Var x, double c) {
  Tape& tape = detail::same_tape({x});
  Tensor out = x.value();
  for (auto& v : out.data()) v *= c;
  return tape.record(
      std::move(out),
      [c, x](Tape& t, const Tensor& g) {
        auto& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
      },
      detail::any_grad({x}));
}

/// x + b where b has a single element.
inline Var add_scalar(Var x, Var b) {
  Tape& tape = detail::same_tape({x, b});
  if (b.value().size() != 1) throw ShapeError("add_scalar: bias must have one element");
  Tensor out = x.value();
  const double bv = b.value()[0];
  for (auto& v : out.data()) v += bv;
  return tape.record(
      std::move(out),
      [x, b](Tape& t, const Tensor& g) {
        if (t.requires_grad(x)) {
          auto& gx = t.grad_buffer(x);
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (t.requires_grad(b)) {
          t.grad_buffer(b)[0] += std::accumulate(g.data().begin(), g.data().end(), 0.0);
        }
      },
      detail::any_grad({x, b}));
}

inline Var sigmoid(Var x) {
  Tape& tape = detail::same_tape({x});
  Tensor out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = snn::sigmoid(xv[i]);
  Tensor saved = out;
  return tape.record(
      std::move(out),
      [x, y = std::move(saved)](Tape& t, const Tensor& g) {
        auto& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
      },
      detail::any_grad({x}));
}

/// Mean over axis 0: [T, ...] -> [...].
inline Var mean0(Var x) {
  Tape& tape = detail::same_tape({x});
  const auto& xv = x.value();
  if (xv.rank() < 2 || xv.dim(0) == 0) throw ShapeError("mean0: need rank >= 2 and T >= 1");
  const std::size_t steps = xv.dim(0);
  const std::size_t n = xv.size() / steps;
  Shape shape(xv.shape().begin() + 1, xv.shape().end());
  Tensor out(shape);
  for (std::size_t s = 0; s < steps; ++s)
    for (std::size_t i = 0; i < n; ++i) out[i] += xv[s * n + i];
  for (auto& v : out.data()) v /= static_cast<double>(steps);
  return tape.record(
      std::move(out),
      [x, steps, n](Tape& t, const Tensor& g) {
        auto& gx = t.grad_buffer(x);
        const double inv = 1.0 / static_cast<double>(steps);
        for (std::size_t s = 0; s < steps; ++s)
          for (std::size_t i = 0; i < n; ++i) gx[s * n + i] += g[i] * inv;
      },
      detail::any_grad({x}));
}

/// Mean of scalar variables.
inline Var mean_of(std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("mean_of: empty list");
  Tape& tape = *xs.front().tape();
  double acc = 0.0;
  bool need = false;
  for (const auto& x : xs) {
    if (x.tape() != &tape) throw StateError("variables recorded on different tapes");
    if (x.value().size() != 1) throw ShapeError("mean_of: expects scalars");
    acc += x.value()[0];
    need = need || tape.requires_grad(x);
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  std::vector<Var> inputs(xs.begin(), xs.end());
  return tape.record(
      Tensor::scalar(acc * inv),
      [inputs = std::move(inputs), inv](Tape& t, const Tensor& g) {
        for (const auto& x : inputs) {
          if (t.requires_grad(x)) t.grad_buffer(x)[0] += g[0] * inv;
        }
      },
      need);
}

// ---------------------------------------------------------------------------
// Indexing along axis 0 and the channel (last) axis

/// x[s] for x of shape [T, ...].
inline Var select0(Var x, std::size_t s) {
  Tape& tape = detail::same_tape({x});
  const auto& xv = x.value();
  if (xv.rank() < 2 || s >= xv.dim(0)) throw ShapeError("select0: index out of range");
  const std::size_t n = xv.size() / xv.dim(0);
  Shape shape(xv.shape().begin() + 1, xv.shape().end());
  std::vector<double> data(xv.data().begin() + static_cast<std::ptrdiff_t>(s * n),
                           xv.data().begin() + static_cast<std::ptrdiff_t>((s + 1) * n));
  return tape.record(
      Tensor(std::move(shape), std::move(data)),
      [x, s, n](Tape& t, const Tensor& g) {
        auto& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < n; ++i) gx[s * n + i] += g[i];
      },
      detail::any_grad({x}));
}

/// Stacks equal-shaped tensors along a new axis 0.
inline Var stack0(std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("stack0: empty list");
  Tape& tape = *xs.front().tape();
  const Shape inner = xs.front().shape();
  const std::size_t n = shape_numel(inner);
  Shape shape{xs.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor out(shape);
  bool need = false;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    if (xs[s].tape() != &tape) throw StateError("variables recorded on different tapes");
    if (xs[s].shape() != inner) throw ShapeError("stack0: shape mismatch");
    std::copy(xs[s].value().data().begin(), xs[s].value().data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(s * n));
    need = need || tape.requires_grad(xs[s]);
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return tape.record(
      std::move(out),
      [inputs = std::move(inputs), n](Tape& t, const Tensor& g) {
        for (std::size_t s = 0; s < inputs.size(); ++s) {
          if (!t.requires_grad(inputs[s])) continue;
          auto& gx = t.grad_buffer(inputs[s]);
          for (std::size_t i = 0; i < n; ++i) gx[i] += g[s * n + i];
        }
      },
      need);
}

/// Concatenation along the last axis; leading shapes must agree.
inline Var concat_last(std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("concat_last: empty list");
  Tape& tape = *xs.front().tape();
  Shape lead = xs.front().shape();
  lead.pop_back();
  const std::size_t rows = shape_numel(lead);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  bool need = false;
  for (const auto& x : xs) {
    if (x.tape() != &tape) throw StateError("variables recorded on different tapes");
    Shape l = x.shape();
    const std::size_t w = l.back();
    l.pop_back();
    if (l != lead) throw ShapeError("concat_last: leading shapes differ");
    widths.push_back(w);
    total += w;
    need = need || tape.requires_grad(x);
  }
  Shape shape = lead;
  shape.push_back(total);
  Tensor out(shape);
  std::size_t off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& xv = xs[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c) out[r * total + off + c] = xv[r * widths[k] + c];
    off += widths[k];
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return tape.record(
      std::move(out),
      [inputs = std::move(inputs), widths = std::move(widths), rows, total](Tape& t,
                                                                            const Tensor& g) {
        std::size_t o = 0;
        for (std::size_t k = 0; k < inputs.size(); ++k) {
          if (t.requires_grad(inputs[k])) {
            auto& gx = t.grad_buffer(inputs[k]);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < widths[k]; ++c) gx[r * widths[k] + c] += g[r * total + o + c];
          }
          o += widths[k];
        }
      },
      need);
}

/// Channels [begin, end) of the last axis.
inline Var slice_last(Var x, std::size_t begin, std::size_t end) {
  Tape& tape = detail::same_tape({x});
  const auto& xv = x.value();
  const std::size_t width = detail::last_dim(xv);
  if (begin >= end || end > width) throw ShapeError("slice_last: bad channel range");
  const std::size_t rows = xv.size() / width, w = end - begin;
  Shape shape = xv.shape();
  shape.back() = w;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = xv[r * width + begin + c];
  return tape.record(
      std::move(out),
      [x, rows, w, width, begin](Tape& t, const Tensor& g) {
        auto& gx = t.grad_buffer(x);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < w; ++c) gx[r * width + begin + c] += g[r * w + c];
      },
      detail::any_grad({x}));
}

inline Var reshape(Var x, Shape shape) {
  Tape& tape = detail::same_tape({x});
  Tensor out = x.value().reshaped(std::move(shape));
  return tape.record(
      std::move(out),
      [x](Tape& t, const Tensor& g) {
        auto& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      },
      detail::any_grad({x}));
}

/// Elements of a 1-D tensor at `index`, in that order.
inline Var gather(Var x, std::vector<std::size_t> index) {
  Tape& tape = detail::same_tape({x});
  const auto& xv = x.value();
  Tensor out({index.size()});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xv.size()) throw ShapeError("gather: index out of range");
    out[i] = xv[index[i]];
  }
  return tape.record(
      std::move(out),
      [x, index = std::move(index)](Tape& t, const Tensor& g) {
        auto& gx = t.grad_buffer(x);
        for (std::size_t i = 0; i < index.size(); ++i) gx[index[i]] += g[i];
      },
      detail::any_grad({x}));
}

// ---------------------------------------------------------------------------
// Linear maps

namespace detail {

/// y[r, o] = sum_i x[r, i] * W(o, i), with W stored [out, in] or [in, out].
inline Var rowwise_linear(Var x, Var w, bool out_in) {
  Tape& tape = same_tape({x, w});
  const auto& xv = x.value();
  const auto& wv = w.value();
  if (wv.rank() != 2 || xv.rank() < 1) throw ShapeError("linear: weight must be a matrix");
  const std::size_t d_in = out_in ? wv.dim(1) : wv.dim(0);
  const std::size_t d_out = out_in ? wv.dim(0) : wv.dim(1);
  if (last_dim(xv) != d_in) {
    throw ShapeError("linear: input " + shape_str(xv.shape()) + " vs weight " +
                     shape_str(wv.shape()));
  }
  const std::size_t rows = xv.size() / d_in;
  auto widx = [out_in, d_in, d_out](std::size_t o, std::size_t i) {
    return out_in ? o * d_in + i : i * d_out + o;
  };
  Shape shape = xv.shape();
  shape.back() = d_out;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &xv[r * d_in];
    for (std::size_t o = 0; o < d_out; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d_in; ++i) acc += wv[widx(o, i)] * xr[i];
      out[r * d_out + o] = acc;
    }
  }
  return tape.record(
      std::move(out),
      [x, w, rows, d_in, d_out, widx](Tape& t, const Tensor& g) {
        const auto& xv = t.value(x);
        const auto& wv = t.value(w);
        if (t.requires_grad(x)) {
          auto& gx = t.grad_buffer(x);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < d_out; ++o) {
              const double go = g[r * d_out + o];
              if (go == 0.0) continue;
              for (std::size_t i = 0; i < d_in; ++i) gx[r * d_in + i] += go * wv[widx(o, i)];
            }
        }
        if (t.requires_grad(w)) {
          auto& gw = t.grad_buffer(w);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < d_out; ++o) {
              const double go = g[r * d_out + o];
              if (go == 0.0) continue;
              for (std::size_t i = 0; i < d_in; ++i) gw[widx(o, i)] += go * xv[r * d_in + i];
            }
        }
      },
      any_grad({x, w}));
}

}  // namespace detail

/// Per-position linear map (1x1 convolution). w is [D_out, D_in].
inline Var linear(Var x, Var w) { return detail::rowwise_linear(x, w, true); }

/// Right multiplication x * w with w stored [D_in, D_out].
inline Var matmul(Var x, Var w) { return detail::rowwise_linear(x, w, false); }

/// Batched a[B, m, k] * b[B, k, n]. A rank-2 `a` is shared across the batch.
inline Var bmm(Var a, Var b) {
  Tape& tape = detail::same_tape({a, b});
  const auto& av = a.value();
  const auto& bv = b.value();
  const bool shared = av.rank() == 2;
  const Tensor& bb = bv;
  if (bb.rank() != 3 || (!shared && (av.rank() != 3 || av.dim(0) != bb.dim(0)))) {
    throw ShapeError("bmm: shapes " + shape_str(av.shape()) + " and " + shape_str(bv.shape()));
  }
  const std::size_t batch = bb.dim(0), k = bb.dim(1), n = bb.dim(2);
  const std::size_t m = shared ? av.dim(0) : av.dim(1);
  if ((shared ? av.dim(1) : av.dim(2)) != k) throw ShapeError("bmm: inner dimensions differ");
  const std::size_t a_stride = shared ? 0 : m * k;
  Tensor out({batch, m, n});
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t q = 0; q < k; ++q) {
        const double aiq = av[s * a_stride + i * k + q];
        if (aiq == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out(s, i, j) += aiq * bv(s, q, j);
      }
  return tape.record(
      std::move(out),
      [a, b, batch, m, k, n, a_stride](Tape& t, const Tensor& g) {
        const auto& av = t.value(a);
        const auto& bv = t.value(b);
        if (t.requires_grad(a)) {
          auto& ga = t.grad_buffer(a);
          for (std::size_t s = 0; s < batch; ++s)
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t q = 0; q < k; ++q) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += g(s, i, j) * bv(s, q, j);
                ga[s * a_stride + i * k + q] += acc;
              }
        }
        if (t.requires_grad(b)) {
          auto& gb = t.grad_buffer(b);
          for (std::size_t s = 0; s < batch; ++s)
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t q = 0; q < k; ++q) {
                const double aiq = av[s * a_stride + i * k + q];
                if (aiq == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) gb(s, q, j) += aiq * g(s, i, j);
              }
        }
      },
      detail::any_grad({a, b}));
}

// ---------------------------------------------------------------------------
// Convolutions along the position axis

/// Same-padded dilated convolution. x is [t, C_in] or [B, t, C_in];
/// w is [C_out, C_in, omega] with omega odd.
inline Var dilated_conv1d(Var x, Var w, std::size_t dilation) {
  Tape& tape = detail::same_tape({x, w});
  const auto& xv = x.value();
  const auto& wv = w.value();
  if ((xv.rank() != 2 && xv.rank() != 3) || wv.rank() != 3 || wv.dim(1) != detail::last_dim(xv)) {
    throw ShapeError("dilated_conv1d: input " + shape_str(xv.shape()) + " vs kernel " +
                     shape_str(wv.shape()));
  }
  const std::size_t omega = wv.dim(2);
  snn::check_conv_args(omega, dilation);
  const std::size_t batch = xv.rank() == 3 ? xv.dim(0) : 1;
  const std::size_t len = xv.dim(xv.rank() - 2), c_in = wv.dim(1), c_out = wv.dim(0);
  const auto half = static_cast<std::ptrdiff_t>(omega / 2);
  auto source = [len, half, dilation](std::size_t i, std::size_t m) -> std::ptrdiff_t {
    const auto s = static_cast<std::ptrdiff_t>(i) +
                   (static_cast<std::ptrdiff_t>(m) - half) * static_cast<std::ptrdiff_t>(dilation);
    return (s < 0 || s >= static_cast<std::ptrdiff_t>(len)) ? -1 : s;
  };
  Shape shape = xv.shape();
  shape.back() = c_out;
  Tensor out(shape);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t m = 0; m < omega; ++m) {
        const auto src = source(i, m);
        if (src < 0) continue;
        const double* xr = &xv[(b * len + static_cast<std::size_t>(src)) * c_in];
        double* orow = &out[(b * len + i) * c_out];
        for (std::size_t p = 0; p < c_out; ++p) {
          double acc = 0.0;
          for (std::size_t d = 0; d < c_in; ++d) acc += wv[(p * c_in + d) * omega + m] * xr[d];
          orow[p] += acc;
        }
      }
  return tape.record(
      std::move(out),
      [x, w, batch, len, c_in, c_out, omega, source](Tape& t, const Tensor& g) {
        const auto& xv = t.value(x);
        const auto& wv = t.value(w);
        const bool gx_on = t.requires_grad(x), gw_on = t.requires_grad(w);
        Tensor* gx = gx_on ? &t.grad_buffer(x) : nullptr;
        Tensor* gw = gw_on ? &t.grad_buffer(w) : nullptr;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t i = 0; i < len; ++i)
            for (std::size_t m = 0; m < omega; ++m) {
              const auto src = source(i, m);
              if (src < 0) continue;
              const std::size_t xoff = (b * len + static_cast<std::size_t>(src)) * c_in;
              const double* grow = &g[(b * len + i) * c_out];
              for (std::size_t p = 0; p < c_out; ++p) {
                const double gp = grow[p];
                if (gp == 0.0) continue;
                for (std::size_t d = 0; d < c_in; ++d) {
                  const std::size_t widx = (p * c_in + d) * omega + m;
                  if (gx) (*gx)[xoff + d] += gp * wv[widx];
                  if (gw) (*gw)[widx] += gp * xv[xoff + d];
                }
              }
            }
      },
      detail::any_grad({x, w}));
}

/// Per-channel same-padded convolution: x [t, C], w [C, omega].
inline Var depthwise_conv1d(Var x, Var w) {
  Tape& tape = detail::same_tape({x, w});
  const auto& xv = x.value();
  const auto& wv = w.value();
  if (xv.rank() != 2 || wv.rank() != 2 || wv.dim(0) != xv.dim(1)) {
    throw ShapeError("depthwise_conv1d: input " + shape_str(xv.shape()) + " vs kernel " +
                     shape_str(wv.shape()));
  }
  const std::size_t len = xv.dim(0), ch = xv.dim(1), omega = wv.dim(1);
  snn::check_conv_args(omega, 1);
  const auto half = static_cast<std::ptrdiff_t>(omega / 2);
  Tensor out({len, ch});
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t m = 0; m < omega; ++m) {
      const auto src = static_cast<std::ptrdiff_t>(i + m) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
      for (std::size_t c = 0; c < ch; ++c) out(i, c) += wv(c, m) * xv(static_cast<std::size_t>(src), c);
    }
  return tape.record(
      std::move(out),
      [x, w, len, ch, omega, half](Tape& t, const Tensor& g) {
        const auto& xv = t.value(x);
        const auto& wv = t.value(w);
        Tensor* gx = t.requires_grad(x) ? &t.grad_buffer(x) : nullptr;
        Tensor* gw = t.requires_grad(w) ? &t.grad_buffer(w) : nullptr;
        for (std::size_t i = 0; i < len; ++i)
          for (std::size_t m = 0; m < omega; ++m) {
            const auto src = static_cast<std::ptrdiff_t>(i + m) - half;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
            const auto s = static_cast<std::size_t>(src);
            for (std::size_t c = 0; c < ch; ++c) {
              if (gx) (*gx)(s, c) += g(i, c) * wv(c, m);
              if (gw) (*gw)(c, m) += g(i, c) * xv(s, c);
            }
          }
      },
      detail::any_grad({x, w}));
}

// ---------------------------------------------------------------------------
// Graph construction

/// Pairwise cosine similarity of rows: x [t, c] -> [t, t] or [B, t, c] ->
/// [B, t, t]. Zero rows are similar to nothing, themselves included.
inline Var cosine_similarity(Var x) {
  Tape& tape = detail::same_tape({x});
  const auto& xv = x.value();
  if (xv.rank() != 2 && xv.rank() != 3) throw ShapeError("cosine_similarity: rank 2 or 3 expected");
  const std::size_t batch = xv.rank() == 3 ? xv.dim(0) : 1;
  const std::size_t len = xv.dim(xv.rank() - 2), c = xv.dim(xv.rank() - 1);
  std::vector<double> norms(batch * len, 0.0);
  for (std::size_t r = 0; r < batch * len; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) s += xv[r * c + k] * xv[r * c + k];
    norms[r] = std::sqrt(s);
  }
  Shape shape = xv.rank() == 3 ? Shape{batch, len, len} : Shape{len, len};
  Tensor out(shape);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t ri = b * len + i;
      if (norms[ri] == 0.0) continue;
      out[(b * len + i) * len + i] = 1.0;
      for (std::size_t j = i + 1; j < len; ++j) {
        const std::size_t rj = b * len + j;
        if (norms[rj] == 0.0) continue;
        double dot = 0.0;
        for (std::size_t k = 0; k < c; ++k) dot += xv[ri * c + k] * xv[rj * c + k];
        const double v = dot / (norms[ri] * norms[rj]);
        out[(b * len + i) * len + j] = v;
        out[(b * len + j) * len + i] = v;
      }
    }
  return tape.record(
      std::move(out),
      [x, batch, len, c, norms = std::move(norms)](Tape& t, const Tensor& g) {
        // M = U U^T with U the row-normalized input. dL/dU = (G + G^T) U, and
        // dL/dx_i = (g_i - (g_i . u_i) u_i) / |x_i|.
        const auto& xv = t.value(x);
        auto& gx = t.grad_buffer(x);
        std::vector<double> gu(c);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t i = 0; i < len; ++i) {
            const std::size_t ri = b * len + i;
            if (norms[ri] == 0.0) continue;
            std::fill(gu.begin(), gu.end(), 0.0);
            for (std::size_t j = 0; j < len; ++j) {
              const std::size_t rj = b * len + j;
              if (j == i || norms[rj] == 0.0) continue;
              const double gij = g[(b * len + i) * len + j] + g[(b * len + j) * len + i];
              for (std::size_t k = 0; k < c; ++k) gu[k] += gij * xv[rj * c + k] / norms[rj];
            }
            double proj = 0.0;
            for (std::size_t k = 0; k < c; ++k) proj += gu[k] * xv[ri * c + k] / norms[ri];
            for (std::size_t k = 0; k < c; ++k) {
              gx[ri * c + k] += (gu[k] - proj * xv[ri * c + k] / norms[ri]) / norms[ri];
            }
          }
      },
      detail::any_grad({x}));
}

/// Softmax over the last axis.
inline Var softmax_last(Var x) {
  Tape& tape = detail::same_tape({x});
  const auto& xv = x.value();
  const std::size_t n = detail::last_dim(xv);
  if (n == 0) throw ShapeError("softmax_last: empty rows");
  const std::size_t rows = xv.size() / n;
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &xv[r * n];
    const double mx = *std::max_element(xr, xr + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (out[r * n + j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] /= z;
  }
  Tensor saved = out;
  return tape.record(
      std::move(out),
      [x, rows, n, y = std::move(saved)](Tape& t, const Tensor& g) {
        auto& gx = t.grad_buffer(x);
        for (std::size_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
          for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
        }
      },
      detail::any_grad({x}));
}

// ---------------------------------------------------------------------------
// Spiking neurons

struct LifOptions {
  snn::LifParams params;
  SpikeMode mode = SpikeMode::Hard;
  double beta = snn::kDefaultSurrogateBeta;
};

/// LIF neurons integrating over axis 0 of x ([T, ...]) from zero potential.
inline Var lif(Var x, const LifOptions& opt) {
  Tape& tape = detail::same_tape({x});
  opt.params.validate();
  const auto& xv = x.value();
  if (xv.rank() < 1 || xv.dim(0) == 0) throw ShapeError("lif: need T >= 1");
  const std::size_t steps = xv.dim(0);
  const std::size_t n = xv.size() / steps;
  const double tau = opt.params.tau, v_th = opt.params.v_th, beta = opt.beta;
  Tensor out(xv.shape());
  // Charged potential before reset, and whether the neuron was reset.
  std::vector<double> charged(xv.size());
  std::vector<unsigned char> fired(xv.size());
  std::vector<double> u(n, 0.0);
  for (std::size_t s = 0; s < steps; ++s)
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = s * n + i;
      const double h = tau * u[i] + xv[k];
      const bool fire = h >= v_th;
      charged[k] = h;
      fired[k] = fire;
      out[k] = opt.mode == SpikeMode::Hard ? (fire ? 1.0 : 0.0) : snn::sigmoid(beta * (h - v_th));
      u[i] = fire ? 0.0 : h;
    }
  return tape.record(
      std::move(out),
      [x, steps, n, tau, v_th, beta, charged = std::move(charged), fired = std::move(fired)](
          Tape& t, const Tensor& g) {
        auto& gx = t.grad_buffer(x);
        std::vector<double> carry(n, 0.0);  // dL/du after reset at the next step
        for (std::size_t s = steps; s-- > 0;) {
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = s * n + i;
            const double keep = fired[k] ? 0.0 : 1.0;
            const double gh = g[k] * snn::surrogate_grad(charged[k] - v_th, beta) + carry[i] * keep;
            gx[k] += gh;
            carry[i] = gh * tau;
          }
        }
      },
      detail::any_grad({x}));
}

// ---------------------------------------------------------------------------
// Losses

inline constexpr double kScoreClamp = 1e-7;

/// Mean binary cross-entropy of `scores` against one label, scores clamped
/// to [eps, 1 - eps]. Clamped entries pass no gradient.
inline Var bce_mean(Var scores, int label, double eps = kScoreClamp) {
  Tape& tape = detail::same_tape({scores});
  if (label != 0 && label != 1) throw ShapeError("bce_mean: label must be 0 or 1");
  const auto& sv = scores.value();
  if (sv.empty()) throw ShapeError("bce_mean: empty score set");
  const double y = label;
  double acc = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    const double s = std::clamp(sv[i], eps, 1.0 - eps);
    acc -= y * std::log(s) + (1.0 - y) * std::log(1.0 - s);
  }
  const double inv = 1.0 / static_cast<double>(sv.size());
  return tape.record(
      Tensor::scalar(acc * inv),
      [scores, y, eps, inv](Tape& t, const Tensor& g) {
        const auto& sv = t.value(scores);
        auto& gs = t.grad_buffer(scores);
        for (std::size_t i = 0; i < sv.size(); ++i) {
          const double s = sv[i];
          if (s < eps || s > 1.0 - eps) continue;
          gs[i] += g[0] * inv * (-y / s + (1.0 - y) / (1.0 - s));
        }
      },
      detail::any_grad({scores}));
}

/// Mean squared deviation of scores from their mean for label 0; exactly 0
/// for label 1.
inline Var center_loss(Var scores, int label) {
  Tape& tape = detail::same_tape({scores});
  if (label != 0 && label != 1) throw ShapeError("center_loss: label must be 0 or 1");
  const auto& sv = scores.value();
  if (sv.empty()) throw ShapeError("center_loss: empty score vector");
  if (label == 1) return tape.constant(Tensor::scalar(0.0));
  const double n = static_cast<double>(sv.size());
  const double c = std::accumulate(sv.data().begin(), sv.data().end(), 0.0) / n;
  double acc = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) acc += (sv[i] - c) * (sv[i] - c);
  return tape.record(
      Tensor::scalar(acc / n),
      [scores, n](Tape& t, const Tensor& g) {
        // The center's own gradient cancels: sum_j (s_j - c) = 0.
        const auto& sv = t.value(scores);
        const double c = std::accumulate(sv.data().begin(), sv.data().end(), 0.0) / n;
        auto& gs = t.grad_buffer(scores);
        for (std::size_t i = 0; i < sv.size(); ++i) gs[i] += g[0] * 2.0 * (sv[i] - c) / n;
      },
      detail::any_grad({scores}));
}

}  // namespace msf::ad
