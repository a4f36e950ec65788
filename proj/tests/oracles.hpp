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

// Slow, loop-by-loop reference implementations. They deliberately share no
// code with the library beyond plain data containers.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "msf/event.hpp"
#include "msf/model.hpp"
#include "msf/tensor.hpp"

namespace oracle {

using msf::Tensor;
using Mat = std::vector<std::vector<double>>;     // [rows][cols]
using Cube = std::vector<Mat>;                    // [step][row][col]

inline Mat mat(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Cube to_cube(const Tensor& t) {
  Cube out(t.dim(0), mat(t.dim(1), t.dim(2)));
  for (std::size_t s = 0; s < t.dim(0); ++s)
    for (std::size_t i = 0; i < t.dim(1); ++i)
      for (std::size_t c = 0; c < t.dim(2); ++c) out[s][i][c] = t.vec()[(s * t.dim(1) + i) * t.dim(2) + c];
  return out;
}

inline Mat to_mat(const Tensor& t) {
  Mat out = mat(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) out[i][j] = t.vec()[i * t.dim(1) + j];
  return out;
}

inline double max_abs_diff(const Cube& a, const Tensor& b) {
  double m = 0.0;
  std::size_t n = 0;
  for (const auto& s : a)
    for (const auto& r : s)
      for (double v : r) m = std::max(m, std::fabs(v - b.vec()[n++]));
  return n == b.size() ? m : INFINITY;
}

inline double max_abs_diff(const Mat& a, const Tensor& b) {
  double m = 0.0;
  std::size_t n = 0;
  for (const auto& r : a)
    for (double v : r) m = std::max(m, std::fabs(v - b.vec()[n++]));
  return n == b.size() ? m : INFINITY;
}

// ---------------------------------------------------------------------------
// events

/// Per-event counter into an [x][y][polarity][frame] grid (transposed on
/// purpose relative to the library layout).
inline bool frames_match(const msf::events::EventFrameTensor& f, const msf::events::EventStream& s,
                         std::uint64_t window_us) {
  if (s.events.empty()) return f.frames == 0 && f.counts.empty();
  const std::uint64_t t0 = s.events.front().t;
  const std::size_t frames = static_cast<std::size_t>((s.events.back().t - t0) / window_us) + 1;
  if (f.frames != frames || f.width != s.sensor.width || f.height != s.sensor.height) return false;
  const std::size_t w = s.sensor.width, h = s.sensor.height;
  std::vector<std::uint32_t> grid(w * h * 2 * frames, 0);
  for (const auto& e : s.events) {
    const std::size_t j = static_cast<std::size_t>((e.t - t0) / window_us);
    ++grid[((static_cast<std::size_t>(e.x) * h + e.y) * 2 + e.p) * frames + j];
  }
  if (f.counts.size() != grid.size()) return false;
  for (std::size_t x = 0; x < w; ++x)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t j = 0; j < frames; ++j)
          if (grid[((x * h + y) * 2 + p) * frames + j] != f.counts[((j * 2 + p) * h + y) * w + x]) return false;
  return true;
}

// ---------------------------------------------------------------------------
// neurons and convolutions

/// Scalar LIF over rows of `x` ([steps][neurons]).
inline Mat lif(const Mat& x, double tau, double v_th) {
  Mat out = mat(x.size(), x.empty() ? 0 : x[0].size());
  for (std::size_t n = 0; n < (x.empty() ? 0 : x[0].size()); ++n) {
    double u = 0.0;
    for (std::size_t s = 0; s < x.size(); ++s) {
      u = tau * u + x[s][n];
      if (u >= v_th) {
        out[s][n] = 1.0;
        u = 0.0;
      }
    }
  }
  return out;
}

/// LIF across the step axis of a cube, independently per (row, col).
inline Cube lif(const Cube& x, double tau, double v_th) {
  Cube out = x;
  for (std::size_t i = 0; i < x[0].size(); ++i)
    for (std::size_t c = 0; c < x[0][0].size(); ++c) {
      double u = 0.0;
      for (std::size_t s = 0; s < x.size(); ++s) {
        u = tau * u + x[s][i][c];
        const bool fire = u >= v_th;
        out[s][i][c] = fire ? 1.0 : 0.0;
        if (fire) u = 0.0;
      }
    }
  return out;
}

/// Zero-padded "same" dilated convolution. x [t][cin], w [cout, cin, omega].
inline Mat conv1d(const Mat& x, const Tensor& w, std::size_t dilation) {
  const std::size_t cout = w.dim(0), cin = w.dim(1), omega = w.dim(2);
  const long half = static_cast<long>(omega / 2);
  Mat out = mat(x.size(), cout);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t k = 0; k < omega; ++k) {
          const long src = static_cast<long>(i) + (static_cast<long>(k) - half) * static_cast<long>(dilation);
          if (src < 0 || src >= static_cast<long>(x.size())) continue;
          out[i][o] += w.vec()[(o * cin + c) * omega + k] * x[static_cast<std::size_t>(src)][c];
        }
  return out;
}

/// y[i][o] = sum_c w[o][c] x[i][c].
inline Mat pointwise(const Mat& x, const Tensor& w) {
  Mat out = mat(x.size(), w.dim(0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t o = 0; o < w.dim(0); ++o)
      for (std::size_t c = 0; c < w.dim(1); ++c) out[i][o] += w.vec()[o * w.dim(1) + c] * x[i][c];
  return out;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat out = mat(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

// ---------------------------------------------------------------------------
// graph

inline Mat cosine(const Mat& x) {
  const std::size_t t = x.size();
  Mat out = mat(t, t);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t c = 0; c < x[i].size(); ++c) {
        dot += x[i][c] * x[j][c];
        ni += x[i][c] * x[i][c];
        nj += x[j][c] * x[j][c];
      }
      out[i][j] = (ni == 0 || nj == 0) ? 0.0 : dot / std::sqrt(ni * nj);
    }
  return out;
}

inline Mat distance(std::size_t t, double sigma) {
  Mat out = mat(t, t);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) out[i][j] = -std::abs(static_cast<double>(i) - static_cast<double>(j)) / sigma;
  return out;
}

inline Mat softmax_rows(const Mat& m) {
  Mat out = m;
  for (auto& row : out) {
    double z = 0;
    for (double v : row) z += std::exp(v);
    for (double& v : row) v = std::exp(v) / z;
  }
  return out;
}

// ---------------------------------------------------------------------------
// MSF head, composed from the pieces above

inline Cube lsf(const Cube& f, const msf::model::MsfModel& m) {
  const auto& c = m.config;
  const std::size_t q = c.quarter();
  Cube out(f.size(), mat(f[0].size(), 3 * q));
  for (std::size_t l = 0; l < 3; ++l) {
    Cube pre;
    for (const auto& step : f) pre.push_back(conv1d(step, m.params.lsf[l], c.dilations[l]));
    const Cube spk = lif(pre, c.tau, c.v_th);
    for (std::size_t s = 0; s < f.size(); ++s)
      for (std::size_t i = 0; i < f[0].size(); ++i)
        for (std::size_t o = 0; o < q; ++o) out[s][i][l * q + o] = spk[s][i][o];
  }
  return out;
}

inline Cube gsf(const Cube& f, const msf::model::MsfModel& m) {
  const auto& c = m.config;
  const Mat w = to_mat(m.params.gsf_weight);
  const Mat dis = softmax_rows(distance(f[0].size(), c.sigma));
  Cube pre;
  for (const auto& step : f) {
    const Mat red = pointwise(step, m.params.gsf_reduce);
    const Mat sim = softmax_rows(cosine(red));
    const Mat a = matmul(matmul(sim, red), w);
    const Mat b = matmul(matmul(dis, red), w);
    Mat avg = a;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a[i].size(); ++j) avg[i][j] = 0.5 * a[i][j] + 0.5 * b[i][j];
    pre.push_back(avg);
  }
  return lif(pre, c.tau, c.v_th);
}

inline Cube concat(const Cube& local, const Cube& global) {
  Cube out = local;
  for (std::size_t s = 0; s < out.size(); ++s)
    for (std::size_t i = 0; i < out[s].size(); ++i)
      out[s][i].insert(out[s][i].end(), global[s][i].begin(), global[s][i].end());
  return out;
}

inline Mat depthwise(const Mat& x, const Tensor& k) {
  const std::size_t omega = k.dim(1);
  const long half = static_cast<long>(omega / 2);
  Mat out = mat(x.size(), x[0].size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t c = 0; c < x[0].size(); ++c)
      for (std::size_t j = 0; j < omega; ++j) {
        const long src = static_cast<long>(i) + static_cast<long>(j) - half;
        if (src >= 0 && src < static_cast<long>(x.size())) out[i][c] += k.vec()[c * omega + j] * x[static_cast<std::size_t>(src)][c];
      }
  return out;
}

inline Cube tim(const Cube& fbar, const Tensor& kernel, double alpha) {
  Cube out;
  Mat state = fbar[0];
  for (auto& r : state)
    for (double& v : r) v *= 1.0 - alpha;
  out.push_back(state);
  for (std::size_t s = 1; s < fbar.size(); ++s) {
    const Mat h = depthwise(state, kernel);
    Mat next = fbar[s];
    for (std::size_t i = 0; i < next.size(); ++i)
      for (std::size_t c = 0; c < next[i].size(); ++c) next[i][c] = alpha * h[i][c] + (1.0 - alpha) * fbar[s][i][c];
    state = next;
    out.push_back(state);
  }
  return out;
}

inline std::vector<double> score(const Cube& x, const msf::model::MsfModel& m) {
  const std::size_t t = x[0].size(), d = x[0][0].size();
  std::vector<double> out(t);
  for (std::size_t i = 0; i < t; ++i) {
    double logit = m.params.scorer_b.vec()[0];
    for (std::size_t c = 0; c < d; ++c) {
      double rate = 0;
      for (const auto& step : x) rate += step[i][c];
      logit += m.params.scorer_w.vec()[c] * rate / static_cast<double>(x.size());
    }
    out[i] = 1.0 / (1.0 + std::exp(-logit));
  }
  return out;
}

inline std::vector<double> forward(const Tensor& features, const msf::model::MsfModel& m) {
  const auto& c = m.config;
  const Cube f = to_cube(features);
  const std::size_t q = c.quarter();
  auto slice = [&](std::size_t lo, std::size_t hi) {
    Cube out = f;
    for (auto& s : out)
      for (auto& r : s) r = std::vector<double>(r.begin() + static_cast<long>(lo), r.begin() + static_cast<long>(hi));
    return out;
  };
  const Cube local = c.use_lsf ? lsf(f, m) : slice(0, 3 * q);
  const Cube global = c.use_gsf ? gsf(f, m) : slice(3 * q, c.channels);
  Cube fbar = concat(local, global);
  if (c.use_tim && c.alpha != 0.0) fbar = tim(fbar, m.params.tim_kernel, c.alpha);
  return score(fbar, m);
}

// ---------------------------------------------------------------------------
// losses

inline std::vector<double> topk(std::vector<double> s, std::size_t k) {
  std::stable_sort(s.begin(), s.end(), [](double a, double b) { return a > b; });
  s.resize(std::min(k, s.size()));
  return s;
}

inline double bce(const std::vector<double>& s, int y) {
  double acc = 0;
  for (double v : s) {
    const double p = std::min(std::max(v, 1e-7), 1.0 - 1e-7);
    acc += -(y * std::log(p) + (1 - y) * std::log(1 - p));
  }
  return acc / static_cast<double>(s.size());
}

inline double center(const std::vector<double>& s, int y) {
  if (y == 1) return 0.0;
  double mean = 0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(s.size());
  double acc = 0;
  for (double v : s) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(s.size());
}

struct Losses {
  double dmil, center, total;
};

inline Losses total(const std::vector<std::vector<double>>& scores, const std::vector<int>& labels,
                    std::size_t k, double lambda) {
  double d = 0, c = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    d += bce(topk(scores[i], k), labels[i]);
    c += center(scores[i], labels[i]);
  }
  d /= static_cast<double>(scores.size());
  c /= static_cast<double>(scores.size());
  return {d, c, d + lambda * c};
}

// ---------------------------------------------------------------------------
// optimizer

struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;

  double step(double p, double g, double lr, double wd) {
    g += wd * p;
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    return p - lr * mh / (std::sqrt(vh) + 1e-8);
  }
};

// ---------------------------------------------------------------------------
// metrics

/// ROC by sweeping every distinct threshold, integrated with trapezoids.
inline double trapezoid_auc(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> th(s.begin(), s.end());
  std::sort(th.begin(), th.end(), std::greater<>());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  double pos = 0, neg = 0;
  for (int v : y) (v ? pos : neg) += 1;
  double area = 0, px = 0, py = 0;
  for (double t : th) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) (y[i] ? tp : fp) += 1;
    const double x = fp / neg, yy = tp / pos;
    area += (x - px) * (yy + py) / 2;
    px = x;
    py = yy;
  }
  area += (1 - px) * (1 + py) / 2;
  return area;
}

inline double far(const std::vector<double>& s, const std::vector<int>& y, double th = 0.5) {
  double fp = 0, neg = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (y[i] == 0) {
      neg += 1;
      if (s[i] >= th) fp += 1;
    }
  return fp / neg;
}

}  // namespace oracle
