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

// MSFW named-array files: "MSFW", u32 count, then per array u16 name
// length, name bytes, u8 ndim, u32 dims, f32 data; all little-endian.
// Used for model checkpoints and for persisted clip features.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msf/byte_io.hpp"
#include "msf/model.hpp"
#include "msf/tensor.hpp"

namespace msf::checkpoint {

inline constexpr std::string_view kMagic = "MSFW";

struct NamedArray {
  std::string name;
  Tensor value;
};

using ArrayFile = std::vector<NamedArray>;

inline io::Bytes serialize(const ArrayFile& arrays) {
  io::ByteWriter w;
  w.put_bytes(kMagic);
  w.put_u32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    if (a.name.size() > std::numeric_limits<std::uint16_t>::max()) throw ShapeError("array name too long");
    if (a.value.rank() > std::numeric_limits<std::uint8_t>::max()) throw ShapeError("array rank too large");
    w.put_u16(static_cast<std::uint16_t>(a.name.size()));
    w.put_bytes(a.name);
    w.put_u8(static_cast<std::uint8_t>(a.value.rank()));
    for (auto d : a.value.shape()) {
      if (d > std::numeric_limits<std::uint32_t>::max()) throw ShapeError("array dimension too large");
      w.put_u32(static_cast<std::uint32_t>(d));
    }
    for (double v : a.value.data()) w.put_f32(static_cast<float>(v));
  }
  return w.take();
}

inline ArrayFile parse(std::span<const std::uint8_t> bytes) {
  io::ByteReader in(bytes);
  in.expect_magic(kMagic);
  const std::uint32_t count = in.u32();
  ArrayFile out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = in.str(in.u16());
    const std::uint8_t ndim = in.u8();
    Shape shape(ndim);
    for (auto& d : shape) d = in.u32();
    const std::size_t n = shape_numel(shape);
    if (n > in.remaining() / 4) {
      throw ParseError("array \"" + a.name + "\" exceeds file size", in.offset());
    }
    std::vector<double> data(n);
    for (auto& v : data) v = static_cast<double>(in.f32());
    a.value = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(a));
  }
  if (!in.at_end()) throw ParseError("trailing bytes after last array", in.offset());
  return out;
}

inline const Tensor* find(const ArrayFile& arrays, std::string_view name) {
  for (const auto& a : arrays)
    if (a.name == name) return &a.value;
  return nullptr;
}

inline void save(const std::filesystem::path& path, const ArrayFile& arrays) {
  io::write_file(path, serialize(arrays));
}

inline ArrayFile load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

// ---------------------------------------------------------------------------
// Model checkpoints: the learnable tensors plus a "config" vector carrying
// the hyperparameters needed to rebuild the forward pass.

namespace detail {
inline constexpr std::size_t kConfigFields = 16;
}

inline ArrayFile to_arrays(const model::MsfModel& m) {
  const auto& c = m.config;
  ArrayFile out;
  out.push_back({"config",
                 Tensor({detail::kConfigFields},
                        {static_cast<double>(c.channels), static_cast<double>(c.steps),
                         static_cast<double>(c.kernel), static_cast<double>(c.dilations[0]),
                         static_cast<double>(c.dilations[1]), static_cast<double>(c.dilations[2]),
                         static_cast<double>(c.tim_kernel), c.alpha, c.sigma, c.tau, c.v_th, c.beta,
                         c.use_lsf ? 1.0 : 0.0, c.use_gsf ? 1.0 : 0.0, c.use_tim ? 1.0 : 0.0,
                         0.0})});
  for (const auto& [name, t] : m.params.named()) out.push_back({name, *t});
  return out;
}

/// Rebuilds a model. Hyperparameters round-trip through f32.
inline model::MsfModel from_arrays(const ArrayFile& arrays) {
  const Tensor* cfg = find(arrays, "config");
  if (!cfg || cfg->size() != detail::kConfigFields) throw DataError("checkpoint has no valid config array");
  const auto& v = *cfg;
  auto count = [](double x) { return static_cast<std::size_t>(std::llround(x)); };
  model::MsfModel m;
  auto& c = m.config;
  c.channels = count(v[0]);
  c.steps = count(v[1]);
  c.kernel = count(v[2]);
  c.dilations = {count(v[3]), count(v[4]), count(v[5])};
  c.tim_kernel = count(v[6]);
  c.alpha = v[7];
  c.sigma = v[8];
  c.tau = v[9];
  c.v_th = v[10];
  c.beta = v[11];
  c.use_lsf = v[12] != 0.0;
  c.use_gsf = v[13] != 0.0;
  c.use_tim = v[14] != 0.0;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config invalid: ") + e.what());
  }
  Rng unused(0);
  m.params = model::MsfParams::init(c, unused);
  for (auto& [name, t] : m.params.named()) {
    const Tensor* src = find(arrays, name);
    if (!src) throw DataError("checkpoint missing array \"" + name + "\"");
    if (src->shape() != t->shape()) {
      throw DataError("checkpoint array \"" + name + "\" has shape " + shape_str(src->shape()) +
                      ", expected " + shape_str(t->shape()));
    }
    *t = *src;
  }
  return m;
}

inline void save_model(const std::filesystem::path& path, const model::MsfModel& m) {
  save(path, to_arrays(m));
}

inline model::MsfModel load_model(const std::filesystem::path& path) {
  return from_arrays(load(path));
}

}  // namespace msf::checkpoint
