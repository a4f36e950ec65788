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

// Event-camera streams: parsing (CSV and EVS1 binary), time slicing and
// integration into per-window polarity count frames (EVF1).

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "msf/byte_io.hpp"
#include "msf/common.hpp"

namespace msf::events {

/// One DVS event. Polarity 0 = OFF, 1 = ON; timestamp in microseconds.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint8_t p = 0;
  std::uint64_t t = 0;

  bool operator==(const Event&) const = default;
};

struct SensorSize {
  std::uint16_t width = 0;
  std::uint16_t height = 0;

  bool operator==(const SensorSize&) const = default;
};

/// Time-ordered events from one sensor.
struct EventStream {
  SensorSize sensor;
  std::vector<Event> events;

  bool operator==(const EventStream&) const = default;
};

enum class EventFormat { Csv, Bin };

/// Event counts per window and polarity, laid out [J, 2, H, W].
struct EventFrameTensor {
  std::uint32_t frames = 0;  // J
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint64_t window_us = 0;
  std::uint64_t t0 = 0;
  std::vector<std::uint32_t> counts;

  std::size_t index(std::size_t j, std::size_t p, std::size_t y, std::size_t x) const {
    return ((j * 2 + p) * height + y) * width + x;
  }
  std::uint32_t at(std::size_t j, std::size_t p, std::size_t y, std::size_t x) const {
    return counts[index(j, p, y, x)];
  }
  std::size_t frame_size() const noexcept { return std::size_t{2} * height * width; }
  std::span<const std::uint32_t> frame(std::size_t j) const {
    return std::span(counts).subspan(j * frame_size(), frame_size());
  }

  bool operator==(const EventFrameTensor&) const = default;
};

inline constexpr std::string_view kEventMagic = "EVS1";
inline constexpr std::string_view kFrameMagic = "EVF1";
inline constexpr std::uint64_t kPaperWindowUs = 533328;  // 16 video frames at 30 fps

namespace detail {

inline void check_event(const Event& e, const SensorSize& sensor, std::uint64_t prev_t, bool first,
                        std::size_t position, const char* unit) {
  const std::string where = std::string(" at ") + unit + " " + std::to_string(position);
  if (e.p > 1) throw ParseError("polarity " + std::to_string(e.p) + " not in {0,1}" + where, position);
  if (e.x >= sensor.width || e.y >= sensor.height) {
    throw ParseError("coordinate (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                         ") outside " + std::to_string(sensor.width) + "x" +
                         std::to_string(sensor.height) + " sensor" + where,
                     position);
  }
  if (!first && e.t < prev_t) {
    throw ParseError("timestamp regression " + std::to_string(e.t) + " < " +
                         std::to_string(prev_t) + where,
                     position);
  }
}

template <typename Int>
Int parse_field(std::string_view field, std::size_t line, const char* name) {
  Int v{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError("malformed " + std::string(name) + " field \"" + std::string(field) +
                         "\" at line " + std::to_string(line),
                     line);
  }
  return v;
}

}  // namespace detail

/// Parses `t,x,y,p` lines. The CSV format carries no header, so the sensor
/// size must be supplied.
inline EventStream parse_csv_events(std::string_view text, SensorSize sensor) {
  EventStream stream{sensor, {}};
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line_no;
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;

    std::string_view fields[4];
    std::size_t n = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size() && n <= 4; ++i) {
      if (i == line.size() || line[i] == ',') {
        if (n < 4) fields[n] = line.substr(start, i - start);
        ++n;
        start = i + 1;
      }
    }
    if (n != 4) {
      throw ParseError("expected 4 comma-separated fields at line " + std::to_string(line_no),
                       line_no);
    }
    const auto t = detail::parse_field<std::uint64_t>(fields[0], line_no, "t");
    const auto x = detail::parse_field<std::uint32_t>(fields[1], line_no, "x");
    const auto y = detail::parse_field<std::uint32_t>(fields[2], line_no, "y");
    const auto p = detail::parse_field<std::uint32_t>(fields[3], line_no, "p");
    if (x > std::numeric_limits<std::uint16_t>::max() ||
        y > std::numeric_limits<std::uint16_t>::max()) {
      throw ParseError("coordinate out of range at line " + std::to_string(line_no), line_no);
    }
    if (p > 1) {
      throw ParseError("polarity " + std::to_string(p) + " not in {0,1} at line " +
                           std::to_string(line_no),
                       line_no);
    }
    const Event e{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                  static_cast<std::uint8_t>(p), t};
    detail::check_event(e, sensor, stream.events.empty() ? 0 : stream.events.back().t,
                        stream.events.empty(), line_no, "line");
    stream.events.push_back(e);
  }
  return stream;
}

/// Parses an EVS1 file: magic, u16 width, u16 height, then 16-byte records.
/// An empty buffer is an empty stream with an unknown (0x0) sensor.
inline EventStream parse_bin_events(std::span<const std::uint8_t> bytes) {
  EventStream stream;
  if (bytes.empty()) return stream;
  io::ByteReader in(bytes);
  in.expect_magic(kEventMagic);
  stream.sensor.width = in.u16();
  stream.sensor.height = in.u16();
  if (in.remaining() % 16 != 0) {
    throw ParseError("trailing partial record at offset " +
                         std::to_string(in.offset() + in.remaining() / 16 * 16),
                     in.offset() + in.remaining() / 16 * 16);
  }
  stream.events.reserve(in.remaining() / 16);
  while (!in.at_end()) {
    const std::size_t at = in.offset();
    Event e;
    e.t = in.u64();
    e.x = in.u16();
    e.y = in.u16();
    const std::uint8_t p = in.u8();
    if (p > 1) {
      throw ParseError("polarity " + std::to_string(p) + " not in {0,1} at offset " +
                           std::to_string(at),
                       at);
    }
    e.p = p;
    for (int i = 0; i < 3; ++i) {
      if (in.u8() != 0) throw ParseError("nonzero pad byte at offset " + std::to_string(at), at);
    }
    detail::check_event(e, stream.sensor, stream.events.empty() ? 0 : stream.events.back().t,
                        stream.events.empty(), at, "offset");
    stream.events.push_back(e);
  }
  return stream;
}

inline EventStream parse_events(std::span<const std::uint8_t> bytes, EventFormat format,
                                SensorSize sensor = {}) {
  if (format == EventFormat::Csv) {
    return parse_csv_events(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), sensor);
  }
  return parse_bin_events(bytes);
}

inline std::string serialize_csv(const EventStream& stream) {
  std::string out;
  out.reserve(stream.events.size() * 24);
  for (const auto& e : stream.events) {
    out += std::to_string(e.t);
    out += ',';
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += ',';
    out += std::to_string(e.p);
    out += '\n';
  }
  return out;
}

inline io::Bytes serialize_bin(const EventStream& stream) {
  io::ByteWriter w;
  w.put_bytes(kEventMagic);
  w.put_u16(stream.sensor.width);
  w.put_u16(stream.sensor.height);
  for (const auto& e : stream.events) {
    w.put_u64(e.t);
    w.put_u16(e.x);
    w.put_u16(e.y);
    w.put_u8(e.p);
    w.put_u8(0);
    w.put_u8(0);
    w.put_u8(0);
  }
  return w.take();
}

/// Integrates events into half-open windows [t0 + j*w, t0 + (j+1)*w).
/// Every event must satisfy t >= t0. The last partial window is kept.
inline EventFrameTensor integrate_frames_from(const EventStream& stream, std::uint64_t window_us,
                                              std::uint64_t t0) {
  if (window_us == 0) throw ShapeError("integrate_frames: window_us must be positive");
  EventFrameTensor out;
  out.height = stream.sensor.height;
  out.width = stream.sensor.width;
  out.window_us = window_us;
  out.t0 = t0;
  if (stream.events.empty()) return out;
  if (stream.events.front().t < t0) throw ShapeError("integrate_frames: event before t0");
  const std::uint64_t span = stream.events.back().t - t0 + 1;
  const std::uint64_t frames = (span + window_us - 1) / window_us;
  if (frames > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError("integrate_frames: too many windows");
  }
  out.frames = static_cast<std::uint32_t>(frames);
  out.counts.assign(static_cast<std::size_t>(frames) * out.frame_size(), 0);
  for (const auto& e : stream.events) {
    const std::size_t j = static_cast<std::size_t>((e.t - t0) / window_us);
    ++out.counts[out.index(j, e.p, e.y, e.x)];
  }
  return out;
}

/// Windows anchored at the first event's timestamp.
inline EventFrameTensor integrate_frames(const EventStream& stream, std::uint64_t window_us) {
  return integrate_frames_from(stream, window_us,
                               stream.events.empty() ? 0 : stream.events.front().t);
}

/// Splits at strictly increasing boundaries into boundaries.size() + 1
/// streams. Stream k holds events with boundaries[k-1] <= t < boundaries[k].
inline std::vector<EventStream> slice_stream(const EventStream& stream,
                                             std::span<const std::uint64_t> boundaries) {
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (boundaries[i] <= boundaries[i - 1]) {
      throw ShapeError("slice_stream: boundaries must be strictly increasing (index " +
                       std::to_string(i) + ")");
    }
  }
  std::vector<EventStream> out(boundaries.size() + 1, EventStream{stream.sensor, {}});
  auto it = stream.events.begin();
  for (std::size_t k = 0; k < boundaries.size(); ++k) {
    auto end = std::lower_bound(it, stream.events.end(), boundaries[k],
                                [](const Event& e, std::uint64_t b) { return e.t < b; });
    out[k].events.assign(it, end);
    it = end;
  }
  out.back().events.assign(it, stream.events.end());
  return out;
}

/// EVF1: magic, u32 J, u32 H, u32 W, u64 window_us, J*2*H*W u16 counts
/// saturated at 65535.
inline io::Bytes serialize_frames(const EventFrameTensor& frames) {
  io::ByteWriter w;
  w.put_bytes(kFrameMagic);
  w.put_u32(frames.frames);
  w.put_u32(frames.height);
  w.put_u32(frames.width);
  w.put_u64(frames.window_us);
  for (auto c : frames.counts) {
    w.put_u16(static_cast<std::uint16_t>(std::min<std::uint32_t>(c, 0xFFFF)));
  }
  return w.take();
}

/// The stream origin t0 is not persisted and reads back as 0.
inline EventFrameTensor parse_frames(std::span<const std::uint8_t> bytes) {
  io::ByteReader in(bytes);
  in.expect_magic(kFrameMagic);
  EventFrameTensor f;
  f.frames = in.u32();
  f.height = in.u32();
  f.width = in.u32();
  f.window_us = in.u64();
  const std::size_t n = static_cast<std::size_t>(f.frames) * f.frame_size();
  if (in.remaining() != n * 2) {
    throw ParseError("frame payload size mismatch: expected " + std::to_string(n * 2) +
                         " bytes, found " + std::to_string(in.remaining()),
                     in.offset());
  }
  f.counts.resize(n);
  for (auto& c : f.counts) c = in.u16();
  return f;
}

}  // namespace msf::events
