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

// Corpus directories. Each split directory holds
//   meta.csv       video_id,label,t_i,span_start,span_end  (span -1,-1 if none;
//                  span_end exclusive)
//   <id>.msfw      clip features, one MSFW array named "features" [T_sim, t, D]
// or, for event corpora,
//   <id>.evs       EVS1 event stream, and after binning <id>.evf (EVF1 frames).

#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "msf/byte_io.hpp"
#include "msf/checkpoint.hpp"
#include "msf/event.hpp"
#include "msf/synth.hpp"

namespace msf::corpus {

namespace fs = std::filesystem;

inline constexpr std::string_view kMetaHeader = "video_id,label,t_i,span_start,span_end";

struct MetaRow {
  std::string id;
  int label = 0;
  std::size_t clips = 0;
  std::optional<synth::Span> span;

  bool operator==(const MetaRow&) const = default;
};

inline std::string format_meta(const std::vector<MetaRow>& rows) {
  std::ostringstream os;
  os << kMetaHeader << '\n';
  for (const auto& r : rows) {
    os << r.id << ',' << r.label << ',' << r.clips << ',';
    if (r.span) {
      os << r.span->start << ',' << r.span->end << '\n';
    } else {
      os << "-1,-1\n";
    }
  }
  return os.str();
}

inline std::vector<MetaRow> parse_meta(std::string_view text) {
  std::vector<MetaRow> rows;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    ++line_no;
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line_no == 1) {
      if (line != kMetaHeader) throw ParseError("meta.csv: unexpected header", 1);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (f.size() != 5) throw ParseError("meta.csv: expected 5 fields at line " + std::to_string(line_no), line_no);
    auto num = [&](std::string_view s) {
      long long v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) {
        throw ParseError("meta.csv: bad number \"" + std::string(s) + "\" at line " + std::to_string(line_no), line_no);
      }
      return v;
    };
    MetaRow r;
    r.id = std::string(f[0]);
    const auto label = num(f[1]);
    const auto clips = num(f[2]);
    const auto s0 = num(f[3]), s1 = num(f[4]);
    if ((label != 0 && label != 1) || clips <= 0) {
      throw ParseError("meta.csv: bad label or clip count at line " + std::to_string(line_no), line_no);
    }
    r.label = static_cast<int>(label);
    r.clips = static_cast<std::size_t>(clips);
    if (s0 >= 0) {
      if (s1 <= s0 || s1 > clips) throw ParseError("meta.csv: bad span at line " + std::to_string(line_no), line_no);
      r.span = synth::Span{static_cast<std::size_t>(s0), static_cast<std::size_t>(s1)};
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<MetaRow> read_meta(const fs::path& dir) {
  const auto bytes = io::read_file(dir / "meta.csv");
  return parse_meta(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline void write_meta(const fs::path& dir, const std::vector<MetaRow>& rows) {
  io::write_text(dir / "meta.csv", format_meta(rows));
}

inline void save_feature_split(const fs::path& dir, const std::vector<synth::LabeledVideo>& videos) {
  fs::create_directories(dir);
  std::vector<MetaRow> rows;
  for (const auto& v : videos) {
    rows.push_back({v.bag.id, v.bag.label, v.bag.clips(), v.span});
    checkpoint::save(dir / (v.bag.id + ".msfw"), {{"features", v.bag.features}});
  }
  write_meta(dir, rows);
}

inline void save_event_split(const fs::path& dir, const std::vector<synth::EventVideo>& videos) {
  fs::create_directories(dir);
  std::vector<MetaRow> rows;
  for (const auto& v : videos) {
    rows.push_back({v.id, v.label, v.clips, v.span});
    io::write_file(dir / (v.id + ".evs"), events::serialize_bin(v.stream));
  }
  write_meta(dir, rows);
}

struct LoadOptions {
  std::size_t steps = 4;
  std::size_t channels = 16;
  synth::EncoderSpec encoder{};
};

/// Loads a split, preferring <id>.msfw features and falling back to encoding
/// <id>.evf frames. Encoded clip counts that differ from meta.csv are
/// accepted and the span is clamped to the encoded length.
inline std::vector<synth::LabeledVideo> load_split(const fs::path& dir, const LoadOptions& opt) {
  std::vector<synth::LabeledVideo> out;
  for (const auto& row : read_meta(dir)) {
    synth::LabeledVideo v;
    v.bag.id = row.id;
    v.bag.label = row.label;
    v.span = row.span;
    if (fs::exists(dir / (row.id + ".msfw"))) {
      const auto arrays = checkpoint::load(dir / (row.id + ".msfw"));
      const Tensor* f = checkpoint::find(arrays, "features");
      if (!f || f->rank() != 3) throw DataError(row.id + ".msfw: missing [T_sim, t, D] features array");
      if (f->dim(1) != row.clips) throw DataError(row.id + ": clip count disagrees with meta.csv");
      v.bag.features = *f;
    } else if (fs::exists(dir / (row.id + ".evf"))) {
      const auto frames = events::parse_frames(io::read_file(dir / (row.id + ".evf")));
      v.bag.features = synth::toy_encoder(frames, opt.steps, opt.channels, opt.encoder);
      if (v.bag.clips() == 0) throw DataError(row.id + ".evf: no frames");
      if (v.span) {
        v.span->end = std::min(v.span->end, v.bag.clips());
        if (v.span->start >= v.span->end) v.span.reset();
      }
    } else {
      throw DataError("no features (.msfw) or frames (.evf) for video " + row.id + " in " + dir.string());
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace msf::corpus
