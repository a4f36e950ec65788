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

// Plain-text `key = value` run configuration. Blank lines and lines
// starting with '#' are ignored; unknown keys are errors.

#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "msf/byte_io.hpp"
#include "msf/common.hpp"
#include "msf/model.hpp"
#include "msf/synth.hpp"
#include "msf/training.hpp"

namespace msf::config {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("invalid value \"" + std::string(text) + "\" for key " + std::string(key));
  }
  return v;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  throw ConfigError("invalid boolean \"" + std::string(text) + "\" for key " + std::string(key));
}

}  // namespace detail

/// Model, training and data settings in one place.
struct RunConfig {
  model::MsfConfig model;
  training::TrainConfig train;
  synth::SynthSpec data;
  synth::EventSynthSpec events;
  std::size_t save_every = 0;  // epochs between checkpoints; 0 = final only

  RunConfig() {
    // One seed and one (T_sim, D) pair drive every component.
    train.seed = data.seed;
  }

  void set(std::string_view key, std::string_view value) {
    const auto& table = setters();
    auto it = table.find(std::string(key));
    if (it == table.end()) throw ConfigError("unknown config key \"" + std::string(key) + "\"");
    it->second(*this, key, value);
  }

  void validate() const {
    model.validate();
    train.validate();
    data.validate();
    events.validate();
  }

  static std::vector<std::string> keys() {
    std::vector<std::string> out;
    for (const auto& [k, fn] : setters()) out.push_back(k);
    return out;
  }

 private:
  using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;

  static const std::map<std::string, Setter>& setters() {
    using detail::parse_bool;
    using detail::parse_number;
    using U = std::size_t;
    static const std::map<std::string, Setter> table = {
        // model
        {"D", [](RunConfig& c, auto k, auto v) { c.model.channels = c.data.channels = parse_number<U>(k, v); }},
        {"T_sim", [](RunConfig& c, auto k, auto v) { c.model.steps = c.data.steps = parse_number<U>(k, v); }},
        {"omega", [](RunConfig& c, auto k, auto v) { c.model.kernel = parse_number<U>(k, v); }},
        {"dilations",
         [](RunConfig& c, auto k, auto v) {
           std::size_t i = 0, start = 0;
           for (std::size_t p = 0; p <= v.size(); ++p) {
             if (p == v.size() || v[p] == ',') {
               if (i == 3) throw ConfigError("dilations takes exactly 3 values");
               c.model.dilations[i++] = parse_number<U>(k, detail::trim(v.substr(start, p - start)));
               start = p + 1;
             }
           }
           if (i != 3) throw ConfigError("dilations takes exactly 3 values");
         }},
        {"tim_omega", [](RunConfig& c, auto k, auto v) { c.model.tim_kernel = parse_number<U>(k, v); }},
        {"alpha", [](RunConfig& c, auto k, auto v) { c.model.alpha = parse_number<double>(k, v); }},
        {"sigma", [](RunConfig& c, auto k, auto v) { c.model.sigma = parse_number<double>(k, v); }},
        {"tau", [](RunConfig& c, auto k, auto v) { c.model.tau = parse_number<double>(k, v); }},
        {"v_th", [](RunConfig& c, auto k, auto v) { c.model.v_th = parse_number<double>(k, v); }},
        {"beta", [](RunConfig& c, auto k, auto v) { c.model.beta = parse_number<double>(k, v); }},
        {"use_lsf", [](RunConfig& c, auto k, auto v) { c.model.use_lsf = parse_bool(k, v); }},
        {"use_gsf", [](RunConfig& c, auto k, auto v) { c.model.use_gsf = parse_bool(k, v); }},
        {"use_tim", [](RunConfig& c, auto k, auto v) { c.model.use_tim = parse_bool(k, v); }},
        // training
        {"k", [](RunConfig& c, auto k, auto v) { c.train.k = parse_number<U>(k, v); }},
        {"lambda", [](RunConfig& c, auto k, auto v) { c.train.lambda = parse_number<double>(k, v); }},
        {"lr", [](RunConfig& c, auto k, auto v) { c.train.lr = parse_number<double>(k, v); }},
        {"weight_decay", [](RunConfig& c, auto k, auto v) { c.train.weight_decay = parse_number<double>(k, v); }},
        {"batch", [](RunConfig& c, auto k, auto v) { c.train.batch = parse_number<U>(k, v); }},
        {"seed",
         [](RunConfig& c, auto k, auto v) { c.train.seed = c.data.seed = parse_number<std::uint64_t>(k, v); }},
        {"save_every", [](RunConfig& c, auto k, auto v) { c.save_every = parse_number<U>(k, v); }},
        // synthetic data
        {"n_train", [](RunConfig& c, auto k, auto v) { c.data.n_train = parse_number<U>(k, v); }},
        {"n_test", [](RunConfig& c, auto k, auto v) { c.data.n_test = parse_number<U>(k, v); }},
        {"clips_min", [](RunConfig& c, auto k, auto v) { c.data.clips_min = parse_number<U>(k, v); }},
        {"clips_max", [](RunConfig& c, auto k, auto v) { c.data.clips_max = parse_number<U>(k, v); }},
        {"anomaly_fraction", [](RunConfig& c, auto k, auto v) { c.data.anomaly_fraction = parse_number<double>(k, v); }},
        {"span_min", [](RunConfig& c, auto k, auto v) { c.data.span_min = parse_number<U>(k, v); }},
        {"span_max", [](RunConfig& c, auto k, auto v) { c.data.span_max = parse_number<U>(k, v); }},
        {"base_rate", [](RunConfig& c, auto k, auto v) { c.data.base_rate = parse_number<double>(k, v); }},
        {"anomaly_rate", [](RunConfig& c, auto k, auto v) { c.data.anomaly_rate = parse_number<double>(k, v); }},
        {"frames_per_clip", [](RunConfig& c, auto k, auto v) { c.data.frames_per_clip = parse_number<U>(k, v); }},
        // synthetic events
        {"sensor_width",
         [](RunConfig& c, auto k, auto v) { c.events.sensor.width = parse_number<std::uint16_t>(k, v); }},
        {"sensor_height",
         [](RunConfig& c, auto k, auto v) { c.events.sensor.height = parse_number<std::uint16_t>(k, v); }},
        {"window_us", [](RunConfig& c, auto k, auto v) { c.events.window_us = parse_number<std::uint64_t>(k, v); }},
        {"background_per_window",
         [](RunConfig& c, auto k, auto v) { c.events.background_per_window = parse_number<double>(k, v); }},
        {"cluster_per_window",
         [](RunConfig& c, auto k, auto v) { c.events.cluster_per_window = parse_number<double>(k, v); }},
        {"cluster_radius", [](RunConfig& c, auto k, auto v) { c.events.cluster_radius = parse_number<double>(k, v); }},
    };
    return table;
  }
};

/// Applies every `key = value` line of `text` on top of `base`.
inline RunConfig parse(std::string_view text, RunConfig base = {}) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    ++line_no;
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      base.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load(const std::filesystem::path& path, RunConfig base = {}) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("cannot read config file " + path.string());
  const auto bytes = io::read_file(path);
  return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), std::move(base));
}

}  // namespace msf::config
