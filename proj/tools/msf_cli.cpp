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


// msf: synthetic corpora, event binning, training, evaluation, ablations.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "msf/msf.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kRuntime = 4 };

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;  // key=value
};

msf::config::RunConfig resolve(const Globals& g) {
  auto rc = g.config_path.empty() ? msf::config::RunConfig{} : msf::config::load(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw msf::ConfigError("--set expects key=value, got \"" + kv + "\"");
    rc.set(msf::config::detail::trim(std::string_view(kv).substr(0, eq)),
           msf::config::detail::trim(std::string_view(kv).substr(eq + 1)));
  }
  if (g.seed) rc.set("seed", std::to_string(*g.seed));
  rc.validate();
  return rc;
}

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw msf::ConfigError("--out DIR is required for this command");
  fs::create_directories(g.out);
  return g.out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

fs::path split_dir(const fs::path& corpus, const char* split) {
  return fs::is_directory(corpus / split) ? corpus / split : corpus;
}

std::vector<msf::synth::LabeledVideo> load_videos(const fs::path& dir, const msf::config::RunConfig& rc) {
  msf::corpus::LoadOptions opt;
  opt.steps = rc.model.steps;
  opt.channels = rc.model.channels;
  opt.encoder.frames_per_clip = rc.data.frames_per_clip;
  return msf::corpus::load_split(dir, opt);
}

// ---------------------------------------------------------------------------

int cmd_synth(const Globals& g, const std::string& mode) {
  const auto rc = resolve(g);
  const auto out = require_out(g);
  if (mode == "features") {
    const auto c = msf::synth::gen_feature_corpus(rc.data);
    msf::corpus::save_feature_split(out / "train", c.train);
    msf::corpus::save_feature_split(out / "test", c.test);
    std::cout << "wrote " << c.train.size() << " train and " << c.test.size() << " test videos to " << out.string()
              << "\n";
  } else {
    const auto c = msf::synth::gen_event_corpus(rc.data, rc.events);
    msf::corpus::save_event_split(out / "train", c.train);
    msf::corpus::save_event_split(out / "test", c.test);
    std::cout << "wrote " << c.train.size() << " train and " << c.test.size() << " test event streams to "
              << out.string() << "\n";
  }
  return kOk;
}

int cmd_bin(const Globals& g, const std::string& in, std::uint64_t window_us, std::optional<unsigned> width,
            std::optional<unsigned> height) {
  const auto rc = resolve(g);
  const fs::path src(in);
  if (!fs::is_directory(src)) throw msf::ConfigError("--in must be a directory of event files");
  const fs::path dst = g.out.empty() ? src : fs::path(g.out);
  msf::events::SensorSize sensor = rc.events.sensor;
  if (width) sensor.width = static_cast<std::uint16_t>(*width);
  if (height) sensor.height = static_cast<std::uint16_t>(*height);

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(src)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::size_t converted = 0;
  for (const auto& f : files) {
    const auto rel = fs::relative(f, src);
    const auto ext = f.extension().string();
    if (f.filename() == "meta.csv") {
      if (dst != src) {
        fs::create_directories((dst / rel).parent_path());
        fs::copy_file(f, dst / rel, fs::copy_options::overwrite_existing);
      }
      continue;
    }
    if (ext != ".evs" && ext != ".csv") continue;
    msf::events::EventStream stream;
    try {
      stream = msf::events::parse_events(msf::io::read_file(f),
                                         ext == ".csv" ? msf::events::EventFormat::Csv : msf::events::EventFormat::Bin,
                                         sensor);
    } catch (const msf::ParseError& e) {
      throw msf::ParseError(f.string() + ": " + e.what(), e.position());
    }
    auto out = dst / rel;
    out.replace_extension(".evf");
    fs::create_directories(out.parent_path());
    msf::io::write_file(out, msf::events::serialize_frames(msf::events::integrate_frames(stream, window_us)));
    ++converted;
  }
  std::cout << "binned " << converted << " streams into " << dst.string() << "\n";
  return kOk;
}

int cmd_train(const Globals& g, const std::string& corpus, std::size_t epochs) {
  auto rc = resolve(g);
  rc.train.epochs = epochs;
  const auto out = require_out(g);
  const auto videos = load_videos(split_dir(corpus, "train"), rc);

  std::ostringstream log;
  log << "epoch,loss_dmil,loss_center,loss_total\n";
  const auto model = msf::pipeline::fit(
      videos, rc.model, rc.train, [&](std::size_t e, const msf::training::EpochMetrics& m, const auto& snapshot) {
        log << e << ',' << num(m.dmil) << ',' << num(m.center) << ',' << num(m.total) << '\n';
        if (rc.save_every > 0 && e % rc.save_every == 0) {
          char name[48];
          std::snprintf(name, sizeof name, "checkpoint_e%04zu.msfw", e);
          msf::checkpoint::save_model(out / name, snapshot);
        }
      });
  msf::checkpoint::save_model(out / "checkpoint.msfw", model);
  msf::io::write_text(out / "train_log.csv", log.str());
  std::cout << "trained " << epochs << " epochs on " << videos.size() << " videos; checkpoint at "
            << (out / "checkpoint.msfw").string() << "\n";
  return kOk;
}

void write_eval(const fs::path& out, const msf::pipeline::Evaluation& ev) {
  std::ostringstream metrics, frames;
  metrics << "video_id,auc,far\n";
  frames << "video_id,frame,score,label\n";
  for (const auto& v : ev.videos) {
    metrics << v.id << ',' << (v.auc ? num(*v.auc) : "NA") << ',' << (v.far ? num(*v.far) : "NA") << '\n';
    for (std::size_t f = 0; f < v.frame_scores.size(); ++f) {
      frames << v.id << ',' << f << ',' << num(v.frame_scores[f]) << ',' << v.frame_labels[f] << '\n';
    }
  }
  metrics << "pooled," << num(ev.pooled.auc) << ',' << num(ev.pooled.far) << '\n';
  msf::io::write_text(out / "metrics.csv", metrics.str());
  msf::io::write_text(out / "frame_scores.csv", frames.str());
}

int cmd_eval(const Globals& g, const std::string& corpus, const std::string& checkpoint) {
  const auto rc = resolve(g);
  const auto out = require_out(g);
  const auto model = msf::checkpoint::load_model(checkpoint);
  auto load_rc = rc;
  load_rc.model = model.config;
  const auto videos = load_videos(split_dir(corpus, "test"), load_rc);
  const auto ev = msf::pipeline::evaluate(model, videos, rc.data.frames_per_clip);
  write_eval(out, ev);
  std::cout << "AUC " << num(ev.pooled.auc) << "  FAR " << num(ev.pooled.far) << "\n";
  return kOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_ablate(const Globals& g, const std::string& corpus, const std::string& sweep, const std::string& values,
               std::size_t epochs) {
  const auto base = resolve(g);
  const auto out = require_out(g);
  const auto settings = split_list(values);
  if (settings.empty()) throw msf::ConfigError("--values must list at least one setting");

  std::vector<std::pair<std::string, msf::config::RunConfig>> runs;
  for (const auto& v : settings) {
    auto rc = base;
    if (sweep == "modules") {
      rc.model.use_lsf = rc.model.use_gsf = rc.model.use_tim = false;
      if (v == "all") {
        rc.model.use_lsf = rc.model.use_gsf = rc.model.use_tim = true;
      } else if (v != "none") {
        for (const auto& part : [&] {
               std::vector<std::string> p;
               std::stringstream ss(v);
               for (std::string s; std::getline(ss, s, '+');) p.push_back(s);
               return p;
             }()) {
          if (part == "lsf") rc.model.use_lsf = true;
          else if (part == "gsf") rc.model.use_gsf = true;
          else if (part == "tim") rc.model.use_tim = true;
          else throw msf::ConfigError("unknown module \"" + part + "\" (use lsf, gsf, tim, none, all)");
        }
      }
    } else {
      rc.set(sweep, v);
    }
    rc.train.epochs = epochs;
    rc.validate();
    runs.emplace_back(sweep == "modules" ? v : sweep + "=" + v, rc);
  }

  const auto train = load_videos(split_dir(corpus, "train"), base);
  const auto test = load_videos(split_dir(corpus, "test"), base);
  std::ostringstream csv;
  csv << "setting,auc,far\n";
  for (const auto& [name, rc] : runs) {
    const auto model = msf::pipeline::fit(train, rc.model, rc.train);
    const auto ev = msf::pipeline::evaluate(model, test, rc.data.frames_per_clip);
    csv << name << ',' << num(ev.pooled.auc) << ',' << num(ev.pooled.far) << '\n';
    std::cout << name << "  AUC " << num(ev.pooled.auc) << "  FAR " << num(ev.pooled.far) << "\n";
  }
  msf::io::write_text(out / "ablation.csv", csv.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale spiking fusion for event-based anomaly detection"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key = value run configuration file");
  app.add_option("--seed", g.seed, "seed for data generation, initialization and batching");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--set", g.overrides, "override one config key (key=value); repeatable");

  std::string mode = "features";
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--mode", mode, "features or events")->check(CLI::IsMember({"features", "events"}));

  std::string in;
  std::uint64_t window_us = msf::events::kPaperWindowUs;
  std::optional<unsigned> width, height;
  auto* bin = app.add_subcommand("bin", "integrate event files into EVF1 frame files");
  bin->add_option("--in", in, "directory of .evs or .csv event files")->required();
  bin->add_option("--window-us", window_us, "integration window in microseconds")->check(CLI::PositiveNumber);
  bin->add_option("--width", width, "sensor width for CSV input");
  bin->add_option("--height", height, "sensor height for CSV input");

  std::string corpus, checkpoint, sweep, values;
  std::size_t epochs = 0;
  auto* train = app.add_subcommand("train", "train on <corpus>/train");
  train->add_option("--corpus", corpus, "corpus directory")->required();
  train->add_option("--epochs", epochs, "number of epochs")->required();

  auto* eval = app.add_subcommand("eval", "score <corpus>/test with a checkpoint");
  eval->add_option("--corpus", corpus, "corpus directory")->required();
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  auto* ablate = app.add_subcommand("ablate", "retrain and evaluate over a sweep");
  ablate->add_option("--corpus", corpus, "corpus directory")->required();
  ablate->add_option("--sweep", sweep, "tau, alpha or modules")->required()->check(CLI::IsMember({"tau", "alpha", "modules"}));
  ablate->add_option("--values", values, "comma-separated settings")->required();
  ablate->add_option("--epochs", epochs, "epochs per setting")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*synth) return cmd_synth(g, mode);
    if (*bin) return cmd_bin(g, in, window_us, width, height);
    if (*train) return cmd_train(g, corpus, epochs);
    if (*eval) return cmd_eval(g, corpus, checkpoint);
    if (*ablate) return cmd_ablate(g, corpus, sweep, values, epochs);
  } catch (const msf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n" << app.help();
    return kConfig;
  } catch (const msf::ParseError& e) {
    std::cerr << "parse error: " << e.what() << " (offset " << e.position() << ")\n";
    return kData;
  } catch (const msf::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const msf::ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
