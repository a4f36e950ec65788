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


// End-to-end runs of the msf binary.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "msf/msf.hpp"

namespace {

namespace fs = std::filesystem;

constexpr const char* kSmall = "--set n_train=8 --set n_test=4 --set clips_min=12 --set clips_max=20";

int run(const std::string& args) {
  const std::string cmd = std::string(MSF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("msf_cli_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& rel) const { return (dir / rel).string(); }

  void synth(const std::string& out, int seed = 3, const std::string& extra = "", const std::string& mode = "") {
    ASSERT_EQ(run(std::string(kSmall) + " --seed " + std::to_string(seed) + " --out " + p(out) + " " + extra +
                  " synth " + mode),
              0);
  }
};

TEST_F(Cli, MissingOutIsUsageError) { EXPECT_EQ(run("synth"), 2); }

TEST_F(Cli, NoSubcommandIsUsageError) { EXPECT_EQ(run("--out " + p("x")), 2); }

TEST_F(Cli, UnknownConfigKeyIsUsageError) {
  std::ofstream(dir / "bad.cfg") << "bogus = 1\n";
  EXPECT_EQ(run("--config " + p("bad.cfg") + " --out " + p("c") + " synth"), 2);
  EXPECT_EQ(run("--set bogus=1 --out " + p("c") + " synth"), 2);
}

TEST_F(Cli, SynthIsDeterministic) {
  synth("a");
  synth("b");
  synth("c", 4);
  for (const auto& split : {"train", "test"}) {
    for (const auto& e : fs::directory_iterator(dir / "a" / split)) {
      const auto name = e.path().filename();
      EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / split / name)) << name;
    }
  }
  EXPECT_NE(slurp(dir / "a" / "train" / "meta.csv") + slurp(dir / "a" / "train" / "train_0000.msfw"),
            slurp(dir / "c" / "train" / "meta.csv") + slurp(dir / "c" / "train" / "train_0000.msfw"));
}

TEST_F(Cli, SynthWritesMetaForEverySplit) {
  synth("a");
  const auto meta = lines(dir / "a" / "train" / "meta.csv");
  ASSERT_EQ(meta.size(), 9u);
  EXPECT_EQ(meta[0], "video_id,label,t_i,span_start,span_end");
  EXPECT_EQ(lines(dir / "a" / "test" / "meta.csv").size(), 5u);
}

TEST_F(Cli, EventsThenBinThenTrain) {
  synth("ev", 3, "--set sensor_width=16 --set sensor_height=12", "--mode events");
  ASSERT_EQ(run("--out " + p("binned") + " bin --in " + p("ev")), 0);
  std::size_t evf = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "binned"))
    if (e.path().extension() == ".evf") ++evf;
  EXPECT_EQ(evf, 12u);
  EXPECT_TRUE(fs::exists(dir / "binned" / "train" / "meta.csv"));
  EXPECT_EQ(run(std::string(kSmall) + " --out " + p("run") + " train --corpus " + p("binned") + " --epochs 1"), 0);
}

TEST_F(Cli, BinReportsCorruptInput) {
  fs::create_directories(dir / "raw");
  std::ofstream(dir / "raw" / "v.evs", std::ios::binary) << "EVS1garbage";
  EXPECT_EQ(run("--out " + p("o") + " bin --in " + p("raw")), 3);
}

TEST_F(Cli, ZeroEpochsSavesInitialWeights) {
  synth("c");
  ASSERT_EQ(run(std::string(kSmall) + " --seed 3 --out " + p("r") + " train --corpus " + p("c") + " --epochs 0"), 0);
  const auto got = msf::checkpoint::load_model(dir / "r" / "checkpoint.msfw");
  msf::model::MsfConfig cfg;
  auto init = msf::pipeline::init_model(cfg, 3);
  // Checkpoints hold float32.
  for (auto& [name, t] : init.params.named())
    for (auto& v : t->vec()) v = static_cast<double>(static_cast<float>(v));
  EXPECT_TRUE(got.params == init.params);
}

TEST_F(Cli, TrainingIsReproducible) {
  synth("c");
  const std::string args = std::string(kSmall) + " --seed 3 --set lr=0.01 train --corpus " + p("c") + " --epochs 3";
  ASSERT_EQ(run("--out " + p("r1") + " " + args), 0);
  ASSERT_EQ(run("--out " + p("r2") + " " + args), 0);
  EXPECT_EQ(slurp(dir / "r1" / "checkpoint.msfw"), slurp(dir / "r2" / "checkpoint.msfw"));
  EXPECT_EQ(slurp(dir / "r1" / "train_log.csv"), slurp(dir / "r2" / "train_log.csv"));
}

TEST_F(Cli, LossDecreases) {
  synth("c");
  ASSERT_EQ(run(std::string(kSmall) + " --seed 3 --set lr=0.01 --out " + p("r") + " train --corpus " + p("c") +
                " --epochs 30"),
            0);
  const auto log = lines(dir / "r" / "train_log.csv");
  ASSERT_EQ(log.size(), 31u);
  EXPECT_EQ(log[0], "epoch,loss_dmil,loss_center,loss_total");
  auto total = [](const std::string& l) { return std::stod(l.substr(l.rfind(',') + 1)); };
  EXPECT_LT(total(log.back()), total(log[1]));
}

TEST_F(Cli, SaveEveryWritesIntermediateCheckpoints) {
  synth("c");
  ASSERT_EQ(run(std::string(kSmall) + " --set save_every=2 --out " + p("r") + " train --corpus " + p("c") +
                " --epochs 4"),
            0);
  EXPECT_TRUE(fs::exists(dir / "r" / "checkpoint_e0002.msfw"));
  EXPECT_TRUE(fs::exists(dir / "r" / "checkpoint_e0004.msfw"));
  EXPECT_FALSE(fs::exists(dir / "r" / "checkpoint_e0003.msfw"));
}

TEST_F(Cli, EvalWritesMetricsAndFrameScores) {
  synth("c");
  ASSERT_EQ(run(std::string(kSmall) + " --out " + p("r") + " train --corpus " + p("c") + " --epochs 2"), 0);
  ASSERT_EQ(run(std::string(kSmall) + " --out " + p("e") + " eval --corpus " + p("c") + " --checkpoint " +
                p("r/checkpoint.msfw")),
            0);
  const auto m = lines(dir / "e" / "metrics.csv");
  ASSERT_EQ(m.size(), 6u);
  EXPECT_EQ(m[0], "video_id,auc,far");
  EXPECT_EQ(m.back().rfind("pooled,", 0), 0u);
  const auto f = lines(dir / "e" / "frame_scores.csv");
  EXPECT_EQ(f[0], "video_id,frame,score,label");
  std::size_t frames = 0;
  for (const auto& row : msf::corpus::read_meta(dir / "c" / "test")) frames += row.clips * 16;
  EXPECT_EQ(f.size(), frames + 1);
}

TEST_F(Cli, MismatchedChannelsIsDataError) {
  synth("c");
  EXPECT_EQ(run(std::string(kSmall) + " --set D=8 --out " + p("r") + " train --corpus " + p("c") + " --epochs 1"), 3);
}

TEST_F(Cli, MissingCorpusIsDataError) {
  EXPECT_EQ(run("--out " + p("r") + " train --corpus " + p("nowhere") + " --epochs 1"), 3);
}

TEST_F(Cli, AblationSweeps) {
  synth("c");
  const std::string base = std::string(kSmall) + " --out " + p("a") + " ablate --corpus " + p("c") + " --epochs 1 ";
  ASSERT_EQ(run(base + "--sweep alpha --values 0,0.6"), 0);
  auto rows = lines(dir / "a" / "ablation.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "setting,auc,far");
  EXPECT_EQ(rows[1].rfind("alpha=0,", 0), 0u);

  ASSERT_EQ(run(base + "--sweep modules --values none,lsf,gsf+tim,all"), 0);
  rows = lines(dir / "a" / "ablation.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[3].rfind("gsf+tim,", 0), 0u);

  ASSERT_EQ(run(base + "--sweep tau --values 0.2,0.625,0.8"), 0);
  EXPECT_EQ(lines(dir / "a" / "ablation.csv").size(), 4u);

  EXPECT_EQ(run(base + "--sweep modules --values lsf+bogus"), 2);
}

}  // namespace
