// Copyright 2026 The osdkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.h"
#include "osd/annotations.h"
#include "osd/kv_config.h"

#ifndef OSD_TOOL_PATH
#error "OSD_TOOL_PATH must point at the osd executable"
#endif

namespace fs = std::filesystem;
using osd::testing::ReadText;
using osd::testing::RunCommand;
using osd::testing::TempDir;

namespace {

std::string Osd(const std::string& args) { return std::string(OSD_TOOL_PATH) + " " + args; }

int Run(const std::string& args, std::string* out = nullptr) {
  return RunCommand("cd /tmp && " + Osd(args), out);
}

std::string Quote(const fs::path& p) { return "'" + p.string() + "'"; }

std::string Fixture(const fs::path& dir, const std::string& extra = "") {
  std::string out;
  REQUIRE(Run("make-fixtures --out " + Quote(dir) + " " + extra, &out) == 0);
  return "--config " + Quote(dir / "fixture.recipe");
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

bool Contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("make-fixtures is byte-identical for a fixed seed") {
  TempDir a("fxa"), b("fxb");
  Fixture(a.path(), "--seed 7");
  Fixture(b.path(), "--seed 7");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a.path()))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a.path()));
  CHECK(files.size() > 20);
  for (const auto& rel : files) {
    CAPTURE(rel.string());
    REQUIRE(fs::exists(b.path() / rel));
    CHECK(ReadText(a.path() / rel) == ReadText(b.path() / rel));
  }
}

TEST_CASE("prepare segments a 10 s recording into three pieces and is idempotent") {
  TempDir dir("prep");
  const std::string cfg = Fixture(dir.path(), "--seconds 10 --recordings 1");
  std::string out;
  REQUIRE(Run("prepare " + cfg, &out) == 0);
  CHECK(Contains(out, "written=18\tskipped=0\tfailed=0"));
  const auto manifest = osd::annotations::ReadManifest((dir.path() / "cache" / "train.segments.tsv").string());
  REQUIRE(manifest.size() == 6);
  CHECK(manifest[0].end_sample - manifest[0].start_sample == 64000);
  CHECK(manifest[2].end_sample - manifest[2].start_sample == 32000);
  CHECK(fs::exists(dir.path() / "cache" / "feats" / (manifest[2].segment_id + ".feat")));

  const auto feat = dir.path() / "cache" / "feats" / (manifest[0].segment_id + ".feat");
  const auto stamp = fs::last_write_time(feat);
  REQUIRE(Run("prepare " + cfg, &out) == 0);
  CHECK(Contains(out, "written=0\tskipped=18\tfailed=0"));
  CHECK(fs::last_write_time(feat) == stamp);
}

TEST_CASE("a missing RTTM fails that recording only") {
  TempDir dir("norttm");
  const std::string cfg = Fixture(dir.path(), "--seconds 8 --recordings 1");
  fs::remove(dir.path() / "rttm" / "synth_a_train_000.rttm");
  std::string out;
  CHECK(Run("prepare " + cfg, &out) == 3);
  CHECK(Contains(out, "error\tsynth_a_train_000\t"));
  CHECK(Contains(out, "written=10\tskipped=0\tfailed=1"));
}

TEST_CASE("stats reproduce the planted overlap per tag") {
  TempDir dir("stats");
  const std::string cfg = Fixture(dir.path());
  REQUIRE(Run("prepare " + cfg) == 0);
  std::string out;
  REQUIRE(Run("stats " + cfg + " train", &out) == 0);
  const auto lines = Lines(out);
  int rows = 0;
  bool total = false;
  for (const auto& l : lines) {
    if (l.rfind("synth_", 0) == 0) {
      ++rows;
      CHECK(l.size() >= 5);
      CHECK(l.substr(l.size() - 5) == "15.00");
    }
    if (l.rfind("Total", 0) == 0) {
      total = true;
      CHECK(l.substr(l.size() - 5) == "15.00");
    }
  }
  CHECK(rows == 2);
  CHECK(total);
}

TEST_CASE("planted overlap in the RTTM files is exact on the frame grid") {
  TempDir dir("planted");
  Fixture(dir.path(), "--overlap 0.2 --silence 0.1");
  const auto planted = osd::KeyValueConfig::Load((dir.path() / "planted.txt").string());
  int64_t overlap = 0, total = 0;
  for (const auto& e : fs::directory_iterator(dir.path() / "rttm")) {
    const auto turns = osd::annotations::ParseRttm(e.path().string());
    const int frames = 1200;
    const auto lab = osd::annotations::RasterizeLabels(turns, 0.0, 0.01, frames, frames);
    total += frames;
    overlap += std::count(lab.labels.begin(), lab.labels.end(), uint8_t(2));
  }
  CHECK(overlap * 5 == total);
  CHECK(planted.GetOr("all.overlap_percent", "") == "20");
}

TEST_CASE("an empty manifest is a data error") {
  TempDir dir("empty");
  const std::string cfg = Fixture(dir.path(), "--seconds 4 --recordings 1");
  std::ofstream(dir.path() / "none.tsv").close();
  std::string out;
  CHECK(Run("prepare " + cfg + " --manifest " + Quote(dir.path() / "none.tsv"), &out) == 3);
  std::ofstream(dir.path() / "cache_empty.tsv").close();
  CHECK(Run("stats " + cfg + " " + Quote(dir.path() / "cache_empty.tsv"), &out) == 3);
}

TEST_CASE("train honours the weights mode and eval checks the feature digest") {
  TempDir dir("train");
  const std::string cfg = Fixture(dir.path(), "--seconds 8 --recordings 1");
  REQUIRE(Run("prepare " + cfg) == 0);
  std::string out;
  REQUIRE(Run("train " + cfg + " --set train.max_epochs=2 --weights-mode uniform", &out) == 0);
  const std::string log = ReadText(dir.path() / "train_log.tsv");
  CHECK(Contains(log, "# weights=1,1,1\n"));
  CHECK(Contains(log, "# weights_mode=uniform\n"));
  CHECK(Contains(log, "# stop_reason=max_epochs\n"));
  REQUIRE(Run("eval " + cfg, &out) == 0);
  CHECK(Contains(ReadText(dir.path() / "eval_report.tsv"), "summary\tsystem=CF-OSD-tiny\tdatasets=2"));
  CHECK(Run("eval " + cfg + " --set feature.window=0.02", &out) == 2);
  CHECK(Contains(out, "feature digest mismatch"));
  CHECK(Run("eval " + cfg + " --set model.dim=8", &out) == 2);
}

TEST_CASE("exit codes for usage and configuration errors") {
  TempDir dir("codes");
  const std::string cfg = Fixture(dir.path(), "--seconds 4 --recordings 1");
  CHECK(Run("frobnicate") == 1);
  CHECK(Run("prepare --jobs 0 " + cfg) == 1);
  CHECK(Run("--help") == 0);
  CHECK(Run("prepare " + cfg + " --set model.colour=red") == 2);
  CHECK(Run("prepare " + cfg + " --set feature.mel_bins=40") == 2);
  CHECK(Run("prepare --config " + Quote(dir.path() / "missing.recipe")) == 2);
  std::string out;
  CHECK(Run("eval " + cfg + " --set eval.required_tags=synth_a,synth_z", &out) != 0);
}

}
