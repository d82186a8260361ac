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

#include <random>

#include "oracles.h"
#include "osd/annotations.h"
#include "osd/error.h"

using namespace osd;
using namespace osd::annotations;

namespace {

SpeakerTurn Turn(const std::string& spk, double onset, double dur) {
  return SpeakerTurn{"rec", onset, dur, spk};
}

std::vector<SpeakerTurn> RandomTurns(std::mt19937_64& rng, int speakers, int count) {
  std::uniform_real_distribution<double> onset(-0.5, 4.5), dur(0.0, 1.5);
  std::vector<SpeakerTurn> turns;
  for (int i = 0; i < count; ++i)
    turns.push_back(Turn("s" + std::to_string(rng() % uint64_t(speakers)), onset(rng), dur(rng)));
  return turns;
}

}  // namespace

TEST_SUITE("annotations") {

TEST_CASE("RTTM speaker line maps fields directly") {
  const auto turns = ParseRttmText("SPEAKER rec1 1 0.50 2.00 <NA> <NA> A <NA> <NA>\n");
  REQUIRE(turns.size() == 1);
  CHECK(turns[0].recording_id == "rec1");
  CHECK(turns[0].onset == 0.5);
  CHECK(turns[0].duration == 2.0);
  CHECK(turns[0].speaker_id == "A");
}

TEST_CASE("empty RTTM and non-speaker lines give no turns") {
  CHECK(ParseRttmText("").empty());
  CHECK(ParseRttmText("SPKR-INFO rec1 1 <NA> <NA> <NA> unknown A <NA> <NA>\n\n").empty());
}

TEST_CASE("malformed duration names the line") {
  try {
    ParseRttmText("SPEAKER r 1 0.0 1.0 <NA> <NA> A <NA> <NA>\nSPEAKER r 1 0.5 abc <NA> <NA> B <NA> <NA>\n",
                  "x.rttm");
    FAIL("expected an error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2") != std::string::npos);
    CHECK(msg.find("abc") != std::string::npos);
  }
}

TEST_CASE("RTTM formatting round-trips") {
  const std::vector<SpeakerTurn> turns{{"r", 0.25, 1.5, "A"}, {"r", 3.0, 0.125, "B"}};
  const auto back = ParseRttmText(FormatRttm(turns));
  REQUIRE(back.size() == 2);
  CHECK(back[1].onset == 3.0);
  CHECK(back[1].duration == 0.125);
  CHECK(back[1].speaker_id == "B");
}

TEST_CASE("two speakers rasterize into single, overlap, single, silence") {
  const std::vector<SpeakerTurn> turns{Turn("A", 0.0, 3.0), Turn("B", 1.0, 1.0)};
  const auto lab = RasterizeLabels(turns, 0.0, 0.01, 400, 400);
  const auto oracle = testing::BruteForceLabels(turns, 0.0, 0.01, 400, 400);
  REQUIRE(lab.size() == 400);
  CHECK(lab.labels == oracle);
  for (int t = 0; t < 400; ++t) {
    const uint8_t want = t < 100 ? 1 : t < 200 ? 2 : t < 300 ? 1 : 0;
    CHECK(lab.labels[size_t(t)] == want);
  }
  const auto bin = CollapseToBinary(lab);
  for (int t = 0; t < 400; ++t) CHECK(bin[size_t(t)] == (t >= 100 && t < 200 ? 1 : 0));
}

TEST_CASE("no turns gives all silence") {
  const auto lab = RasterizeLabels({}, 0.0, 0.01, 400, 400);
  CHECK(std::all_of(lab.labels.begin(), lab.labels.end(), [](uint8_t v) { return v == 0; }));
}

TEST_CASE("overlapping turns of one speaker never count twice") {
  const std::vector<SpeakerTurn> turns{Turn("A", 0.0, 2.0), Turn("A", 1.0, 2.0)};
  const auto lab = RasterizeLabels(turns, 0.0, 0.01, 400, 400);
  for (int t = 0; t < 300; ++t) CHECK(lab.labels[size_t(t)] == 1);
  for (int t = 300; t < 400; ++t) CHECK(lab.labels[size_t(t)] == 0);
}

TEST_CASE("span form uses the segment start and valid frames") {
  audio::SegmentSpan span{"rec-0002", 128000, 160000, true};
  const std::vector<SpeakerTurn> turns{Turn("A", 8.0, 10.0), Turn("B", 9.0, 0.5)};
  const auto lab = RasterizeLabels(turns, span, audio::FeatureConfig{});
  CHECK(lab.size() == 400);
  CHECK(lab.valid_frames == 200);
  CHECK(lab.segment_id == "rec-0002");
  CHECK(lab.labels == testing::BruteForceLabels(turns, 8.0, 0.01, 200, 400));
  CHECK(lab.labels[100] == 2);
  CHECK(lab.labels[250] == 0);
}

TEST_CASE("collapse maps only overlap to one") {
  FrameLabels lab;
  lab.labels = {0, 1, 2, 1};
  CHECK(CollapseToBinary(lab) == std::vector<uint8_t>{0, 0, 1, 0});
  lab.labels.assign(5, 2);
  CHECK(CollapseToBinary(lab) == std::vector<uint8_t>(5, 1));
}

TEST_CASE("randomized turn sets match brute-force counting") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int speakers = 1 + int(rng() % 5);
    const auto turns = RandomTurns(rng, speakers, int(rng() % 51));
    const int valid = 1 + int(rng() % 400);
    const double start = double(rng() % 100) * 0.01;
    CHECK(RasterizeLabels(turns, start, 0.01, valid, 400).labels ==
          testing::BruteForceLabels(turns, start, 0.01, valid, 400));
  }
}

TEST_CASE("adding a turn never lowers a label") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    auto turns = RandomTurns(rng, 5, int(rng() % 30));
    const auto before = RasterizeLabels(turns, 0.0, 0.01, 400, 400);
    turns.push_back(RandomTurns(rng, 5, 1)[0]);
    const auto after = RasterizeLabels(turns, 0.0, 0.01, 400, 400);
    for (size_t t = 0; t < 400; ++t) CHECK(after.labels[t] >= before.labels[t]);
  }
}

TEST_CASE("stats report overlap percent over valid frames") {
  const auto s = StatsFromCounts({600, 300, 100}, 0.01);
  CHECK(s.overlap_percent == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(s.total_hours == doctest::Approx(10.0 / 3600));
  CHECK(s.silence_hours + s.single_hours + s.overlap_hours == s.total_hours);
}

TEST_CASE("stats consistency holds on random label sets") {
  std::mt19937_64 rng(13);
  SegmentManifest m;
  std::map<std::string, FrameLabels> labels;
  for (int i = 0; i < 25; ++i) {
    const std::string id = "r-" + std::to_string(i);
    m.push_back({id, "a.wav", 0, 64000, "r", i % 2 ? "x" : "y"});
    FrameLabels lab;
    lab.labels.resize(400);
    lab.valid_frames = 1 + int(rng() % 400);
    for (int t = 0; t < lab.valid_frames; ++t) lab.labels[size_t(t)] = uint8_t(rng() % 3);
    labels[id] = lab;
  }
  const auto s = ComputeDatasetStats(m, labels);
  CHECK(s.silence_hours + s.single_hours + s.overlap_hours == s.total_hours);
  CHECK(s.overlap_percent == doctest::Approx(100.0 * s.overlap_hours / s.total_hours));
  const auto tagged = ComputeStatsByTag(m, labels);
  CHECK(tagged.by_tag.size() == 2);
  CHECK(tagged.by_tag.at("x").total_frames() + tagged.by_tag.at("y").total_frames() ==
        tagged.total.total_frames());
}

TEST_CASE("stats errors on empty manifests and missing labels") {
  CHECK_THROWS_AS(ComputeDatasetStats({}, {}), DataError);
  SegmentManifest m{{"a", "a.wav", 0, 10, "r", "t"}};
  CHECK_THROWS_AS(ComputeDatasetStats(m, {}), DataError);
}

TEST_CASE("manifest text round-trips and validates") {
  SegmentManifest m{{"r-0000", "/x/a.wav", 0, 64000, "r", "synth_a"},
                    {"r-0001", "/x/a.wav", 64000, 100000, "r", "synth_a"}};
  const auto back = ParseManifest(FormatManifest(m));
  REQUIRE(back.size() == 2);
  CHECK(back[1].end_sample == 100000);
  CHECK(back[1].dataset_tag == "synth_a");
  m.push_back(m[0]);
  CHECK_THROWS_AS(ValidateManifest(m), DataError);
  CHECK_THROWS_AS(ParseManifest("a\tb\tnope\t1\tr\tt\n"), DataError);
}

TEST_CASE("resampling moves pooled proportions toward the target") {
  SegmentManifest m;
  std::map<std::string, FrameLabels> labels;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "s" + std::to_string(i);
    m.push_back({id, "a.wav", 0, 64000, "r", "t"});
    FrameLabels lab;
    lab.valid_frames = 100;
    lab.labels.assign(100, i == 0 ? 2 : 1);
    labels[id] = lab;
  }
  const auto picks = ResampleToProportions(m, labels, {0.2, 0.7, 0.1});
  std::vector<int> seen(10, 0);
  int64_t overlap = 0;
  for (size_t p : picks) {
    ++seen[p];
    overlap += p == 0 ? 100 : 0;
  }
  for (int c : seen) CHECK(c >= 1);
  CHECK(double(overlap) / (100.0 * double(picks.size())) > 0.1 - 1e-9);
}

}
