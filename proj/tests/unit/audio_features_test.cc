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

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.h"
#include "osd/audio_features.h"
#include "osd/error.h"
#include "osd/wav.h"

using namespace osd;
using namespace osd::audio;

namespace {

std::vector<double> Tone(double hz, double seconds, double amp = 1.0) {
  std::vector<double> x(size_t(seconds * kSampleRate));
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = amp * std::sin(2.0 * std::numbers::pi * hz * double(i) / kSampleRate);
  return x;
}

std::vector<double> Noise(size_t n, uint64_t seed, double amp = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  std::vector<double> x(n);
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace

TEST_SUITE("audio_features") {

TEST_CASE("load keeps a 16 kHz mono clip sample for sample") {
  testing::TempDir dir("load");
  const auto x = Noise(64000, 1);
  WriteWavFloat32((dir.path() / "a.wav").string(), x, kSampleRate);
  const AudioClip clip = LoadAudio((dir.path() / "a.wav").string());
  CHECK(clip.size() == 64000);
  CHECK(clip.sample_rate == kSampleRate);
  CHECK(clip.channel_count == 1);
  for (size_t i = 0; i < x.size(); i += 997) CHECK(clip.samples[i] == float(x[i]));
}

TEST_CASE("stereo input needs downmix and averages channels") {
  testing::TempDir dir("stereo");
  std::vector<double> inter;
  for (int i = 0; i < 1600; ++i) {
    inter.push_back(0.25);
    inter.push_back(-0.75);
  }
  const std::string path = (dir.path() / "s.wav").string();
  WriteWavFloat32(path, inter, kSampleRate, 2);
  CHECK_THROWS_AS(LoadAudio(path), DataError);
  const AudioClip clip = LoadAudio(path, {.downmix = true});
  REQUIRE(clip.size() == 1600);
  CHECK(clip.samples[0] == doctest::Approx(-0.25));

  std::vector<double> same;
  for (double v : Noise(800, 2)) {
    same.push_back(v);
    same.push_back(v);
  }
  WriteWavFloat32(path, same, kSampleRate, 2);
  const AudioClip mono = LoadAudio(path, {.downmix = true});
  for (size_t i = 0; i < 800; ++i) CHECK(mono.samples[i] == float(same[2 * i]));
}

TEST_CASE("other sample rates are rejected unless resampling is allowed") {
  testing::TempDir dir("rate");
  const std::string path = (dir.path() / "r.wav").string();
  WriteWavPcm16(path, Tone(440, 1.0, 0.5), 8000);
  try {
    LoadAudio(path);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("unsupported sample rate") != std::string::npos);
  }
  const AudioClip up = LoadAudio(path, {.allow_resample = true});
  CHECK(up.size() == 32000);  // 2 s at 8 kHz
}

TEST_CASE("corrupt files raise data errors") {
  testing::TempDir dir("corrupt");
  const std::string path = (dir.path() / "bad.wav").string();
  std::FILE* f = std::fopen(path.c_str(), "wb");
  std::fputs("RIFF1234WAVEjunk", f);
  std::fclose(f);
  CHECK_THROWS_AS(LoadAudio(path), DataError);
  CHECK_THROWS_AS(LoadAudio((dir.path() / "missing.wav").string()), DataError);
}

TEST_CASE("segmentation tiles the clip") {
  AudioClip clip;
  clip.source_id = "rec";
  clip.samples.assign(160000, 0.0);
  auto spans = Segment(clip);
  REQUIRE(spans.size() == 3);
  CHECK(spans[0].size() == 64000);
  CHECK(spans[1].start == 64000);
  CHECK(spans[2].size() == 32000);
  CHECK_FALSE(spans[1].partial);
  CHECK(spans[2].partial);
  CHECK(spans[0].segment_id == "rec-0000");

  clip.samples.assign(64000, 0.0);
  spans = Segment(clip);
  REQUIRE(spans.size() == 1);
  CHECK_FALSE(spans[0].partial);

  clip.samples.assign(51200, 0.0);
  spans = Segment(clip);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].partial);
  CHECK(spans[0].size() == 51200);

  clip.samples.clear();
  CHECK_THROWS_AS(Segment(clip), DataError);
}

TEST_CASE("a full segment gives 64 x 400 features") {
  FbankComputer fbank;
  const auto f = fbank.ComputeSegment(Noise(64000, 3));
  CHECK(f.mel_bins() == 64);
  CHECK(f.frame_count() == 400);
  CHECK(f.valid_frames == 400);
  CHECK(f.values.allFinite());
}

TEST_CASE("frame count follows the centred framing formula") {
  FeatureConfig cfg;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const int64_t n = 400 + int64_t(rng() % 100000);
    const int64_t expect = (n + 2 * cfg.pad_samples() - 400) / 160 + 1;
    CHECK(NumFrames(n, cfg) == expect);
  }
  CHECK(NumFrames(64000, cfg) == 400);
  CHECK(NumFrames(399, cfg) == 0);
}

TEST_CASE("partial segments are zero padded with a valid count") {
  FbankComputer fbank;
  const auto f = fbank.ComputeSegment(Noise(51200, 5));
  CHECK(f.frame_count() == 400);
  CHECK(f.valid_frames == 320);
  CHECK(f.values.rightCols(80).isZero(0.0));
  CHECK_THROWS_AS(fbank.Compute(Noise(399, 6)), DataError);
}

TEST_CASE("digital silence maps to log of the floor") {
  FbankComputer fbank;
  const auto f = fbank.ComputeSegment(std::vector<double>(64000, 0.0));
  CHECK((f.values.array() == std::log(1e-10)).all());
}

TEST_CASE("a 1 kHz tone peaks in the mel bins around 1 kHz, matching a direct DFT") {
  FbankComputer fbank;
  const auto tone = Tone(1000.0, 0.5);
  const auto f = fbank.Compute(tone);
  const Eigen::MatrixXd ref = testing::DftLogMel(tone);
  REQUIRE(ref.cols() == f.frame_count());
  const auto centres = testing::MelCentres();
  for (int t = 0; t < f.frame_count(); ++t) {
    Eigen::Index got, want;
    f.values.col(t).maxCoeff(&got);
    ref.col(t).maxCoeff(&want);
    CHECK(got == want);
    const bool brackets = (got > 0 && centres[size_t(got - 1)] <= 1000.0 && 1000.0 <= centres[size_t(got)]) ||
                          (got + 1 < 64 && centres[size_t(got)] <= 1000.0 && 1000.0 <= centres[size_t(got + 1)]);
    CHECK(brackets);
  }
  CHECK((f.values - ref).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("features on noise agree with the direct DFT everywhere") {
  FbankComputer fbank;
  const auto x = Noise(8000, 7);
  CHECK((fbank.Compute(x).values - testing::DftLogMel(x)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("scaling the waveform shifts log power by 2 log c") {
  FbankComputer fbank;
  const auto x = Noise(16000, 8);
  std::vector<double> y(x.size());
  const double c = 0.37;
  for (size_t i = 0; i < x.size(); ++i) y[i] = c * x[i];
  const auto a = fbank.Compute(x).values, b = fbank.Compute(y).values;
  CHECK(((b - a).array() - 2.0 * std::log(c)).abs().maxCoeff() < 1e-9);
}

TEST_CASE("identical input gives bit-identical features") {
  FbankComputer fbank;
  const auto x = Noise(64000, 9);
  const auto a = fbank.ComputeSegment(x), b = FbankComputer().ComputeSegment(x);
  CHECK((a.values.array() == b.values.array()).all());
}

TEST_CASE("feature config round-trips and digests every setting") {
  FeatureConfig cfg;
  const FeatureConfig back = FeatureConfig::FromKeyValues(cfg.ToKeyValues());
  CHECK(back.Digest() == cfg.Digest());
  FeatureConfig other = cfg;
  other.window_seconds = 0.02;
  CHECK(other.Digest() != cfg.Digest());
  other = cfg;
  other.energy_floor = 1e-8;
  CHECK(other.Digest() != cfg.Digest());
  other = cfg;
  other.mel_bins = 40;
  CHECK_THROWS_AS(other.Validate(), ConfigError);
}

}
