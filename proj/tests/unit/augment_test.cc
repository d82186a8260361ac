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
#include <cmath>
#include <random>

#include "oracles.h"
#include "osd/augment.h"
#include "osd/error.h"

using namespace osd;
using namespace osd::augment;

namespace {

audio::AudioClip Clip(std::vector<double> x, const std::string& id = "c") {
  audio::AudioClip c;
  c.samples = std::move(x);
  c.source_id = id;
  return c;
}

std::vector<double> Gaussian(size_t n, uint64_t seed, double sd) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

// Speech-like signal: noise bursts on whole 400-sample blocks with silent gaps.
std::vector<double> Bursts(size_t blocks, uint64_t seed, double sd) {
  auto x = Gaussian(blocks * 400, seed, sd);
  for (size_t b = 0; b < blocks; ++b)
    if (b % 3 == 2)
      for (size_t i = 0; i < 400; ++i) x[b * 400 + i] = 0.0;
  return x;
}

double Power(std::span<const double> x, std::span<const uint8_t> mask) {
  double s = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < x.size(); ++i)
    if (mask[i]) {
      s += x[i] * x[i];
      ++n;
    }
  return s / double(n);
}

double Rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / double(x.size()));
}

// SNR of a mix, measured from the known components over the speech blocks.
double MeasuredSnr(const std::vector<double>& speech, const NoiseMix& mix) {
  std::vector<uint8_t> mask(speech.size(), 0);
  for (size_t i = 0; i < speech.size(); ++i) mask[i] = speech[(i / 400) * 400] != 0.0 || speech[i] != 0.0;
  for (size_t b = 0; b < speech.size() / 400; ++b) {
    bool any = false;
    for (size_t i = 0; i < 400; ++i) any = any || speech[b * 400 + i] != 0.0;
    for (size_t i = 0; i < 400; ++i) mask[b * 400 + i] = any;
  }
  std::vector<double> noise_part(speech.size());
  for (size_t i = 0; i < speech.size(); ++i)
    noise_part[i] = mix.clip.samples[i] / mix.output_gain - speech[i];
  return 10.0 * std::log10(Power(speech, mask) / Power(noise_part, mask));
}

AugmentPolicy Policy(double p_noise, double p_rir) {
  AugmentPolicy p;
  p.p_noise = p_noise;
  p.p_rir = p_rir;
  p.noise_corpus = {Clip(Gaussian(8000, 100, 0.1), "n0"), Clip(Gaussian(3000, 101, 0.3), "n1")};
  auto rir = Gaussian(800, 102, 0.05);
  for (size_t i = 0; i < rir.size(); ++i) rir[i] *= std::exp(-double(i) / 150.0);
  rir[30] = 1.0;
  p.rir_corpus = {rir, {0.0, 0.0, 1.0, 0.5}};
  p.seed = 5;
  return p;
}

std::vector<LabeledAudio> Segments(int count, size_t length, uint64_t seed) {
  std::vector<LabeledAudio> out;
  for (int i = 0; i < count; ++i) {
    LabeledAudio s;
    s.audio = Clip(Gaussian(length, seed + uint64_t(i), 0.1), "s" + std::to_string(i));
    s.labels.labels.assign(size_t(length / 160), uint8_t(i % 3));
    s.labels.valid_frames = int(length / 160);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("unit power speech and noise at 10 dB use gain 0.3162") {
  std::vector<double> s(16000), n(16000);
  for (size_t i = 0; i < s.size(); ++i) {
    s[i] = i % 2 ? 0.5 : -0.5;
    n[i] = i % 4 < 2 ? 0.5 : -0.5;
  }
  const auto mix = AddNoise(Clip(s), Clip(n), 10.0);
  CHECK(mix.noise_gain == doctest::Approx(std::pow(10.0, -0.5)).epsilon(1e-12));
  CHECK(mix.noise_gain == doctest::Approx(0.3162).epsilon(1e-4));
  CHECK(mix.output_gain == 1.0);
}

TEST_CASE("measured SNR is within half a dB of the request") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> snr(-5.0, 30.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto speech = Bursts(20 + rng() % 20, 200 + uint64_t(trial), 0.05);
    const auto noise = Gaussian(1000 + rng() % 20000, 400 + uint64_t(trial), 0.2);
    const double want = snr(rng);
    const auto mix = AddNoise(Clip(speech), Clip(noise), want, int64_t(rng() % 900));
    CHECK(std::abs(MeasuredSnr(speech, mix) - want) < 0.5);
  }
}

TEST_CASE("infinite SNR leaves speech untouched") {
  const auto speech = Gaussian(4000, 1, 0.1);
  const auto mix = AddNoise(Clip(speech), Clip(Gaussian(100, 2, 0.1)), INFINITY);
  CHECK(mix.clip.samples == speech);
}

TEST_CASE("silent inputs and empty RIRs are errors") {
  const auto speech = Clip(Gaussian(4000, 1, 0.1));
  CHECK_THROWS_AS(AddNoise(speech, Clip(std::vector<double>(100, 0.0)), 10.0), DataError);
  CHECK_THROWS_AS(AddNoise(Clip(std::vector<double>(100, 0.0)), speech, 10.0), DataError);
  CHECK_THROWS_AS(AddNoise(speech, Clip({}), 10.0), DataError);
  CHECK_THROWS_AS(ApplyRir(speech, std::vector<double>{}), DataError);
  CHECK_THROWS_AS(ApplyRir(speech, std::vector<double>{0.0, 0.0}), DataError);
  CHECK_THROWS_AS(ApplyRir(speech, std::vector<double>{1.0, NAN}), DataError);
}

TEST_CASE("mixes that would clip are scaled down as a whole") {
  std::vector<double> s(8000, 0.0);
  for (size_t i = 0; i < s.size(); ++i) s[i] = i % 2 ? 0.9 : -0.9;
  const auto mix = AddNoise(Clip(s), Clip(Gaussian(8000, 3, 0.5)), 0.0);
  CHECK(mix.output_gain < 1.0);
  double peak = 0.0;
  for (double v : mix.clip.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak <= 1.0 + 1e-12);
}

TEST_CASE("unit impulse reproduces the input exactly") {
  const auto speech = Gaussian(16000, 4, 0.1);
  const auto out = ApplyRir(Clip(speech), std::vector<double>{1.0});
  CHECK(out.clip.samples == speech);
  const auto peak = ApplyRir(Clip(speech), std::vector<double>{0.0, 0.0, 1.0}, RirAlignment::kPeak);
  CHECK(peak.clip.samples == speech);
}

TEST_CASE("delayed impulse delays the input") {
  const auto speech = Gaussian(4000, 5, 0.1);
  std::vector<double> h(101, 0.0);
  h[100] = 1.0;
  const auto out = ApplyRir(Clip(speech), h);
  const auto ref = testing::DirectConvolution(speech, h);
  for (size_t i = 0; i < speech.size(); ++i) {
    CHECK(out.clip.samples[i] / out.gain == doctest::Approx(ref[i]).epsilon(1e-12));
    CHECK(ref[i] == (i < 100 ? 0.0 : speech[i - 100]));
  }
  const auto aligned = ApplyRir(Clip(speech), h, RirAlignment::kPeak);
  CHECK(aligned.clip.samples == speech);
}

TEST_CASE("direct and FFT convolution agree with the reference") {
  for (size_t taps : {size_t(37), size_t(4000)}) {
    const auto x = Gaussian(16000, 6, 0.1);
    const auto h = Gaussian(taps, 7, 0.2);
    const auto got = Convolve(x, h);
    const auto ref = testing::DirectConvolution(x, h);
    REQUIRE(got.size() == ref.size());
    std::vector<double> diff(ref.size());
    for (size_t i = 0; i < ref.size(); ++i) diff[i] = got[i] - ref[i];
    CHECK(Rms(diff) / Rms(ref) < 1e-6);
  }
}

TEST_CASE("reverberated output matches the reference after renormalisation") {
  const auto x = Gaussian(32000, 8, 0.1);
  const auto h = Policy(0, 0).rir_corpus[0];
  const auto out = ApplyRir(Clip(x), h);
  auto ref = testing::DirectConvolution(x, h);
  ref.resize(x.size());
  const double g = Rms(x) / Rms(ref);
  std::vector<double> diff(x.size());
  for (size_t i = 0; i < x.size(); ++i) diff[i] = out.clip.samples[i] - g * ref[i];
  CHECK(Rms(diff) / Rms(out.clip.samples) < 1e-6);
  CHECK(std::abs(Rms(out.clip.samples) / Rms(x) - 1.0) < 1e-6);
  CHECK(out.gain == doctest::Approx(g).epsilon(1e-9));
}

TEST_CASE("zero probabilities leave the batch bit-identical") {
  const auto segs = Segments(6, 4000, 10);
  std::mt19937_64 rng(1);
  const auto out = AugmentBatch(segs, Policy(0, 0), rng);
  for (size_t i = 0; i < segs.size(); ++i) {
    CHECK(out[i].audio.samples == segs[i].audio.samples);
    CHECK_FALSE(out[i].decision.noise);
    CHECK_FALSE(out[i].decision.rir);
  }
}

TEST_CASE("fixed seeds repeat decisions and labels pass through") {
  const auto segs = Segments(12, 4000, 20);
  std::mt19937_64 r1(9), r2(9), r3(10);
  const auto a = AugmentBatch(segs, Policy(0.5, 0.5), r1);
  const auto b = AugmentBatch(segs, Policy(0.5, 0.5), r2);
  const auto c = AugmentBatch(segs, Policy(0.5, 0.5), r3);
  bool differs = false;
  for (size_t i = 0; i < segs.size(); ++i) {
    CHECK(a[i].audio.samples == b[i].audio.samples);
    CHECK(a[i].decision.snr_db == b[i].decision.snr_db);
    CHECK(a[i].labels.labels == segs[i].labels.labels);
    CHECK(a[i].labels.valid_frames == segs[i].labels.valid_frames);
    differs = differs || a[i].decision.snr_db != c[i].decision.snr_db;
  }
  CHECK(differs);
}

TEST_CASE("a segment's result does not depend on the batch after it") {
  const auto segs = Segments(8, 4000, 30);
  std::mt19937_64 r1(4), r2(4);
  const auto full = AugmentBatch(segs, Policy(0.5, 0.5), r1);
  const auto head = AugmentBatch(std::span(segs).first(3), Policy(0.5, 0.5), r2);
  for (size_t i = 0; i < 3; ++i) CHECK(full[i].audio.samples == head[i].audio.samples);
}

TEST_CASE("SNR draws are uniform over the range") {
  const auto segs = Segments(1000, 1600, 40);
  AugmentPolicy policy = Policy(1.0, 0.0);
  std::mt19937_64 rng(77);
  const auto out = AugmentBatch(segs, policy, rng);
  std::array<int, 5> bins{};
  for (size_t i = 0; i < out.size(); ++i) {
    REQUIRE(out[i].decision.noise);
    NoiseMix mix;
    mix.clip = out[i].audio;
    const double snr = MeasuredSnr(segs[i].audio.samples, mix);
    CHECK(std::abs(snr - out[i].decision.snr_db) < 1e-6);
    REQUIRE(snr > 5.0 - 1e-6);
    REQUIRE(snr < 20.0 + 1e-6);
    bins[size_t(std::clamp(std::floor((snr - 5.0) / 3.0), 0.0, 4.0))]++;
  }
  double chi2 = 0.0;
  for (int b : bins) chi2 += (b - 200.0) * (b - 200.0) / 200.0;
  CHECK(chi2 < 9.488);
}

TEST_CASE("policies are validated") {
  AugmentPolicy p = Policy(0.5, 0.5);
  p.p_noise = 1.5;
  CHECK_THROWS_AS(p.Validate(), ConfigError);
  p = Policy(0.5, 0.5);
  p.snr_low_db = 30;
  CHECK_THROWS_AS(p.Validate(), ConfigError);
  p = Policy(0.5, 0.5);
  p.noise_corpus.clear();
  CHECK_THROWS_AS(p.Validate(), ConfigError);
  std::mt19937_64 rng(1);
  const auto segs = Segments(2, 4000, 1);
  CHECK_THROWS_AS(AugmentBatch(segs, p, rng), ConfigError);
  p.p_noise = 0.0;
  CHECK_NOTHROW(p.Validate());
}

}
