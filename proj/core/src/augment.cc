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

#include "osd/augment.h"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "osd/error.h"

namespace osd::augment {
namespace {

constexpr int64_t kBlock = 400;            // 25 ms at 16 kHz
constexpr double kActiveFloor = 1e-4;      // -40 dB relative to loudest block
constexpr int64_t kDirectBudget = 1 << 22;  // multiply-adds before switching to FFT

double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double Rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double sum = 0.0;
  for (double v : x) sum += v * v;
  return std::sqrt(sum / static_cast<double>(x.size()));
}

}  // namespace

std::vector<uint8_t> ActiveSampleMask(std::span<const double> samples) {
  const auto n = static_cast<int64_t>(samples.size());
  std::vector<double> power;
  for (int64_t start = 0; start < n; start += kBlock) {
    const int64_t stop = std::min(n, start + kBlock);
    double sum = 0.0;
    for (int64_t i = start; i < stop; ++i) sum += samples[size_t(i)] * samples[size_t(i)];
    power.push_back(sum / double(stop - start));
  }
  const double peak = power.empty() ? 0.0 : *std::max_element(power.begin(), power.end());
  std::vector<uint8_t> mask(samples.size(), 0);
  if (peak <= 0.0) return mask;
  for (size_t b = 0; b < power.size(); ++b) {
    if (power[b] < peak * kActiveFloor) continue;
    const auto start = int64_t(b) * kBlock;
    std::fill(mask.begin() + start, mask.begin() + std::min(n, start + kBlock), 1);
  }
  return mask;
}

NoiseMix AddNoise(const audio::AudioClip& speech, const audio::AudioClip& noise,
                  double snr_db, int64_t noise_offset) {
  NoiseMix out;
  out.clip = speech;
  if (std::isinf(snr_db) && snr_db > 0) return out;
  if (speech.samples.empty()) throw DataError("add_noise: empty speech");
  if (noise.samples.empty()) throw DataError("add_noise: empty noise");

  const auto n = speech.samples.size();
  const auto noise_len = static_cast<int64_t>(noise.samples.size());
  std::vector<double> tiled(n);
  int64_t pos = ((noise_offset % noise_len) + noise_len) % noise_len;
  for (size_t i = 0; i < n; ++i) {
    tiled[i] = noise.samples[size_t(pos)];
    if (++pos == noise_len) pos = 0;
  }

  const auto active = ActiveSampleMask(speech.samples);
  double speech_power = 0.0, noise_power = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    speech_power += speech.samples[i] * speech.samples[i];
    noise_power += tiled[i] * tiled[i];
    ++count;
  }
  if (count == 0 || speech_power <= 0.0) throw DataError("add_noise: zero-power speech");
  if (noise_power <= 0.0) throw DataError("add_noise: zero-power noise");
  speech_power /= double(count);
  noise_power /= double(count);

  out.noise_gain = std::sqrt(speech_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
  double peak = 0.0;
  for (size_t i = 0; i < n; ++i) {
    out.clip.samples[i] += out.noise_gain * tiled[i];
    peak = std::max(peak, std::abs(out.clip.samples[i]));
  }
  if (peak > 1.0) {
    out.output_gain = 1.0 / peak;
    for (double& v : out.clip.samples) v *= out.output_gain;
  }
  return out;
}

std::vector<double> Convolve(std::span<const double> signal,
                             std::span<const double> filter) {
  if (signal.empty() || filter.empty()) return {};
  const size_t out_len = signal.size() + filter.size() - 1;
  std::vector<double> out(out_len, 0.0);

  const auto taps = std::count_if(filter.begin(), filter.end(),
                                  [](double v) { return v != 0.0; });
  if (static_cast<int64_t>(taps) * static_cast<int64_t>(signal.size()) <= kDirectBudget) {
    for (size_t k = 0; k < filter.size(); ++k) {
      const double h = filter[k];
      if (h == 0.0) continue;
      for (size_t i = 0; i < signal.size(); ++i) out[i + k] += h * signal[i];
    }
    return out;
  }

  size_t nfft = 1;
  while (nfft < out_len) nfft <<= 1;
  std::vector<double> a(nfft, 0.0), b(nfft, 0.0);
  std::copy(signal.begin(), signal.end(), a.begin());
  std::copy(filter.begin(), filter.end(), b.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, a);
  fft.fwd(fb, b);
  for (size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  std::vector<double> full;
  fft.inv(full, fa);
  std::copy_n(full.begin(), out_len, out.begin());
  return out;
}

Reverberation ApplyRir(const audio::AudioClip& speech,
                       std::span<const double> rir, RirAlignment alignment) {
  if (rir.empty()) throw DataError("apply_rir: empty impulse response");
  if (std::any_of(rir.begin(), rir.end(), [](double v) { return !std::isfinite(v); }))
    throw DataError("apply_rir: non-finite impulse response");
  if (std::all_of(rir.begin(), rir.end(), [](double v) { return v == 0.0; }))
    throw DataError("apply_rir: all-zero impulse response");

  size_t shift = 0;
  if (alignment == RirAlignment::kPeak) {
    shift = static_cast<size_t>(std::distance(
        rir.begin(), std::max_element(rir.begin(), rir.end(), [](double a, double b) {
          return std::abs(a) < std::abs(b);
        })));
  }
  const std::vector<double> full = Convolve(speech.samples, rir);
  Reverberation out;
  out.clip = speech;
  for (size_t i = 0; i < speech.samples.size(); ++i) out.clip.samples[i] = full[i + shift];

  const double rms_in = Rms(speech.samples);
  const double rms_out = Rms(out.clip.samples);
  if (rms_out > 0.0 && rms_in > 0.0) {
    out.gain = rms_in / rms_out;
    for (double& v : out.clip.samples) v *= out.gain;
  }
  return out;
}

void AugmentPolicy::Validate() const {
  if (!(p_noise >= 0.0 && p_noise <= 1.0) || !(p_rir >= 0.0 && p_rir <= 1.0))
    throw ConfigError("augment: probabilities must be in [0, 1]");
  if (!(snr_low_db <= snr_high_db)) throw ConfigError("augment: snr_low > snr_high");
  if (p_noise > 0.0 && noise_corpus.empty())
    throw ConfigError("augment: p_noise > 0 but the noise corpus is empty");
  if (p_rir > 0.0 && rir_corpus.empty())
    throw ConfigError("augment: p_rir > 0 but the RIR corpus is empty");
}

AugmentDecision DrawDecision(const AugmentPolicy& policy, int64_t speech_size,
                             std::mt19937_64& rng) {
  AugmentDecision d;
  // Draws happen unconditionally so the stream position never depends on
  // earlier outcomes.
  const double u_rir = Uniform01(rng);
  const double u_rir_pick = Uniform01(rng);
  const double u_noise = Uniform01(rng);
  const double u_noise_pick = Uniform01(rng);
  const double u_snr = Uniform01(rng);
  const double u_offset = Uniform01(rng);
  d.rir = policy.p_rir > 0.0 && u_rir < policy.p_rir;
  if (d.rir)
    d.rir_index = std::min(policy.rir_corpus.size() - 1,
                           size_t(u_rir_pick * double(policy.rir_corpus.size())));
  d.noise = policy.p_noise > 0.0 && u_noise < policy.p_noise;
  if (d.noise) {
    d.noise_index = std::min(policy.noise_corpus.size() - 1,
                             size_t(u_noise_pick * double(policy.noise_corpus.size())));
    d.snr_db = policy.snr_low_db + (policy.snr_high_db - policy.snr_low_db) * u_snr;
    const auto len = policy.noise_corpus[d.noise_index].size();
    d.noise_offset = static_cast<int64_t>(u_offset * double(std::max<int64_t>(len, 1)));
  }
  (void)speech_size;
  return d;
}

AugmentedSegment ApplyDecision(const LabeledAudio& segment,
                               const AugmentPolicy& policy,
                               const AugmentDecision& decision) {
  AugmentedSegment out{segment.audio, segment.labels, decision};
  if (decision.rir) {
    out.audio = ApplyRir(out.audio, policy.rir_corpus[decision.rir_index],
                         policy.align_rir_peak ? RirAlignment::kPeak : RirAlignment::kNone)
                    .clip;
  }
  if (decision.noise) {
    out.audio = AddNoise(out.audio, policy.noise_corpus[decision.noise_index],
                         decision.snr_db, decision.noise_offset)
                    .clip;
  }
  return out;
}

std::vector<AugmentedSegment> AugmentBatch(std::span<const LabeledAudio> segments,
                                           const AugmentPolicy& policy,
                                           std::mt19937_64& step_rng) {
  policy.Validate();
  std::vector<uint64_t> seeds(segments.size());
  for (auto& s : seeds) s = step_rng();
  std::vector<AugmentedSegment> out;
  out.reserve(segments.size());
  for (size_t i = 0; i < segments.size(); ++i) {
    std::mt19937_64 rng(seeds[i]);
    const AugmentDecision d = DrawDecision(policy, segments[i].audio.size(), rng);
    out.push_back(ApplyDecision(segments[i], policy, d));
  }
  return out;
}

}  // namespace osd::augment
