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

#include "osd/audio_features.h"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

#include "osd/digest.h"
#include "osd/error.h"
#include "osd/wav.h"

namespace osd::audio {

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

AudioClip LoadAudio(const std::string& path, const LoadOptions& options) {
  WavData wav = ReadWav(path);
  if (wav.channels != 1 && !options.downmix)
    throw DataError(path + ": " + std::to_string(wav.channels) +
                    "-channel audio requires downmix");
  if (wav.sample_rate != kSampleRate && !options.allow_resample)
    throw DataError(path + ": unsupported sample rate " +
                    std::to_string(wav.sample_rate) + " (expected 16000)");

  AudioClip clip;
  clip.source_id = path;
  const int64_t frames = wav.frames();
  clip.samples.resize(static_cast<size_t>(frames));
  if (wav.channels == 1) {
    clip.samples = std::move(wav.interleaved);
  } else {
    for (int64_t i = 0; i < frames; ++i) {
      double sum = 0.0;
      for (int c = 0; c < wav.channels; ++c)
        sum += wav.interleaved[size_t(i * wav.channels + c)];
      clip.samples[size_t(i)] = sum / wav.channels;
    }
  }
  if (wav.sample_rate != kSampleRate)
    clip.samples = Resample(clip.samples, wav.sample_rate, kSampleRate);
  return clip;
}

std::vector<double> Resample(std::span<const double> input, int from_rate,
                             int to_rate) {
  if (from_rate <= 0 || to_rate <= 0)
    throw std::invalid_argument("Resample: rates must be positive");
  if (from_rate == to_rate) return {input.begin(), input.end()};

  constexpr double kNumZeros = 16.0;
  const double cutoff = 0.99 * 0.5 * std::min(from_rate, to_rate);
  const double half_width = kNumZeros / (2.0 * cutoff);
  const int64_t n_in = static_cast<int64_t>(input.size());
  const auto n_out = static_cast<int64_t>(
      (static_cast<__int128>(n_in) * to_rate) / from_rate);

  std::vector<double> out(static_cast<size_t>(n_out));
  for (int64_t m = 0; m < n_out; ++m) {
    const double t = static_cast<double>(m) / to_rate;
    const auto first = std::max<int64_t>(
        0, static_cast<int64_t>(std::ceil((t - half_width) * from_rate)));
    const auto last = std::min<int64_t>(
        n_in - 1, static_cast<int64_t>(std::floor((t + half_width) * from_rate)));
    double acc = 0.0;
    for (int64_t n = first; n <= last; ++n) {
      const double tau = t - static_cast<double>(n) / from_rate;
      if (std::abs(tau) >= half_width) continue;
      const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * tau / half_width));
      const double x = 2.0 * cutoff * tau;
      const double sinc =
          x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      acc += input[size_t(n)] * w * 2.0 * cutoff * sinc / from_rate;
    }
    out[size_t(m)] = acc;
  }
  return out;
}

std::string SegmentId(const std::string& recording_id, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", index);
  return recording_id + "-" + buf;
}

std::vector<SegmentSpan> Segment(const AudioClip& clip, double seg_seconds) {
  if (!(seg_seconds > 0.0))
    throw std::invalid_argument("segment length must be positive");
  if (clip.samples.empty())
    throw DataError("cannot segment empty clip '" + clip.source_id + "'");
  const auto seg_samples =
      static_cast<int64_t>(std::llround(seg_seconds * clip.sample_rate));
  std::vector<SegmentSpan> spans;
  for (int64_t start = 0; start < clip.size(); start += seg_samples) {
    SegmentSpan span;
    span.segment_id = SegmentId(clip.source_id, static_cast<int>(spans.size()));
    span.start = start;
    span.end = std::min(clip.size(), start + seg_samples);
    span.partial = span.size() < seg_samples;
    spans.push_back(std::move(span));
  }
  return spans;
}

int FeatureConfig::hop_samples() const {
  return static_cast<int>(std::lround(hop_seconds * kSampleRate));
}
int FeatureConfig::window_samples() const {
  return static_cast<int>(std::lround(window_seconds * kSampleRate));
}

void FeatureConfig::Validate() const {
  if (hop_samples() <= 0 || window_samples() < hop_samples())
    throw ConfigError("feature: need 0 < hop <= window");
  if (fft_size < window_samples())
    throw ConfigError("feature: fft_size smaller than the window");
  if (mel_bins != 64)
    throw ConfigError("feature: mel_bins must be 64");
  if (!(energy_floor > 0.0)) throw ConfigError("feature: floor must be > 0");
  if (!(low_hz >= 0.0 && high_hz > low_hz && high_hz <= kSampleRate / 2.0))
    throw ConfigError("feature: need 0 <= low_hz < high_hz <= 8000");
  if (frames_per_segment <= 0 || !(segment_seconds > 0.0))
    throw ConfigError("feature: bad segment geometry");
}

KeyValueConfig FeatureConfig::ToKeyValues() const {
  KeyValueConfig kv;
  kv.Set("feature.hop", FormatDouble(hop_seconds));
  kv.Set("feature.window", FormatDouble(window_seconds));
  kv.Set("feature.mel_bins", std::to_string(mel_bins));
  kv.Set("feature.fft_size", std::to_string(fft_size));
  kv.Set("feature.floor", FormatDouble(energy_floor));
  kv.Set("feature.low_hz", FormatDouble(low_hz));
  kv.Set("feature.high_hz", FormatDouble(high_hz));
  kv.Set("feature.frames_per_segment", std::to_string(frames_per_segment));
  kv.Set("feature.segment_seconds", FormatDouble(segment_seconds));
  return kv;
}

FeatureConfig FeatureConfig::FromKeyValues(const KeyValueConfig& kv) {
  FeatureConfig c;
  auto num = [&](const char* key, double& dst) {
    if (auto v = kv.Get(key)) dst = ParseDouble(*v, key);
  };
  auto integer = [&](const char* key, int& dst) {
    if (auto v = kv.Get(key)) dst = static_cast<int>(ParseInt(*v, key));
  };
  num("feature.hop", c.hop_seconds);
  num("feature.window", c.window_seconds);
  integer("feature.mel_bins", c.mel_bins);
  integer("feature.fft_size", c.fft_size);
  num("feature.floor", c.energy_floor);
  num("feature.low_hz", c.low_hz);
  num("feature.high_hz", c.high_hz);
  integer("feature.frames_per_segment", c.frames_per_segment);
  num("feature.segment_seconds", c.segment_seconds);
  c.Validate();
  return c;
}

std::string FeatureConfig::Digest() const {
  KeyValueConfig kv = ToKeyValues();
  kv.Set("feature.sample_rate", std::to_string(kSampleRate));
  kv.Set("feature.window_shape", "hamming");
  kv.Set("feature.mel_scale", "htk");
  kv.Set("feature.spectrum", "power");
  kv.Set("feature.framing", "center_half_hop");
  return ShortDigest(kv.ToString());
}

FbankComputer::FbankComputer(const FeatureConfig& config) : config_(config) {
  config_.Validate();
  const int win = config_.window_samples();
  window_.resize(size_t(win));
  for (int n = 0; n < win; ++n)
    window_[size_t(n)] =
        0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (win - 1));

  const int bins = config_.mel_bins;
  const int num_fft_bins = config_.fft_size / 2 + 1;
  const double mel_low = HzToMel(config_.low_hz);
  const double mel_high = HzToMel(config_.high_hz);
  const double mel_step = (mel_high - mel_low) / (bins + 1);
  mel_weights_ = Eigen::MatrixXd::Zero(bins, num_fft_bins);
  center_hz_.resize(size_t(bins));
  for (int m = 0; m < bins; ++m) {
    const double left = mel_low + m * mel_step;
    const double center = left + mel_step;
    const double right = center + mel_step;
    center_hz_[size_t(m)] = MelToHz(center);
    for (int k = 0; k < num_fft_bins; ++k) {
      const double mel =
          HzToMel(static_cast<double>(k) * kSampleRate / config_.fft_size);
      if (mel > left && mel < right) {
        mel_weights_(m, k) = mel <= center ? (mel - left) / (center - left)
                                           : (right - mel) / (right - center);
      }
    }
  }
}

int NumFrames(int64_t num_samples, const FeatureConfig& config) {
  const int64_t win = config.window_samples();
  if (num_samples < win) return 0;
  const int64_t padded = num_samples + 2 * config.pad_samples();
  return static_cast<int>((padded - win) / config.hop_samples() + 1);
}

int ValidFramesForSpan(int64_t num_samples, const FeatureConfig& config) {
  return std::min(NumFrames(num_samples, config), config.frames_per_segment);
}

FeatureMatrix FbankComputer::Compute(std::span<const double> samples,
                                     const std::string& segment_id) const {
  const int frames = NumFrames(static_cast<int64_t>(samples.size()));
  if (frames == 0)
    throw DataError("span of " + std::to_string(samples.size()) +
                    " samples is shorter than one analysis window");
  const int win = config_.window_samples();
  const int hop = config_.hop_samples();
  const int pad = config_.pad_samples();
  const int nfft = config_.fft_size;
  const int num_fft_bins = nfft / 2 + 1;
  const auto n = static_cast<int64_t>(samples.size());

  Eigen::FFT<double> fft;
  std::vector<double> frame(size_t(nfft), 0.0);
  std::vector<std::complex<double>> spectrum;
  Eigen::VectorXd power(num_fft_bins);

  FeatureMatrix out;
  out.values.resize(config_.mel_bins, frames);
  out.valid_frames = frames;
  out.hop_seconds = config_.hop_seconds;
  out.window_seconds = config_.window_seconds;
  out.segment_id = segment_id;

  for (int t = 0; t < frames; ++t) {
    const int64_t start = int64_t(t) * hop - pad;
    for (int i = 0; i < win; ++i) {
      const int64_t s = start + i;
      frame[size_t(i)] =
          (s >= 0 && s < n) ? samples[size_t(s)] * window_[size_t(i)] : 0.0;
    }
    fft.fwd(spectrum, frame);
    for (int k = 0; k < num_fft_bins; ++k) power(k) = std::norm(spectrum[size_t(k)]);
    const Eigen::VectorXd energies = mel_weights_ * power;
    for (int m = 0; m < config_.mel_bins; ++m)
      out.values(m, t) = std::log(std::max(energies(m), config_.energy_floor));
  }
  return out;
}

FeatureMatrix FbankComputer::ComputeSegment(std::span<const double> samples,
                                            const std::string& segment_id) const {
  FeatureMatrix raw = Compute(samples, segment_id);
  const int target = config_.frames_per_segment;
  if (raw.frame_count() == target) return raw;
  FeatureMatrix out = raw;
  out.values = Eigen::MatrixXd::Zero(config_.mel_bins, target);
  const int keep = std::min(raw.frame_count(), target);
  out.values.leftCols(keep) = raw.values.leftCols(keep);
  out.valid_frames = keep;
  return out;
}

}  // namespace osd::audio
