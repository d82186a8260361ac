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

#ifndef OSD_AUDIO_FEATURES_H_
#define OSD_AUDIO_FEATURES_H_

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "osd/kv_config.h"

namespace osd::audio {

inline constexpr int kSampleRate = 16000;

// A mono 16 kHz waveform with samples nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kSampleRate;
  int channel_count = 1;
  std::string source_id;

  int64_t size() const { return static_cast<int64_t>(samples.size()); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

struct LoadOptions {
  bool downmix = false;         // average channels of multi-channel input
  bool allow_resample = false;  // otherwise non-16 kHz input is rejected
};

AudioClip LoadAudio(const std::string& path, const LoadOptions& options = {});

// Band-limited (Hann-windowed sinc) sample-rate conversion.
std::vector<double> Resample(std::span<const double> input, int from_rate,
                             int to_rate);

// Half-open sample range [start, end) of one analysis segment.
struct SegmentSpan {
  std::string segment_id;
  int64_t start = 0;
  int64_t end = 0;
  bool partial = false;

  int64_t size() const { return end - start; }
};

// Tiles the clip left-to-right into seg_seconds pieces; only the last span
// may be shorter, and it is then flagged partial.
std::vector<SegmentSpan> Segment(const AudioClip& clip,
                                 double seg_seconds = 4.0);
std::string SegmentId(const std::string& recording_id, int index);

struct FeatureConfig {
  double hop_seconds = 0.010;
  double window_seconds = 0.025;
  int mel_bins = 64;
  int fft_size = 512;
  double energy_floor = 1e-10;
  double low_hz = 0.0;
  double high_hz = 8000.0;
  int frames_per_segment = 400;
  double segment_seconds = 4.0;

  int hop_samples() const;
  int window_samples() const;
  // Zero padding added on both sides so frame t is centred at (t + 0.5) hop.
  int pad_samples() const { return (window_samples() - hop_samples()) / 2; }

  void Validate() const;
  KeyValueConfig ToKeyValues() const;  // keys prefixed "feature."
  static FeatureConfig FromKeyValues(const KeyValueConfig& kv);
  // Stable digest over every value that changes the features, including the
  // fixed conventions (window shape, mel scale, power spectrum).
  std::string Digest() const;
};

// Log-mel energies, mel_bins x frames. Frames at index >= valid_frames are
// zero padding.
struct FeatureMatrix {
  Eigen::MatrixXd values;
  int valid_frames = 0;
  double hop_seconds = 0.010;
  double window_seconds = 0.025;
  std::string segment_id;

  int mel_bins() const { return static_cast<int>(values.rows()); }
  int frame_count() const { return static_cast<int>(values.cols()); }
};

// Frame count for a span under the centred framing:
// floor((n + 2 pad - window) / hop) + 1, or 0 when n < window.
int NumFrames(int64_t num_samples, const FeatureConfig& config);

// Valid frames of a segment: NumFrames capped at frames_per_segment.
int ValidFramesForSpan(int64_t num_samples, const FeatureConfig& config);

class FbankComputer {
 public:
  explicit FbankComputer(const FeatureConfig& config = {});

  int NumFrames(int64_t num_samples) const {
    return audio::NumFrames(num_samples, config_);
  }

  // Unpadded features for an arbitrary span. Throws DataError when the span is
  // shorter than one analysis window.
  FeatureMatrix Compute(std::span<const double> samples,
                        const std::string& segment_id = {}) const;

  // Features zero-padded (or truncated) to frames_per_segment columns with
  // valid_frames recording the true count.
  FeatureMatrix ComputeSegment(std::span<const double> samples,
                               const std::string& segment_id = {}) const;

  const FeatureConfig& config() const { return config_; }
  // mel_bins x (fft_size / 2 + 1) triangular weights.
  const Eigen::MatrixXd& mel_weights() const { return mel_weights_; }
  const std::vector<double>& center_hz() const { return center_hz_; }
  const std::vector<double>& window() const { return window_; }

 private:
  FeatureConfig config_;
  Eigen::MatrixXd mel_weights_;
  std::vector<double> center_hz_;
  std::vector<double> window_;
};

double HzToMel(double hz);
double MelToHz(double mel);

}  // namespace osd::audio

#endif  // OSD_AUDIO_FEATURES_H_
