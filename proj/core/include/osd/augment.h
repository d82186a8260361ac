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

#ifndef OSD_AUGMENT_H_
#define OSD_AUGMENT_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "osd/annotations.h"
#include "osd/audio_features.h"

namespace osd::augment {

struct NoiseMix {
  audio::AudioClip clip;
  double noise_gain = 0.0;   // g applied to the noise before mixing
  double output_gain = 1.0;  // < 1 only when the mix would clip
};

// Samples counted as speech when measuring power: 25 ms blocks whose mean
// power is within 40 dB of the loudest block.
std::vector<uint8_t> ActiveSampleMask(std::span<const double> samples);

// output = speech + g * noise, with g chosen so the speech-to-noise power
// ratio over the speech's active samples equals snr_db. The noise is looped
// from `noise_offset` to cover the speech. snr_db = +inf returns the speech
// unchanged. If the mix would exceed full scale it is scaled down as a whole.
NoiseMix AddNoise(const audio::AudioClip& speech, const audio::AudioClip& noise,
                  double snr_db, int64_t noise_offset = 0);

enum class RirAlignment {
  kNone,  // output[n] = (x * h)[n]
  kPeak,  // output[n] = (x * h)[n + argmax |h|]
};

struct Reverberation {
  audio::AudioClip clip;
  double gain = 1.0;  // RMS renormalisation factor applied after convolution
};

// Full linear convolution, FFT-based for long filters and direct for sparse
// ones (so a unit impulse reproduces its input exactly).
std::vector<double> Convolve(std::span<const double> signal,
                             std::span<const double> filter);

// Convolves with the impulse response, truncates to the input length and
// rescales to the input RMS.
Reverberation ApplyRir(const audio::AudioClip& speech,
                       std::span<const double> rir,
                       RirAlignment alignment = RirAlignment::kNone);

struct AugmentPolicy {
  double p_noise = 0.5;
  double p_rir = 0.5;
  double snr_low_db = 5.0;
  double snr_high_db = 20.0;
  std::vector<audio::AudioClip> noise_corpus;
  std::vector<std::vector<double>> rir_corpus;
  bool align_rir_peak = true;
  uint64_t seed = 0;

  void Validate() const;  // throws ConfigError
};

struct AugmentDecision {
  bool rir = false;
  size_t rir_index = 0;
  bool noise = false;
  size_t noise_index = 0;
  double snr_db = 0.0;
  int64_t noise_offset = 0;
};

struct LabeledAudio {
  audio::AudioClip audio;
  annotations::FrameLabels labels;
};

struct AugmentedSegment {
  audio::AudioClip audio;
  annotations::FrameLabels labels;  // copied through untouched
  AugmentDecision decision;
};

// Draws the decision for one segment from its own generator.
AugmentDecision DrawDecision(const AugmentPolicy& policy, int64_t speech_size,
                             std::mt19937_64& rng);
AugmentedSegment ApplyDecision(const LabeledAudio& segment,
                               const AugmentPolicy& policy,
                               const AugmentDecision& decision);

// Per segment: RIR with probability p_rir, then noise with probability
// p_noise at an SNR uniform in [snr_low, snr_high]. Each segment gets a
// sub-generator seeded from step_rng in order, so results do not depend on
// how segments are scheduled.
std::vector<AugmentedSegment> AugmentBatch(std::span<const LabeledAudio> segments,
                                           const AugmentPolicy& policy,
                                           std::mt19937_64& step_rng);

}  // namespace osd::augment

#endif  // OSD_AUGMENT_H_
