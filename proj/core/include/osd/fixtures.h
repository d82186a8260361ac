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

#ifndef OSD_FIXTURES_H_
#define OSD_FIXTURES_H_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "osd/annotations.h"
#include "osd/audio_features.h"
#include "osd/kv_config.h"

namespace osd::fixtures {

// Synthetic corpus: "speakers" are harmonic tones or band-limited noise
// bursts, composed on a 10 ms grid so every frame centre falls inside exactly
// one grid cell and the planted class proportions survive rasterisation.
struct FixtureOptions {
  uint64_t seed = 7;
  double overlap_ratio = 0.15;
  double silence_ratio = 0.20;
  std::vector<std::string> tags{"synth_a", "synth_b"};
  int train_recordings = 6;  // per tag
  int val_recordings = 2;
  int test_recordings = 2;
  double recording_seconds = 12.0;
  int speakers_per_recording = 4;
  int noise_clips = 3;
  int rir_count = 3;

  void Validate() const;  // throws ConfigError
};

inline constexpr double kGridSeconds = 0.010;
inline constexpr int kGridSamples = 160;

struct SynthRecording {
  std::string recording_id;
  std::string tag;
  audio::AudioClip audio;
  std::vector<annotations::SpeakerTurn> turns;
  // Grid cells per class as planted (silence, single, overlap).
  std::array<int64_t, annotations::kNumClasses> cells{};
};

// Deterministic 64-bit seed for a named sub-stream.
uint64_t SubSeed(uint64_t seed, const std::string& label);

// One recording of `seconds` (rounded to whole grid cells) drawing its
// speakers from the pool of `tag_index`.
SynthRecording GenerateRecording(const std::string& recording_id,
                                 const std::string& tag, int tag_index,
                                 double seconds, const FixtureOptions& options);

std::vector<double> GenerateNoiseClip(int index, double seconds, uint64_t seed);
std::vector<double> GenerateRir(int index, uint64_t seed);

struct FixtureSummary {
  KeyValueConfig planted;  // also written to planted.txt
  int recordings = 0;
};

// Writes audio/, rttm/, train.tsv, val.tsv, test.tsv (recording-level
// manifests with paths relative to `out`), noise/ + noise.tsv, rir/ +
// rir.tsv, fixture.recipe and planted.txt.
FixtureSummary MakeFixtures(const std::filesystem::path& out,
                            const FixtureOptions& options);

}  // namespace osd::fixtures

#endif  // OSD_FIXTURES_H_
