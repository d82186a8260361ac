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

#ifndef OSD_WAV_H_
#define OSD_WAV_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace osd::audio {

// Decoded RIFF/WAVE contents. Samples are interleaved and scaled to [-1, 1].
struct WavData {
  int sample_rate = 0;
  int channels = 0;
  std::vector<double> interleaved;

  int64_t frames() const {
    return channels ? static_cast<int64_t>(interleaved.size()) / channels : 0;
  }
};

// Supports PCM 8/16/24/32-bit integer and 32/64-bit IEEE float, including
// WAVE_FORMAT_EXTENSIBLE wrappers. Throws DataError on anything else.
WavData ReadWav(const std::string& path);
WavData DecodeWav(std::span<const uint8_t> bytes, const std::string& origin);

// Writes mono or interleaved 16-bit PCM. Values are clipped to [-1, 1] and
// rounded to nearest, so the output is byte-stable for identical input.
void WriteWavPcm16(const std::string& path, std::span<const double> interleaved,
                   int sample_rate, int channels = 1);
void WriteWavFloat32(const std::string& path,
                     std::span<const double> interleaved, int sample_rate,
                     int channels = 1);

}  // namespace osd::audio

#endif  // OSD_WAV_H_
