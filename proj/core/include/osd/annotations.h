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

#ifndef OSD_ANNOTATIONS_H_
#define OSD_ANNOTATIONS_H_

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "osd/audio_features.h"

namespace osd::annotations {

// Project-wide class coding.
enum FrameClass : uint8_t { kSilence = 0, kSingle = 1, kOverlap = 2 };
inline constexpr int kNumClasses = 3;
inline constexpr std::string_view kClassCoding = "0:silence,1:single,2:overlap";

struct SpeakerTurn {
  std::string recording_id;
  double onset = 0.0;
  double duration = 0.0;
  std::string speaker_id;

  double end() const { return onset + duration; }
};

// One turn per SPEAKER line:
//   SPEAKER <rec> <chan> <onset> <dur> <NA> <NA> <spk> <NA> <NA>
// Other record types are skipped. Bad numbers raise DataError with the line.
std::vector<SpeakerTurn> ParseRttm(const std::string& path);
std::vector<SpeakerTurn> ParseRttmText(std::string_view text,
                                       const std::string& origin = "<rttm>");
std::string FormatRttm(std::span<const SpeakerTurn> turns);

struct FrameLabels {
  std::vector<uint8_t> labels;
  double hop_seconds = 0.010;
  std::string segment_id;
  int valid_frames = 0;

  int size() const { return static_cast<int>(labels.size()); }
};

// Labels for one segment. Frame t is labelled by the number of distinct
// speakers active at its centre, start + (t + 0.5) * hop. Turns of the same
// speaker are merged first so they never count twice. Frames past the span's
// valid frames stay SILENCE.
FrameLabels RasterizeLabels(std::span<const SpeakerTurn> turns,
                            const audio::SegmentSpan& span,
                            const audio::FeatureConfig& features);

// Lower-level form: explicit segment start (seconds), hop and frame counts.
FrameLabels RasterizeLabels(std::span<const SpeakerTurn> turns,
                            double start_seconds, double hop_seconds,
                            int valid_frames, int total_frames);

// OVERLAP -> 1, everything else -> 0.
std::vector<uint8_t> CollapseToBinary(const FrameLabels& labels);

struct ManifestRecord {
  std::string segment_id;
  std::string audio_path;
  int64_t start_sample = 0;
  int64_t end_sample = 0;
  std::string recording_id;
  std::string dataset_tag;
};

// Tab-separated, one record per line, fields in ManifestRecord order.
using SegmentManifest = std::vector<ManifestRecord>;
SegmentManifest ReadManifest(const std::string& path);
SegmentManifest ParseManifest(std::string_view text,
                              const std::string& origin = "<manifest>");
void WriteManifest(const std::string& path, const SegmentManifest& manifest);
std::string FormatManifest(const SegmentManifest& manifest);
// Unique ids and well-formed spans; throws DataError.
void ValidateManifest(const SegmentManifest& manifest);

struct DatasetStats {
  std::array<int64_t, kNumClasses> frames{};
  double hop_seconds = 0.010;
  double total_hours = 0.0;
  double silence_hours = 0.0;
  double single_hours = 0.0;
  double overlap_hours = 0.0;
  double overlap_percent = 0.0;

  int64_t total_frames() const { return frames[0] + frames[1] + frames[2]; }
  std::array<double, kNumClasses> proportions() const;
};

// Counts valid frames only. Errors when the manifest is empty or a record has
// no labels.
DatasetStats ComputeDatasetStats(
    const SegmentManifest& manifest,
    const std::map<std::string, FrameLabels>& labels);

// Builds stats from raw per-class frame counts.
DatasetStats StatsFromCounts(const std::array<int64_t, kNumClasses>& frames,
                             double hop_seconds);

struct TaggedStats {
  std::map<std::string, DatasetStats> by_tag;
  DatasetStats total;
};
TaggedStats ComputeStatsByTag(const SegmentManifest& manifest,
                              const std::map<std::string, FrameLabels>& labels);

// Picks a multiset of record indices (every record at least once) whose
// pooled class proportions approach `target` by greedily duplicating
// segments. Used to enforce a class mix such as 2:7:1 at the manifest level.
std::vector<size_t> ResampleToProportions(
    const SegmentManifest& manifest,
    const std::map<std::string, FrameLabels>& labels,
    const std::array<double, kNumClasses>& target, double max_growth = 4.0);

}  // namespace osd::annotations

#endif  // OSD_ANNOTATIONS_H_
