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

#ifndef OSD_CACHE_H_
#define OSD_CACHE_H_

#include <filesystem>
#include <string>

#include "osd/annotations.h"
#include "osd/audio_features.h"
#include "osd/kv_config.h"

namespace osd::cache {

// Feature file:  "OSDFEAT 1", key=value header lines, "end_header", then
//                rows x cols little-endian float32, column-major.
// Label file:    "OSDLAB 1", key=value header lines (hop, frames, coding),
//                "end_header", then one byte per frame.
inline constexpr const char* kFeatureMagic = "OSDFEAT 1";
inline constexpr const char* kLabelMagic = "OSDLAB 1";

struct FeatureFile {
  audio::FeatureMatrix features;
  KeyValueConfig header;
};

struct LabelFile {
  annotations::FrameLabels labels;
  KeyValueConfig header;
};

// `extra` lands in the header next to the shape fields (source and config
// digests, mostly).
void WriteFeatures(const std::filesystem::path& path,
                   const audio::FeatureMatrix& features,
                   const KeyValueConfig& extra = {});
FeatureFile ReadFeatures(const std::filesystem::path& path);

void WriteLabels(const std::filesystem::path& path,
                 const annotations::FrameLabels& labels,
                 const KeyValueConfig& extra = {});
LabelFile ReadLabels(const std::filesystem::path& path);

// Header only; a missing or unreadable file yields an empty config.
KeyValueConfig PeekHeader(const std::filesystem::path& path);

// Directory layout under one cache root.
class CacheLayout {
 public:
  explicit CacheLayout(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path FeaturePath(const std::string& segment_id) const;
  std::filesystem::path LabelPath(const std::string& segment_id) const;
  std::filesystem::path FeatureConfigPath() const;
  // Segment manifest written by prepare for an input manifest stem.
  std::filesystem::path SegmentManifestPath(const std::string& stem) const;

  // Feature config recorded by prepare; ConfigError if absent.
  KeyValueConfig ReadFeatureConfig() const;
  void WriteFeatureConfig(const audio::FeatureConfig& config) const;

 private:
  std::filesystem::path root_;
};

// Writes to a temporary sibling and renames, so readers never see partial
// files.
void WriteFileAtomic(const std::filesystem::path& path, const std::string& bytes);
std::string ReadFileBytes(const std::filesystem::path& path);

}  // namespace osd::cache

#endif  // OSD_CACHE_H_
