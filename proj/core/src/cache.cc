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

#include "osd/cache.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "osd/error.h"

namespace osd::cache {
namespace fs = std::filesystem;
namespace {

static_assert(std::endian::native == std::endian::little,
              "cache files are written in native little-endian order");

constexpr std::string_view kEndHeader = "end_header\n";

// Splits "magic\nheader...\nend_header\n<payload>".
std::pair<KeyValueConfig, std::string_view> SplitFile(std::string_view bytes,
                                                      std::string_view magic,
                                                      const std::string& origin) {
  const size_t first = bytes.find('\n');
  if (first == std::string_view::npos || bytes.substr(0, first) != magic)
    throw DataError(origin + ": not a " + std::string(magic) + " file");
  const size_t end = bytes.find(kEndHeader, first + 1);
  if (end == std::string_view::npos) throw DataError(origin + ": missing end_header");
  KeyValueConfig header =
      KeyValueConfig::Parse(bytes.substr(first + 1, end - first - 1), origin);
  return {std::move(header), bytes.substr(end + kEndHeader.size())};
}

int64_t HeaderInt(const KeyValueConfig& header, const std::string& key,
                  const std::string& origin) {
  auto v = header.Get(key);
  if (!v) throw DataError(origin + ": header lacks " + key);
  return ParseInt(*v, key);
}

std::string Compose(std::string_view magic, const KeyValueConfig& header) {
  std::string out(magic);
  out += '\n';
  out += header.ToString();
  out += kEndHeader;
  return out;
}

}  // namespace

std::string ReadFileBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileAtomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void WriteFeatures(const fs::path& path, const audio::FeatureMatrix& features,
                   const KeyValueConfig& extra) {
  KeyValueConfig header = extra;
  header.Set("rows", std::to_string(features.values.rows()));
  header.Set("cols", std::to_string(features.values.cols()));
  header.Set("valid_frames", std::to_string(features.valid_frames));
  header.Set("hop", FormatDouble(features.hop_seconds));
  header.Set("window", FormatDouble(features.window_seconds));
  header.Set("segment_id", features.segment_id);
  header.Set("dtype", "float32");
  std::string bytes = Compose(kFeatureMagic, header);
  const size_t offset = bytes.size();
  bytes.resize(offset + size_t(features.values.size()) * sizeof(float));
  for (Eigen::Index i = 0; i < features.values.size(); ++i) {
    const float v = static_cast<float>(features.values.data()[i]);
    std::memcpy(bytes.data() + offset + size_t(i) * sizeof(float), &v, sizeof(float));
  }
  WriteFileAtomic(path, bytes);
}

FeatureFile ReadFeatures(const fs::path& path) {
  const std::string origin = path.string();
  const std::string bytes = ReadFileBytes(path);
  auto [header, payload] = SplitFile(bytes, kFeatureMagic, origin);
  const int64_t rows = HeaderInt(header, "rows", origin);
  const int64_t cols = HeaderInt(header, "cols", origin);
  if (rows <= 0 || cols <= 0 || payload.size() != size_t(rows * cols) * sizeof(float))
    throw DataError(origin + ": payload size does not match " + std::to_string(rows) +
                    "x" + std::to_string(cols));
  FeatureFile out;
  out.features.values.resize(rows, cols);
  for (int64_t i = 0; i < rows * cols; ++i) {
    float v;
    std::memcpy(&v, payload.data() + size_t(i) * sizeof(float), sizeof(float));
    out.features.values.data()[i] = v;
  }
  out.features.valid_frames = static_cast<int>(HeaderInt(header, "valid_frames", origin));
  out.features.hop_seconds = ParseDouble(header.GetOr("hop", "0.01"), "hop");
  out.features.window_seconds = ParseDouble(header.GetOr("window", "0.025"), "window");
  out.features.segment_id = header.GetOr("segment_id", "");
  out.header = std::move(header);
  return out;
}

void WriteLabels(const fs::path& path, const annotations::FrameLabels& labels,
                 const KeyValueConfig& extra) {
  KeyValueConfig header = extra;
  header.Set("frames", std::to_string(labels.labels.size()));
  header.Set("valid_frames", std::to_string(labels.valid_frames));
  header.Set("hop", FormatDouble(labels.hop_seconds));
  header.Set("segment_id", labels.segment_id);
  header.Set("coding", std::string(annotations::kClassCoding));
  std::string bytes = Compose(kLabelMagic, header);
  bytes.append(reinterpret_cast<const char*>(labels.labels.data()), labels.labels.size());
  WriteFileAtomic(path, bytes);
}

LabelFile ReadLabels(const fs::path& path) {
  const std::string origin = path.string();
  const std::string bytes = ReadFileBytes(path);
  auto [header, payload] = SplitFile(bytes, kLabelMagic, origin);
  const int64_t frames = HeaderInt(header, "frames", origin);
  if (frames < 0 || payload.size() != size_t(frames))
    throw DataError(origin + ": label payload has " + std::to_string(payload.size()) +
                    " bytes, header says " + std::to_string(frames));
  if (header.GetOr("coding", "") != annotations::kClassCoding)
    throw DataError(origin + ": unexpected class coding");
  LabelFile out;
  out.labels.labels.assign(payload.begin(), payload.end());
  for (uint8_t v : out.labels.labels)
    if (v >= annotations::kNumClasses) throw DataError(origin + ": label out of range");
  out.labels.valid_frames = static_cast<int>(HeaderInt(header, "valid_frames", origin));
  out.labels.hop_seconds = ParseDouble(header.GetOr("hop", "0.01"), "hop");
  out.labels.segment_id = header.GetOr("segment_id", "");
  out.header = std::move(header);
  return out;
}

KeyValueConfig PeekHeader(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::string line, text;
  if (!std::getline(in, line)) return {};
  while (std::getline(in, line)) {
    if (line == "end_header") {
      try {
        return KeyValueConfig::Parse(text, path.string());
      } catch (const Error&) {
        return {};
      }
    }
    text += line;
    text += '\n';
  }
  return {};
}

fs::path CacheLayout::FeaturePath(const std::string& segment_id) const {
  return root_ / "feats" / (segment_id + ".feat");
}

fs::path CacheLayout::LabelPath(const std::string& segment_id) const {
  return root_ / "labels" / (segment_id + ".lab");
}

fs::path CacheLayout::FeatureConfigPath() const { return root_ / "feature_config.txt"; }

fs::path CacheLayout::SegmentManifestPath(const std::string& stem) const {
  return root_ / (stem + ".segments.tsv");
}

KeyValueConfig CacheLayout::ReadFeatureConfig() const {
  const fs::path path = FeatureConfigPath();
  if (!fs::exists(path))
    throw ConfigError("cache " + root_.string() + " has no feature_config.txt; run prepare");
  return KeyValueConfig::Load(path.string());
}

void CacheLayout::WriteFeatureConfig(const audio::FeatureConfig& config) const {
  KeyValueConfig kv = config.ToKeyValues();
  kv.Set("feature.digest", config.Digest());
  WriteFileAtomic(FeatureConfigPath(), kv.ToString());
}

}  // namespace osd::cache
