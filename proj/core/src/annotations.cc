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

#include "osd/annotations.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "osd/error.h"
#include "osd/kv_config.h"

namespace osd::annotations {
namespace {

std::vector<std::string_view> SplitWhitespace(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])))
      ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> out;
  size_t pos = 0;
  while (true) {
    size_t tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return out;
}

bool ToDouble(std::string_view s, double& v) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
}

bool ToInt(std::string_view s, int64_t& v) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string ReadAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Interval {
  double begin;
  double end;
};

// Union of each speaker's turns.
std::map<std::string, std::vector<Interval>> MergeBySpeaker(
    std::span<const SpeakerTurn> turns) {
  std::map<std::string, std::vector<Interval>> by_speaker;
  for (const auto& t : turns)
    by_speaker[t.speaker_id].push_back({t.onset, t.end()});
  for (auto& [spk, iv] : by_speaker) {
    std::sort(iv.begin(), iv.end(),
              [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
    std::vector<Interval> merged;
    for (const auto& x : iv) {
      if (!merged.empty() && x.begin <= merged.back().end)
        merged.back().end = std::max(merged.back().end, x.end);
      else
        merged.push_back(x);
    }
    iv = std::move(merged);
  }
  return by_speaker;
}

}  // namespace

std::vector<SpeakerTurn> ParseRttmText(std::string_view text,
                                       const std::string& origin) {
  std::vector<SpeakerTurn> turns;
  int line_no = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto fields = SplitWhitespace(line);
    if (fields.empty() || fields[0] != "SPEAKER") continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (fields.size() < 8)
      throw DataError(where + ": SPEAKER line needs at least 8 fields");
    SpeakerTurn turn;
    turn.recording_id = std::string(fields[1]);
    if (!ToDouble(fields[3], turn.onset))
      throw DataError(where + ": bad onset '" + std::string(fields[3]) + "'");
    if (!ToDouble(fields[4], turn.duration))
      throw DataError(where + ": bad duration '" + std::string(fields[4]) + "'");
    if (turn.onset < 0.0) throw DataError(where + ": negative onset");
    if (turn.duration <= 0.0) throw DataError(where + ": non-positive duration");
    turn.speaker_id = std::string(fields[7]);
    turns.push_back(std::move(turn));
  }
  return turns;
}

std::vector<SpeakerTurn> ParseRttm(const std::string& path) {
  return ParseRttmText(ReadAll(path), path);
}

std::string FormatRttm(std::span<const SpeakerTurn> turns) {
  std::string out;
  char buf[64];
  for (const auto& t : turns) {
    out += "SPEAKER " + t.recording_id + " 1 ";
    std::snprintf(buf, sizeof(buf), "%.3f %.3f", t.onset, t.duration);
    out += buf;
    out += " <NA> <NA> " + t.speaker_id + " <NA> <NA>\n";
  }
  return out;
}

FrameLabels RasterizeLabels(std::span<const SpeakerTurn> turns,
                            double start_seconds, double hop_seconds,
                            int valid_frames, int total_frames) {
  if (!(hop_seconds > 0.0)) throw std::invalid_argument("hop must be positive");
  valid_frames = std::clamp(valid_frames, 0, total_frames);
  FrameLabels out;
  out.hop_seconds = hop_seconds;
  out.valid_frames = valid_frames;
  out.labels.assign(size_t(total_frames), kSilence);

  std::vector<int> count(size_t(valid_frames), 0);
  for (const auto& [speaker, intervals] : MergeBySpeaker(turns)) {
    for (const auto& iv : intervals) {
      // Start a frame early and let the exact centre comparison decide.
      const double first = std::floor((iv.begin - start_seconds) / hop_seconds - 0.5);
      int t = static_cast<int>(std::clamp(first - 1.0, 0.0, double(valid_frames)));
      for (; t < valid_frames; ++t) {
        const double center = start_seconds + (t + 0.5) * hop_seconds;
        if (center >= iv.end) break;
        if (center >= iv.begin) ++count[size_t(t)];
      }
    }
  }
  for (int t = 0; t < valid_frames; ++t)
    out.labels[size_t(t)] = static_cast<uint8_t>(std::min(count[size_t(t)], 2));
  return out;
}

FrameLabels RasterizeLabels(std::span<const SpeakerTurn> turns,
                            const audio::SegmentSpan& span,
                            const audio::FeatureConfig& features) {
  const double start = static_cast<double>(span.start) / audio::kSampleRate;
  FrameLabels out = RasterizeLabels(
      turns, start, features.hop_seconds,
      audio::ValidFramesForSpan(span.size(), features),
      features.frames_per_segment);
  out.segment_id = span.segment_id;
  return out;
}

std::vector<uint8_t> CollapseToBinary(const FrameLabels& labels) {
  std::vector<uint8_t> out(labels.labels.size());
  std::transform(labels.labels.begin(), labels.labels.end(), out.begin(),
                 [](uint8_t c) { return static_cast<uint8_t>(c == kOverlap); });
  return out;
}

SegmentManifest ParseManifest(std::string_view text, const std::string& origin) {
  SegmentManifest manifest;
  int line_no = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto f = SplitTabs(line);
    if (f.size() != 6)
      throw DataError(where + ": expected 6 tab-separated fields, got " +
                      std::to_string(f.size()));
    ManifestRecord r;
    r.segment_id = std::string(f[0]);
    r.audio_path = std::string(f[1]);
    if (!ToInt(f[2], r.start_sample) || !ToInt(f[3], r.end_sample))
      throw DataError(where + ": bad sample span");
    r.recording_id = std::string(f[4]);
    r.dataset_tag = std::string(f[5]);
    manifest.push_back(std::move(r));
  }
  return manifest;
}

SegmentManifest ReadManifest(const std::string& path) {
  return ParseManifest(ReadAll(path), path);
}

std::string FormatManifest(const SegmentManifest& manifest) {
  std::string out;
  for (const auto& r : manifest) {
    out += r.segment_id + '\t' + r.audio_path + '\t' +
           std::to_string(r.start_sample) + '\t' + std::to_string(r.end_sample) +
           '\t' + r.recording_id + '\t' + r.dataset_tag + '\n';
  }
  return out;
}

void WriteManifest(const std::string& path, const SegmentManifest& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << FormatManifest(manifest);
}

void ValidateManifest(const SegmentManifest& manifest) {
  std::set<std::string> seen;
  for (const auto& r : manifest) {
    if (r.segment_id.empty()) throw DataError("manifest: empty segment id");
    if (!seen.insert(r.segment_id).second)
      throw DataError("manifest: duplicate segment id '" + r.segment_id + "'");
    if (r.start_sample < 0 || r.end_sample <= r.start_sample)
      throw DataError("manifest: bad span for '" + r.segment_id + "'");
  }
}

std::array<double, kNumClasses> DatasetStats::proportions() const {
  const double total = static_cast<double>(total_frames());
  std::array<double, kNumClasses> p{};
  if (total > 0)
    for (int c = 0; c < kNumClasses; ++c) p[size_t(c)] = frames[size_t(c)] / total;
  return p;
}

DatasetStats StatsFromCounts(const std::array<int64_t, kNumClasses>& frames,
                             double hop_seconds) {
  DatasetStats s;
  s.frames = frames;
  s.hop_seconds = hop_seconds;
  auto hours = [&](int64_t n) { return static_cast<double>(n) * hop_seconds / 3600.0; };
  s.silence_hours = hours(frames[kSilence]);
  s.single_hours = hours(frames[kSingle]);
  s.overlap_hours = hours(frames[kOverlap]);
  s.total_hours = hours(s.total_frames());
  s.overlap_percent =
      s.total_frames() > 0
          ? 100.0 * static_cast<double>(frames[kOverlap]) / s.total_frames()
          : 0.0;
  return s;
}

namespace {

const FrameLabels& LabelsFor(const ManifestRecord& r,
                             const std::map<std::string, FrameLabels>& labels) {
  auto it = labels.find(r.segment_id);
  if (it == labels.end())
    throw DataError("no labels for segment '" + r.segment_id + "'");
  return it->second;
}

void Accumulate(const FrameLabels& l, std::array<int64_t, kNumClasses>& frames) {
  for (int t = 0; t < l.valid_frames; ++t) ++frames[l.labels[size_t(t)]];
}

}  // namespace

DatasetStats ComputeDatasetStats(
    const SegmentManifest& manifest,
    const std::map<std::string, FrameLabels>& labels) {
  if (manifest.empty()) throw DataError("dataset stats: empty manifest");
  std::array<int64_t, kNumClasses> frames{};
  double hop = 0.0;
  for (const auto& r : manifest) {
    const FrameLabels& l = LabelsFor(r, labels);
    hop = l.hop_seconds;
    Accumulate(l, frames);
  }
  return StatsFromCounts(frames, hop);
}

TaggedStats ComputeStatsByTag(const SegmentManifest& manifest,
                              const std::map<std::string, FrameLabels>& labels) {
  if (manifest.empty()) throw DataError("dataset stats: empty manifest");
  std::map<std::string, std::array<int64_t, kNumClasses>> per_tag;
  std::array<int64_t, kNumClasses> total{};
  double hop = 0.0;
  for (const auto& r : manifest) {
    const FrameLabels& l = LabelsFor(r, labels);
    hop = l.hop_seconds;
    Accumulate(l, per_tag[r.dataset_tag]);
    Accumulate(l, total);
  }
  TaggedStats out;
  for (const auto& [tag, frames] : per_tag)
    out.by_tag[tag] = StatsFromCounts(frames, hop);
  out.total = StatsFromCounts(total, hop);
  return out;
}

std::vector<size_t> ResampleToProportions(
    const SegmentManifest& manifest,
    const std::map<std::string, FrameLabels>& labels,
    const std::array<double, kNumClasses>& target, double max_growth) {
  std::vector<std::array<int64_t, kNumClasses>> per_record;
  std::array<int64_t, kNumClasses> pooled{};
  std::vector<size_t> picks;
  for (size_t i = 0; i < manifest.size(); ++i) {
    std::array<int64_t, kNumClasses> f{};
    Accumulate(LabelsFor(manifest[i], labels), f);
    per_record.push_back(f);
    for (int c = 0; c < kNumClasses; ++c) pooled[size_t(c)] += f[size_t(c)];
    picks.push_back(i);
  }
  const double target_sum = target[0] + target[1] + target[2];
  auto distance = [&](const std::array<int64_t, kNumClasses>& f) {
    const double total = static_cast<double>(f[0] + f[1] + f[2]);
    double d = 0.0;
    for (int c = 0; c < kNumClasses; ++c)
      d += std::abs(f[size_t(c)] / total - target[size_t(c)] / target_sum);
    return d;
  };

  const auto limit = static_cast<size_t>(max_growth * manifest.size());
  double current = distance(pooled);
  while (picks.size() < limit) {
    size_t best = manifest.size();
    double best_d = current;
    for (size_t i = 0; i < manifest.size(); ++i) {
      auto trial = pooled;
      for (int c = 0; c < kNumClasses; ++c) trial[size_t(c)] += per_record[i][size_t(c)];
      const double d = distance(trial);
      if (d < best_d - 1e-12) {
        best_d = d;
        best = i;
      }
    }
    if (best == manifest.size()) break;
    for (int c = 0; c < kNumClasses; ++c) pooled[size_t(c)] += per_record[best][size_t(c)];
    picks.push_back(best);
    current = best_d;
  }
  std::sort(picks.begin(), picks.end());
  return picks;
}

}  // namespace osd::annotations
