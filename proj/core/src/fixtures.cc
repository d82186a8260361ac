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

#include "osd/fixtures.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "osd/cache.h"
#include "osd/digest.h"
#include "osd/error.h"
#include "osd/wav.h"

namespace osd::fixtures {
namespace fs = std::filesystem;
namespace {

using annotations::SpeakerTurn;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double U01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double Uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * U01(rng); }
int64_t UniformInt(std::mt19937_64& rng, int64_t lo, int64_t hi) {  // inclusive
  return lo + static_cast<int64_t>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

struct Voice {
  std::string id;
  std::vector<double> freqs;
  std::vector<double> amps;
  std::vector<double> phases;
  double am_rate = 4.0;
  double am_phase = 0.0;
};

// Two tonal and two noise-burst speakers per dataset tag.
std::vector<Voice> SpeakerPool(int tag_index, uint64_t seed) {
  std::mt19937_64 rng(SubSeed(seed, "pool" + std::to_string(tag_index)));
  std::vector<Voice> pool;
  const double tone_f0[2][2] = {{180.0, 310.0}, {140.0, 250.0}};
  const double burst_fc[2][2] = {{1800.0, 3600.0}, {1300.0, 2800.0}};
  const int t = tag_index % 2;
  for (int k = 0; k < 2; ++k) {
    Voice v;
    v.id = "tone" + std::to_string(tag_index) + std::to_string(k);
    for (int h = 1; h <= 5; ++h) {
      v.freqs.push_back(tone_f0[t][k] * h * (1.0 + 0.03 * tag_index / 2));
      v.amps.push_back(1.0 / h);
      v.phases.push_back(Uniform(rng, 0.0, kTwoPi));
    }
    v.am_rate = Uniform(rng, 3.0, 5.0);
    v.am_phase = Uniform(rng, 0.0, kTwoPi);
    pool.push_back(std::move(v));
  }
  for (int k = 0; k < 2; ++k) {
    Voice v;
    v.id = "burst" + std::to_string(tag_index) + std::to_string(k);
    const double fc = burst_fc[t][k];
    for (int p = 0; p < 24; ++p) {
      v.freqs.push_back(Uniform(rng, fc - 250.0, fc + 250.0));
      v.amps.push_back(0.35);
      v.phases.push_back(Uniform(rng, 0.0, kTwoPi));
    }
    v.am_rate = Uniform(rng, 2.0, 4.0);
    v.am_phase = Uniform(rng, 0.0, kTwoPi);
    pool.push_back(std::move(v));
  }
  return pool;
}

// Unit-RMS continuous signal of one voice.
std::vector<double> Render(const Voice& v, int64_t n) {
  std::vector<double> out(size_t(n), 0.0);
  for (size_t k = 0; k < v.freqs.size(); ++k) {
    const double w = kTwoPi * v.freqs[k] / audio::kSampleRate;
    for (int64_t i = 0; i < n; ++i) out[size_t(i)] += v.amps[k] * std::sin(w * double(i) + v.phases[k]);
  }
  double power = 0.0;
  for (double x : out) power += x * x;
  const double norm = power > 0 ? 1.0 / std::sqrt(power / double(n)) : 0.0;
  const double am_w = kTwoPi * v.am_rate / audio::kSampleRate;
  for (int64_t i = 0; i < n; ++i)
    out[size_t(i)] *= norm * (0.75 + 0.25 * std::sin(am_w * double(i) + v.am_phase));
  return out;
}

// Splits `total` cells into chunks no shorter than `min_len` with random
// lengths around `mean_len`.
std::vector<int64_t> Chunk(int64_t total, int64_t min_len, int64_t mean_len,
                           std::mt19937_64& rng) {
  if (total <= 0) return {};
  int64_t count = std::max<int64_t>(1, (total + mean_len / 2) / mean_len);
  while (count > 1 && count * min_len > total) --count;
  std::vector<int64_t> chunks(size_t(count), min_len);
  int64_t rest = total - count * min_len;
  if (count * min_len > total) {
    chunks[0] = total;
    rest = 0;
  }
  while (rest > 0) {
    const int64_t step = std::min<int64_t>(rest, UniformInt(rng, 1, 10));
    chunks[size_t(UniformInt(rng, 0, count - 1))] += step;
    rest -= step;
  }
  return chunks;
}

struct Region {
  int kind = 0;  // FrameClass
  int64_t cells = 0;
  std::vector<int> speakers;
};

void WriteText(const fs::path& path, const std::string& text) {
  cache::WriteFileAtomic(path, text);
}

std::string Split(int i) { return i == 0 ? "train" : (i == 1 ? "val" : "test"); }

}  // namespace

void FixtureOptions::Validate() const {
  if (!(overlap_ratio >= 0.0 && silence_ratio >= 0.0 && overlap_ratio + silence_ratio <= 1.0))
    throw ConfigError("fixtures: ratios must be non-negative and sum to at most 1");
  if (tags.empty()) throw ConfigError("fixtures: at least one dataset tag is required");
  if (train_recordings < 1 || val_recordings < 1 || test_recordings < 1)
    throw ConfigError("fixtures: every split needs at least one recording");
  if (!(recording_seconds >= 1.0)) throw ConfigError("fixtures: recordings must be >= 1 s");
  if (speakers_per_recording < 2 || speakers_per_recording > 4)
    throw ConfigError("fixtures: speakers_per_recording must be in [2, 4]");
  if (noise_clips < 1 || rir_count < 1) throw ConfigError("fixtures: need noise clips and RIRs");
}

uint64_t SubSeed(uint64_t seed, const std::string& label) {
  const std::string hex = Sha256Hex(std::to_string(seed) + ":" + label).substr(0, 16);
  return std::stoull(hex, nullptr, 16);
}

SynthRecording GenerateRecording(const std::string& recording_id, const std::string& tag,
                                 int tag_index, double seconds,
                                 const FixtureOptions& options) {
  std::mt19937_64 rng(SubSeed(options.seed, "rec:" + recording_id));
  const auto cells = static_cast<int64_t>(std::llround(seconds / kGridSeconds));
  const int64_t n = cells * kGridSamples;

  SynthRecording rec;
  rec.recording_id = recording_id;
  rec.tag = tag;
  rec.cells[annotations::kOverlap] = std::llround(options.overlap_ratio * double(cells));
  rec.cells[annotations::kSilence] = std::llround(options.silence_ratio * double(cells));
  rec.cells[annotations::kSingle] =
      cells - rec.cells[annotations::kOverlap] - rec.cells[annotations::kSilence];

  std::vector<Region> regions;
  const int64_t min_len[3] = {20, 40, 20};
  const int64_t mean_len[3] = {60, 150, 35};
  for (int kind = 0; kind < annotations::kNumClasses; ++kind)
    for (int64_t len : Chunk(rec.cells[kind], min_len[kind], mean_len[kind], rng))
      regions.push_back({kind, len, {}});
  std::shuffle(regions.begin(), regions.end(), rng);

  std::vector<Voice> pool = SpeakerPool(tag_index, options.seed);
  std::vector<int> present(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) present[i] = int(i);
  std::shuffle(present.begin(), present.end(), rng);
  present.resize(size_t(options.speakers_per_recording));
  // Overlap regions cycle through every speaker pair so each pairing is heard.
  std::vector<std::pair<int, int>> pairs;
  for (size_t i = 0; i < present.size(); ++i)
    for (size_t j = i + 1; j < present.size(); ++j) pairs.emplace_back(present[i], present[j]);
  size_t next_pair = size_t(UniformInt(rng, 0, int64_t(pairs.size()) - 1));
  for (auto& r : regions) {
    if (r.kind == annotations::kOverlap) {
      const auto [a, b] = pairs[next_pair++ % pairs.size()];
      r.speakers = {a, b};
      continue;
    }
    std::vector<int> pick = present;
    std::shuffle(pick.begin(), pick.end(), rng);
    r.speakers.assign(pick.begin(), pick.begin() + (r.kind == annotations::kSingle ? 1 : 0));
  }

  rec.audio.samples.assign(size_t(n), 0.0);
  rec.audio.source_id = recording_id;
  // Background floor so silence is not digital zero.
  const double floor_gain = tag_index % 2 ? 0.004 : 0.002;
  for (auto& s : rec.audio.samples) s = floor_gain * (2.0 * U01(rng) - 1.0);

  int64_t cursor = 0;
  std::vector<std::vector<double>> rendered(pool.size());
  for (const auto& r : regions) {
    for (int spk : r.speakers) {
      if (rendered[size_t(spk)].empty()) rendered[size_t(spk)] = Render(pool[size_t(spk)], n);
      const double g = Uniform(rng, 0.12, 0.3);
      const int64_t a = cursor * kGridSamples, b = (cursor + r.cells) * kGridSamples;
      const int64_t ramp = 32;
      for (int64_t i = a; i < b; ++i) {
        const double edge = std::min<double>({1.0, double(i - a + 1) / ramp, double(b - i) / ramp});
        rec.audio.samples[size_t(i)] += g * edge * rendered[size_t(spk)][size_t(i)];
      }
      rec.turns.push_back({recording_id, double(cursor) * kGridSeconds,
                           double(r.cells) * kGridSeconds, pool[size_t(spk)].id});
    }
    cursor += r.cells;
  }
  // Contiguous turns of one speaker become one turn, as a human annotator
  // would write them.
  std::stable_sort(rec.turns.begin(), rec.turns.end(), [](const SpeakerTurn& x, const SpeakerTurn& y) {
    return x.speaker_id != y.speaker_id ? x.speaker_id < y.speaker_id : x.onset < y.onset;
  });
  std::vector<SpeakerTurn> merged;
  for (const auto& t : rec.turns) {
    if (!merged.empty() && merged.back().speaker_id == t.speaker_id &&
        std::abs(merged.back().end() - t.onset) < 1e-9) {
      merged.back().duration = t.end() - merged.back().onset;
    } else {
      merged.push_back(t);
    }
  }
  for (auto& t : merged) {  // snap to the grid to keep RTTM text exact
    const double on = std::round(t.onset / kGridSeconds), end = std::round(t.end() / kGridSeconds);
    t.onset = on * kGridSeconds;
    t.duration = (end - on) * kGridSeconds;
  }
  std::sort(merged.begin(), merged.end(), [](const SpeakerTurn& x, const SpeakerTurn& y) {
    return x.onset != y.onset ? x.onset < y.onset : x.speaker_id < y.speaker_id;
  });
  rec.turns = std::move(merged);
  return rec;
}

std::vector<double> GenerateNoiseClip(int index, double seconds, uint64_t seed) {
  std::mt19937_64 rng(SubSeed(seed, "noise" + std::to_string(index)));
  const auto n = static_cast<size_t>(seconds * audio::kSampleRate);
  std::vector<double> out(n);
  double state = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double white = 2.0 * U01(rng) - 1.0;
    switch (index % 3) {
      case 0: out[i] = white; break;
      case 1: state = 0.98 * state + white; out[i] = state; break;  // brown-ish
      default: {
        const double t = double(i) / audio::kSampleRate;
        out[i] = 0.5 * std::sin(kTwoPi * 50.0 * t) + 0.3 * std::sin(kTwoPi * 150.0 * t) + 0.2 * white;
      }
    }
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  for (double& v : out) v *= 0.5 / peak;
  return out;
}

std::vector<double> GenerateRir(int index, uint64_t seed) {
  std::mt19937_64 rng(SubSeed(seed, "rir" + std::to_string(index)));
  const double rt60 = 0.15 + 0.15 * index;
  const auto n = static_cast<size_t>(0.25 * audio::kSampleRate);
  const auto direct = static_cast<size_t>(UniformInt(rng, 16, 64));
  std::vector<double> h(n, 0.0);
  h[direct] = 1.0;
  const double decay = 6.9078 / (rt60 * audio::kSampleRate);  // ln(1000)
  for (size_t i = direct + 1; i < n; ++i)
    h[i] = 0.3 * (2.0 * U01(rng) - 1.0) * std::exp(-decay * double(i - direct));
  return h;
}

FixtureSummary MakeFixtures(const fs::path& out, const FixtureOptions& options) {
  options.Validate();
  fs::create_directories(out / "audio");
  fs::create_directories(out / "rttm");
  fs::create_directories(out / "noise");
  fs::create_directories(out / "rir");

  FixtureSummary summary;
  KeyValueConfig& planted = summary.planted;
  planted.Set("seed", std::to_string(options.seed));
  planted.Set("overlap_ratio_requested", FormatDouble(options.overlap_ratio));
  planted.Set("class_coding", std::string(annotations::kClassCoding));
  std::array<int64_t, annotations::kNumClasses> all{};
  const int per_split[3] = {options.train_recordings, options.val_recordings,
                            options.test_recordings};
  for (int split = 0; split < 3; ++split) {
    annotations::SegmentManifest manifest;
    std::array<int64_t, annotations::kNumClasses> split_cells{};
    for (size_t tag = 0; tag < options.tags.size(); ++tag) {
      std::array<int64_t, annotations::kNumClasses> tag_cells{};
      for (int r = 0; r < per_split[split]; ++r) {
        char id[96];
        std::snprintf(id, sizeof(id), "%s_%s_%03d", options.tags[tag].c_str(),
                      Split(split).c_str(), r);
        SynthRecording rec = GenerateRecording(id, options.tags[tag], int(tag),
                                               options.recording_seconds, options);
        const std::string rel = "audio/" + std::string(id) + ".wav";
        audio::WriteWavPcm16((out / rel).string(), rec.audio.samples, audio::kSampleRate);
        WriteText(out / "rttm" / (std::string(id) + ".rttm"), annotations::FormatRttm(rec.turns));
        manifest.push_back({id, rel, 0, rec.audio.size(), id, options.tags[tag]});
        for (int c = 0; c < annotations::kNumClasses; ++c) tag_cells[c] += rec.cells[c];
        ++summary.recordings;
      }
      const std::string key = Split(split) + "." + options.tags[tag];
      planted.Set(key + ".overlap_frames", std::to_string(tag_cells[2]));
      planted.Set(key + ".total_frames",
                  std::to_string(tag_cells[0] + tag_cells[1] + tag_cells[2]));
      for (int c = 0; c < annotations::kNumClasses; ++c) split_cells[c] += tag_cells[c];
    }
    annotations::WriteManifest((out / (Split(split) + ".tsv")).string(), manifest);
    const int64_t total = split_cells[0] + split_cells[1] + split_cells[2];
    planted.Set(Split(split) + ".overlap_percent",
                FormatDouble(100.0 * double(split_cells[2]) / double(total)));
    for (int c = 0; c < annotations::kNumClasses; ++c) all[c] += split_cells[c];
  }
  const int64_t total = all[0] + all[1] + all[2];
  planted.Set("all.silence_frames", std::to_string(all[0]));
  planted.Set("all.single_frames", std::to_string(all[1]));
  planted.Set("all.overlap_frames", std::to_string(all[2]));
  planted.Set("all.overlap_percent", FormatDouble(100.0 * double(all[2]) / double(total)));

  annotations::SegmentManifest noise_manifest, rir_manifest;
  for (int i = 0; i < options.noise_clips; ++i) {
    const std::string id = "noise_" + std::to_string(i);
    const std::vector<double> clip = GenerateNoiseClip(i, 3.0, options.seed);
    audio::WriteWavPcm16((out / "noise" / (id + ".wav")).string(), clip, audio::kSampleRate);
    noise_manifest.push_back({id, "noise/" + id + ".wav", 0, int64_t(clip.size()), id, "noise"});
  }
  for (int i = 0; i < options.rir_count; ++i) {
    const std::string id = "rir_" + std::to_string(i);
    const std::vector<double> h = GenerateRir(i, options.seed);
    audio::WriteWavFloat32((out / "rir" / (id + ".wav")).string(), h, audio::kSampleRate);
    rir_manifest.push_back({id, "rir/" + id + ".wav", 0, int64_t(h.size()), id, "rir"});
  }
  annotations::WriteManifest((out / "noise.tsv").string(), noise_manifest);
  annotations::WriteManifest((out / "rir.tsv").string(), rir_manifest);

  std::string tags;
  for (const auto& t : options.tags) tags += (tags.empty() ? "" : ",") + t;
  const std::string recipe =
      "# Tiny Conformer on the synthetic fixture corpus.\n"
      "paths.train_manifest = train.tsv\n"
      "paths.val_manifest = val.tsv\n"
      "paths.test_manifest = test.tsv\n"
      "paths.rttm_dir = rttm\n"
      "paths.cache_dir = cache\n"
      "paths.checkpoint = model.ckpt\n"
      "paths.train_log = train_log.tsv\n"
      "paths.report = eval_report.tsv\n"
      "augment.noise_manifest = noise.tsv\n"
      "augment.rir_manifest = rir.tsv\n"
      "eval.required_tags = " + tags + "\n"
      "eval.system_name = CF-OSD-tiny\n"
      "model.family = CF\n"
      "model.strict = false\n"
      "model.dim = 16\n"
      "model.blocks = 1\n"
      "model.heads = 2\n"
      "model.ff_dim = 32\n"
      "model.conv_kernel = 7\n"
      "model.dropout = 0\n"
      "train.max_epochs = 80\n"
      "train.batch_size = 4\n"
      "augment.p_noise = 0\n"
      "augment.p_rir = 0\n";
  WriteText(out / "fixture.recipe", recipe);
  WriteText(out / "planted.txt", planted.ToString());
  return summary;
}

}  // namespace osd::fixtures
