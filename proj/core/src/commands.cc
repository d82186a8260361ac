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

#include "osd/commands.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "osd/augment.h"
#include "osd/checkpoint.h"
#include "osd/digest.h"
#include "osd/error.h"

namespace osd::cli {
namespace fs = std::filesystem;
using annotations::ManifestRecord;
using annotations::SegmentManifest;

namespace {

fs::path ResolveAgainst(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return (p.is_relative() ? base / p : p).lexically_normal();
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

struct RecordingOutcome {
  std::vector<ManifestRecord> segments;
  int written = 0;
  int skipped = 0;
  std::string failure;
};

RecordingOutcome PrepareRecording(const RunConfig& config, const ManifestRecord& rec,
                                  const fs::path& manifest_dir, const fs::path& rttm_dir,
                                  const cache::CacheLayout& cache,
                                  const audio::FbankComputer& fbank,
                                  const std::string& feature_digest) {
  RecordingOutcome out;
  const fs::path audio_path = ResolveAgainst(manifest_dir, rec.audio_path);
  const fs::path rttm_path = rttm_dir / (rec.recording_id + ".rttm");
  if (!fs::exists(audio_path)) throw DataError("audio not found: " + audio_path.string());
  if (!fs::exists(rttm_path)) throw DataError("RTTM not found: " + rttm_path.string());

  const std::string audio_sha = FileSha256Hex(audio_path.string());
  const std::string rttm_sha = FileSha256Hex(rttm_path.string());
  audio::AudioClip clip;
  bool loaded = false;
  std::vector<annotations::SpeakerTurn> turns;
  auto load = [&] {
    if (loaded) return;
    clip = audio::LoadAudio(audio_path.string(), {config.audio.downmix, config.audio.allow_resample});
    if (rec.end_sample > clip.size())
      throw DataError(rec.segment_id + ": span ends at sample " + std::to_string(rec.end_sample) +
                      " but the audio has " + std::to_string(clip.size()));
    for (auto& t : annotations::ParseRttm(rttm_path.string()))
      if (t.recording_id == rec.recording_id) turns.push_back(std::move(t));
    loaded = true;
  };

  // The span layout follows from the manifest alone, so unchanged segments can
  // be skipped without decoding audio.
  audio::AudioClip shape;
  shape.samples.resize(size_t(rec.end_sample - rec.start_sample));
  const auto spans = audio::Segment(shape, config.feature.segment_seconds);
  for (size_t i = 0; i < spans.size(); ++i) {
    audio::SegmentSpan span = spans[i];
    span.segment_id = audio::SegmentId(rec.recording_id, int(i));
    span.start += rec.start_sample;
    span.end += rec.start_sample;
    if (audio::ValidFramesForSpan(span.size(), config.feature) == 0) continue;

    const std::string source = ShortDigest(audio_sha + "\n" + rttm_sha + "\n" + span.segment_id +
                                           "\n" + std::to_string(span.start) + "\n" +
                                           std::to_string(span.end) + "\n" + feature_digest);
    out.segments.push_back({span.segment_id, audio_path.string(), span.start, span.end,
                            rec.recording_id, rec.dataset_tag});
    const fs::path feat_path = cache.FeaturePath(span.segment_id);
    const fs::path lab_path = cache.LabelPath(span.segment_id);
    if (cache::PeekHeader(feat_path).GetOr("source_digest", "") == source &&
        cache::PeekHeader(lab_path).GetOr("source_digest", "") == source) {
      ++out.skipped;
      continue;
    }
    load();
    const std::span<const double> samples(clip.samples.data() + span.start, size_t(span.size()));
    audio::FeatureMatrix feats = fbank.ComputeSegment(samples, span.segment_id);
    annotations::FrameLabels labels = annotations::RasterizeLabels(turns, span, config.feature);
    KeyValueConfig extra;
    extra.Set("source_digest", source);
    extra.Set("feature_digest", feature_digest);
    extra.Set("recording_id", rec.recording_id);
    extra.Set("dataset_tag", rec.dataset_tag);
    cache::WriteFeatures(feat_path, feats, extra);
    cache::WriteLabels(lab_path, labels, extra);
    ++out.written;
  }
  return out;
}

std::vector<audio::AudioClip> LoadCorpus(const std::string& manifest_path,
                                         const RunConfig& config) {
  std::vector<audio::AudioClip> clips;
  if (manifest_path.empty()) return clips;
  const SegmentManifest m = annotations::ReadManifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  for (const auto& r : m) {
    audio::AudioClip full = audio::LoadAudio(ResolveAgainst(base, r.audio_path).string(),
                                             {config.audio.downmix, config.audio.allow_resample});
    const int64_t end = std::min<int64_t>(r.end_sample, full.size());
    if (r.start_sample >= end) throw DataError(manifest_path + ": empty span for " + r.segment_id);
    audio::AudioClip clip;
    clip.source_id = r.segment_id;
    clip.samples.assign(full.samples.begin() + r.start_sample, full.samples.begin() + end);
    clips.push_back(std::move(clip));
  }
  return clips;
}

std::string Stem(const std::string& manifest_path) {
  return fs::path(manifest_path).stem().string();
}

SegmentManifest ReadSplit(const RunConfig& config, const cache::CacheLayout& cache,
                          const std::string& manifest_path, const char* role) {
  if (manifest_path.empty()) throw ConfigError(std::string("paths.") + role + "_manifest is not set");
  const fs::path path = cache.SegmentManifestPath(Stem(manifest_path));
  if (!fs::exists(path))
    throw DataError("no prepared segments for " + manifest_path + " (expected " + path.string() +
                    "); run prepare first");
  (void)config;
  return annotations::ReadManifest(path.string());
}

}  // namespace

void ParallelFor(size_t count, int jobs, const std::function<void(size_t)>& fn) {
  const size_t workers = std::min<size_t>(count, size_t(std::max(1, jobs)));
  std::vector<std::exception_ptr> errors(count);
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

PrepareResult Prepare(const RunConfig& config, const std::vector<fs::path>& manifests,
                      const fs::path& rttm_dir, const fs::path& cache_dir, int jobs,
                      std::ostream& log) {
  if (manifests.empty()) throw ConfigError("prepare: no manifests given");
  if (rttm_dir.empty()) throw ConfigError("prepare: no RTTM directory (paths.rttm_dir)");
  config.feature.Validate();
  const cache::CacheLayout cache(cache_dir);
  fs::create_directories(cache_dir);
  const std::string feature_digest = config.feature.Digest();
  cache.WriteFeatureConfig(config.feature);
  const audio::FbankComputer fbank(config.feature);

  PrepareResult result;
  for (const auto& manifest_path : manifests) {
    const SegmentManifest recordings = annotations::ReadManifest(manifest_path.string());
    if (recordings.empty()) throw DataError(manifest_path.string() + ": manifest has no records");
    annotations::ValidateManifest(recordings);
    const fs::path manifest_dir = fs::absolute(manifest_path).parent_path();
    std::vector<RecordingOutcome> outcomes(recordings.size());
    ParallelFor(recordings.size(), jobs, [&](size_t i) {
      try {
        outcomes[i] = PrepareRecording(config, recordings[i], manifest_dir, rttm_dir, cache,
                                       fbank, feature_digest);
      } catch (const std::exception& e) {
        outcomes[i] = {};
        outcomes[i].failure = e.what();
      }
    });
    SegmentManifest segments;
    for (size_t i = 0; i < recordings.size(); ++i) {
      const auto& o = outcomes[i];
      if (!o.failure.empty()) {
        result.failures.push_back(recordings[i].recording_id + ": " + o.failure);
        log << "error\t" << recordings[i].recording_id << "\t" << o.failure << "\n";
        continue;
      }
      segments.insert(segments.end(), o.segments.begin(), o.segments.end());
      result.segments_written += o.written;
      result.segments_skipped += o.skipped;
    }
    const fs::path out = cache.SegmentManifestPath(manifest_path.stem().string());
    const std::string text = annotations::FormatManifest(segments);
    if (!fs::exists(out) || cache::ReadFileBytes(out) != text) cache::WriteFileAtomic(out, text);
    result.segment_manifests.push_back(out);
    log << "prepared\t" << manifest_path.string() << "\tsegments=" << segments.size()
        << "\n";
  }
  log << "written=" << result.segments_written << "\tskipped=" << result.segments_skipped
      << "\tfailed=" << result.failures.size() << "\n";
  return result;
}

fs::path ResolveSegmentManifest(const std::string& name, const fs::path& cache_dir) {
  if (fs::exists(name) && fs::is_regular_file(name)) {
    // A recording manifest maps to the prepared segments of the same stem.
    const fs::path p(name);
    if (p.filename().string().find(".segments.") == std::string::npos) {
      const fs::path prepared = cache::CacheLayout(cache_dir).SegmentManifestPath(p.stem().string());
      if (fs::exists(prepared)) return prepared;
    }
    return p;
  }
  const fs::path prepared = cache::CacheLayout(cache_dir).SegmentManifestPath(name);
  if (fs::exists(prepared)) return prepared;
  throw DataError("manifest not found: " + name);
}

annotations::TaggedStats Stats(const fs::path& segment_manifest, const cache::CacheLayout& cache) {
  const SegmentManifest manifest = annotations::ReadManifest(segment_manifest.string());
  std::map<std::string, annotations::FrameLabels> labels;
  for (const auto& r : manifest) {
    const fs::path p = cache.LabelPath(r.segment_id);
    if (!fs::exists(p)) throw DataError("no cached labels for segment " + r.segment_id);
    labels[r.segment_id] = cache::ReadLabels(p).labels;
  }
  return annotations::ComputeStatsByTag(manifest, labels);
}

std::string FormatStatsTable(const annotations::TaggedStats& stats) {
  std::ostringstream os;
  size_t width = 7;
  for (const auto& [tag, s] : stats.by_tag) width = std::max(width, tag.size());
  auto row = [&](const std::string& name, const annotations::DatasetStats& s) {
    os << name << std::string(width - name.size(), ' ') << "  " << Fixed(s.total_hours, 4)
       << "  " << Fixed(s.silence_hours, 4) << "  " << Fixed(s.single_hours, 4) << "  "
       << Fixed(s.overlap_hours, 4) << "  " << Fixed(s.overlap_percent, 2) << "\n";
  };
  os << "Dataset" << std::string(width - 7, ' ')
     << "  #Hours  Silence  Single  Overlap  %Overlap\n";
  for (const auto& [tag, s] : stats.by_tag) row(tag, s);
  row("Total", stats.total);
  return os.str();
}

std::string CheckCacheDigest(const RunConfig& config, const cache::CacheLayout& cache) {
  const std::string cached = cache.ReadFeatureConfig().GetOr("feature.digest", "");
  const std::string wanted = config.feature.Digest();
  if (cached != wanted)
    throw ConfigError("feature digest mismatch: cache " + cache.root().string() + " has " +
                      cached + ", config wants " + wanted);
  return wanted;
}

std::vector<train::Example> LoadExamples(const SegmentManifest& manifest,
                                         const cache::CacheLayout& cache,
                                         const std::string& feature_digest, int jobs) {
  std::vector<train::Example> out(manifest.size());
  ParallelFor(manifest.size(), jobs, [&](size_t i) {
    const auto& r = manifest[i];
    cache::FeatureFile f = cache::ReadFeatures(cache.FeaturePath(r.segment_id));
    cache::LabelFile l = cache::ReadLabels(cache.LabelPath(r.segment_id));
    if (f.header.GetOr("feature_digest", "") != feature_digest)
      throw ConfigError("feature digest mismatch in cached segment " + r.segment_id);
    if (f.features.frame_count() != l.labels.size() ||
        f.features.valid_frames != l.labels.valid_frames)
      throw DataError("features and labels disagree on frame counts for " + r.segment_id);
    out[i] = {std::move(f.features), std::move(l.labels)};
  });
  return out;
}

TrainOutcome Train(const RunConfig& config, int jobs, std::ostream& log) {
  const cache::CacheLayout cache(config.paths.cache_dir);
  const std::string feature_digest = CheckCacheDigest(config, cache);
  const SegmentManifest train_m = ReadSplit(config, cache, config.paths.train_manifest, "train");
  const SegmentManifest val_m = ReadSplit(config, cache, config.paths.val_manifest, "val");
  const std::vector<train::Example> train_set = LoadExamples(train_m, cache, feature_digest, jobs);
  const std::vector<train::Example> val_set = LoadExamples(val_m, cache, feature_digest, jobs);
  if (config.model.input_dim != config.feature.mel_bins)
    throw ConfigError("model.input_dim differs from feature.mel_bins");

  std::map<std::string, annotations::FrameLabels> labels;
  for (const auto& ex : train_set) labels[ex.labels.segment_id] = ex.labels;
  const annotations::DatasetStats stats = annotations::ComputeDatasetStats(train_m, labels);
  const train::ClassWeights weights =
      train::DeriveWeights(stats, config.train.weights_mode, config.train.explicit_weights,
                           config.train.zero_class_weight);

  auto model = models::BuildModel(config.model);
  train::Trainer trainer(*model, config.train, weights);

  // Augmentation re-synthesises features from the segment audio each step.
  train::FeatureSource source;
  augment::AugmentPolicy policy;
  std::map<std::string, audio::AudioClip> audio_cache;
  std::unique_ptr<audio::FbankComputer> fbank;
  if (config.augment.active()) {
    policy.p_noise = config.augment.p_noise;
    policy.p_rir = config.augment.p_rir;
    policy.snr_low_db = config.augment.snr_low_db;
    policy.snr_high_db = config.augment.snr_high_db;
    policy.align_rir_peak = config.augment.align_rir_peak;
    policy.seed = config.augment.seed;
    policy.noise_corpus = LoadCorpus(config.augment.noise_manifest, config);
    for (auto& c : LoadCorpus(config.augment.rir_manifest, config))
      policy.rir_corpus.push_back(std::move(c.samples));
    policy.Validate();
    fbank = std::make_unique<audio::FbankComputer>(config.feature);
    source = [&](size_t index, std::mt19937_64& rng,
                 audio::FeatureMatrix& scratch) -> const audio::FeatureMatrix& {
      const ManifestRecord& r = train_m[index];
      auto it = audio_cache.find(r.audio_path);
      if (it == audio_cache.end())
        it = audio_cache
                 .emplace(r.audio_path, audio::LoadAudio(r.audio_path, {config.audio.downmix,
                                                                         config.audio.allow_resample}))
                 .first;
      augment::LabeledAudio seg;
      seg.audio.samples.assign(it->second.samples.begin() + r.start_sample,
                               it->second.samples.begin() + r.end_sample);
      seg.labels = train_set[index].labels;
      std::mt19937_64 step_rng(rng() ^ policy.seed);
      auto out = augment::AugmentBatch(std::span(&seg, 1), policy, step_rng);
      scratch = fbank->ComputeSegment(out[0].audio.samples, r.segment_id);
      return scratch;
    };
  }

  log << "train\tsegments=" << train_set.size() << "\tval_segments=" << val_set.size()
      << "\tparams=" << model->ParamCount() << "\tweights=" << weights.ToString() << "\n";
  TrainOutcome outcome;
  outcome.result = trainer.Fit(train_set, val_set, source);
  outcome.train_accuracy = trainer.FrameAccuracy(train_set);

  KeyValueConfig meta;
  meta.Set("feature.digest", feature_digest);
  meta.Set("config.digest", config.Digest());
  meta.Set("train.class_weights", weights.ToString());
  meta.Set("train.best_epoch", std::to_string(outcome.result.best_epoch));
  meta.Set("train.stop_reason", train::StopReasonName(outcome.result.stop_reason));
  meta.Merge(config.feature.ToKeyValues());

  KeyValueConfig extra;
  extra.Set("config_digest", config.Digest());
  extra.Set("feature_digest", feature_digest);
  extra.Set("arch_digest", config.model.ArchitectureDigest());
  extra.Set("weights_mode", train::WeightsModeName(config.train.weights_mode));
  extra.Set("param_count", std::to_string(model->ParamCount()));
  outcome.log_text = train::FormatTrainingLog(outcome.result, extra);
  if (!config.paths.train_log.empty())
    cache::WriteFileAtomic(config.paths.train_log, outcome.log_text);

  outcome.checkpoint = config.paths.checkpoint.empty()
                           ? fs::path(config.paths.cache_dir) / "model.ckpt"
                           : fs::path(config.paths.checkpoint);
  if (outcome.checkpoint.has_parent_path()) fs::create_directories(outcome.checkpoint.parent_path());
  models::SaveCheckpoint(outcome.checkpoint.string(), *model, meta);
  log << outcome.log_text;
  log << "checkpoint\t" << outcome.checkpoint.string() << "\ttrain_accuracy="
      << FormatDouble(outcome.train_accuracy) << "\n";
  return outcome;
}

metrics::EvalReport Eval(const RunConfig& config, const fs::path& checkpoint, int jobs) {
  const cache::CacheLayout cache(config.paths.cache_dir);
  const std::string feature_digest = CheckCacheDigest(config, cache);
  if (!fs::exists(checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint.string());
  models::LoadedCheckpoint ckpt = models::LoadCheckpoint(checkpoint.string());
  const std::string ckpt_features = ckpt.metadata.GetOr("feature.digest", "");
  if (ckpt_features != feature_digest)
    throw ConfigError("feature digest mismatch: checkpoint was trained on " + ckpt_features +
                      ", cache and config use " + feature_digest);
  const std::string arch = ckpt.model->config().ArchitectureDigest();
  if (arch != config.model.ArchitectureDigest())
    throw ConfigError("model architecture digest mismatch between config and checkpoint");

  const SegmentManifest test_m = ReadSplit(config, cache, config.paths.test_manifest, "test");
  const std::vector<train::Example> examples = LoadExamples(test_m, cache, feature_digest, jobs);
  std::vector<metrics::EvalItem> items;
  items.reserve(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) items.push_back({test_m[i].dataset_tag, examples[i].labels});

  std::vector<std::vector<uint8_t>> decisions(examples.size());
  const models::OsdModel& model = *ckpt.model;
  ParallelFor(examples.size(), jobs, [&](size_t i) {
    decisions[i] = metrics::ArgmaxLabels(model.Predict(examples[i].features).logits);
  });
  metrics::EvalReport report = metrics::ScoreDecisions(items, decisions, config.eval);
  report.digests.Set("digest.feature", feature_digest);
  report.digests.Set("digest.arch", arch);
  report.digests.Set("digest.config", config.Digest());
  report.digests.Set("digest.checkpoint", FileSha256Hex(checkpoint.string()).substr(0, 16));
  if (!config.paths.report.empty())
    cache::WriteFileAtomic(config.paths.report, report.FormatRecords());
  return report;
}

}  // namespace osd::cli
