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

#ifndef OSD_COMMANDS_H_
#define OSD_COMMANDS_H_

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "osd/annotations.h"
#include "osd/cache.h"
#include "osd/fixtures.h"
#include "osd/metrics_eval.h"
#include "osd/run_config.h"
#include "osd/train_loop.h"

namespace osd::cli {

// Runs fn(0..count-1) on up to `jobs` threads. The first exception (by index)
// is rethrown after all workers finish.
void ParallelFor(size_t count, int jobs, const std::function<void(size_t)>& fn);

struct PrepareResult {
  int segments_written = 0;
  int segments_skipped = 0;
  std::vector<std::string> failures;  // "recording: reason"
  std::vector<std::filesystem::path> segment_manifests;

  bool ok() const { return failures.empty(); }
};

// Cuts every recording of each input manifest into segments and caches their
// features and labels. Segments whose sources are unchanged are skipped.
// A recording that fails is reported and the rest are still processed.
PrepareResult Prepare(const RunConfig& config,
                      const std::vector<std::filesystem::path>& manifests,
                      const std::filesystem::path& rttm_dir,
                      const std::filesystem::path& cache_dir, int jobs,
                      std::ostream& log);

// A cached segment manifest: an explicit path, or a stem under the cache.
std::filesystem::path ResolveSegmentManifest(const std::string& name,
                                             const std::filesystem::path& cache_dir);

annotations::TaggedStats Stats(const std::filesystem::path& segment_manifest,
                               const cache::CacheLayout& cache);
// One row per dataset tag, then a total row.
std::string FormatStatsTable(const annotations::TaggedStats& stats);

// Cached examples of a segment manifest; every file must carry
// `feature_digest`. Returns examples in manifest order.
std::vector<train::Example> LoadExamples(
    const annotations::SegmentManifest& manifest, const cache::CacheLayout& cache,
    const std::string& feature_digest, int jobs);

struct TrainOutcome {
  train::TrainResult result;
  std::string log_text;
  std::filesystem::path checkpoint;
  double train_accuracy = 0.0;
};

TrainOutcome Train(const RunConfig& config, int jobs, std::ostream& log);

// Scores the cached test split with a checkpoint.
metrics::EvalReport Eval(const RunConfig& config,
                         const std::filesystem::path& checkpoint, int jobs);

// The cache's recorded feature digest, which must match the config's.
std::string CheckCacheDigest(const RunConfig& config,
                             const cache::CacheLayout& cache);

}  // namespace osd::cli

#endif  // OSD_COMMANDS_H_
