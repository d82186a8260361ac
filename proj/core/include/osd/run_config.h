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

#ifndef OSD_RUN_CONFIG_H_
#define OSD_RUN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "osd/audio_features.h"
#include "osd/kv_config.h"
#include "osd/metrics_eval.h"
#include "osd/model_zoo.h"
#include "osd/train_loop.h"

namespace osd::cli {

struct AudioSettings {
  bool downmix = false;
  bool allow_resample = false;
};

struct AugmentSettings {
  double p_noise = 0.5;
  double p_rir = 0.5;
  double snr_low_db = 5.0;
  double snr_high_db = 20.0;
  std::string noise_manifest;
  std::string rir_manifest;
  bool align_rir_peak = true;
  uint64_t seed = 0;

  bool active() const { return p_noise > 0.0 || p_rir > 0.0; }
};

struct PathSettings {
  std::string train_manifest;
  std::string val_manifest;
  std::string test_manifest;
  std::string rttm_dir;
  std::string cache_dir = "osd_cache";
  std::string checkpoint;
  std::string train_log;
  std::string report;
};

// Everything one invocation of the tool can be configured with. Keys are
// flat and dotted: feature.*, model.*, train.*, augment.*, eval.*, audio.*,
// paths.*.
struct RunConfig {
  audio::FeatureConfig feature;
  models::ModelConfig model;
  train::TrainConfig train;
  AugmentSettings augment;
  metrics::EvalOptions eval;
  AudioSettings audio;
  PathSettings paths;

  // Every accepted key. Anything else in a config file or override is a
  // ConfigError.
  static const std::set<std::string>& KnownKeys();
  static RunConfig FromKeyValues(const KeyValueConfig& kv);
  KeyValueConfig ToKeyValues() const;
  // Digest over every setting except paths.
  std::string Digest() const;
};

struct ConfigRequest {
  std::optional<std::filesystem::path> config_file;
  std::vector<std::string> overrides;  // "key=value"
  std::optional<uint64_t> seed;        // sets model, train and augment seeds
};

// Relative paths inside a config file resolve against the file's directory;
// relative paths given as overrides resolve against the working directory.
// OSD_CACHE_DIR, when set, replaces paths.cache_dir.
RunConfig LoadRunConfig(const ConfigRequest& request);

}  // namespace osd::cli

#endif  // OSD_RUN_CONFIG_H_
