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

#include "osd/run_config.h"

#include <cstdlib>

#include "osd/digest.h"
#include "osd/error.h"

namespace osd::cli {
namespace fs = std::filesystem;
namespace {

const char* const kPathKeys[] = {
    "paths.train_manifest", "paths.val_manifest", "paths.test_manifest",
    "paths.rttm_dir",       "paths.cache_dir",    "paths.checkpoint",
    "paths.train_log",      "paths.report",       "augment.noise_manifest",
    "augment.rir_manifest",
};

bool IsPathKey(const std::string& key) {
  for (const char* k : kPathKeys)
    if (key == k) return true;
  return false;
}

void ResolvePaths(KeyValueConfig& kv, const fs::path& base) {
  const KeyValueConfig original = kv;
  for (const auto& [key, value] : original.entries()) {
    if (!IsPathKey(key) || value.empty()) continue;
    fs::path p(value);
    if (p.is_relative()) p = base / p;
    kv.Set(key, p.lexically_normal().string());
  }
}

void CheckKeys(const KeyValueConfig& kv, const std::string& origin) {
  const auto& known = RunConfig::KnownKeys();
  for (const auto& [key, value] : kv.entries())
    if (!known.count(key)) throw ConfigError(origin + ": unknown key '" + key + "'");
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= text.size()) {
    const size_t comma = text.find(',', start);
    const std::string item =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

const std::set<std::string>& RunConfig::KnownKeys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k;
    const KeyValueConfig defaults = RunConfig{}.ToKeyValues();
    for (const auto& [key, v] : defaults.entries()) k.insert(key);
    k.insert("train.zero_class_weight");
    return k;
  }();
  return keys;
}

RunConfig RunConfig::FromKeyValues(const KeyValueConfig& kv) {
  CheckKeys(kv, "config");
  RunConfig c;
  c.feature = audio::FeatureConfig::FromKeyValues(kv);
  c.model = models::ModelConfig::FromKeyValues(kv);
  c.train = train::TrainConfig::FromKeyValues(kv);

  auto num = [&](const char* key, double& dst) {
    if (auto v = kv.Get(key)) dst = ParseDouble(*v, key);
  };
  auto integer = [&](const char* key, int& dst) {
    if (auto v = kv.Get(key)) dst = static_cast<int>(ParseInt(*v, key));
  };
  auto flag = [&](const char* key, bool& dst) {
    if (auto v = kv.Get(key)) dst = ParseBool(*v, key);
  };
  auto text = [&](const char* key, std::string& dst) {
    if (auto v = kv.Get(key)) dst = *v;
  };
  num("augment.p_noise", c.augment.p_noise);
  num("augment.p_rir", c.augment.p_rir);
  num("augment.snr_low", c.augment.snr_low_db);
  num("augment.snr_high", c.augment.snr_high_db);
  text("augment.noise_manifest", c.augment.noise_manifest);
  text("augment.rir_manifest", c.augment.rir_manifest);
  flag("augment.align_rir_peak", c.augment.align_rir_peak);
  if (auto v = kv.Get("augment.seed"))
    c.augment.seed = static_cast<uint64_t>(ParseInt(*v, "augment.seed"));
  if (!(c.augment.p_noise >= 0 && c.augment.p_noise <= 1 && c.augment.p_rir >= 0 &&
        c.augment.p_rir <= 1))
    throw ConfigError("augment probabilities must be in [0, 1]");
  if (!(c.augment.snr_low_db <= c.augment.snr_high_db))
    throw ConfigError("augment.snr_low must not exceed augment.snr_high");

  integer("eval.median_width", c.eval.median_width);
  integer("eval.collar_frames", c.eval.collar_frames);
  text("eval.system_name", c.eval.system_name);
  if (auto v = kv.Get("eval.required_tags")) c.eval.required_tags = SplitList(*v);
  if (c.eval.median_width < 1 || c.eval.median_width % 2 == 0)
    throw ConfigError("eval.median_width must be a positive odd number");
  if (c.eval.collar_frames < 0) throw ConfigError("eval.collar_frames must be >= 0");

  flag("audio.downmix", c.audio.downmix);
  flag("audio.allow_resample", c.audio.allow_resample);

  text("paths.train_manifest", c.paths.train_manifest);
  text("paths.val_manifest", c.paths.val_manifest);
  text("paths.test_manifest", c.paths.test_manifest);
  text("paths.rttm_dir", c.paths.rttm_dir);
  text("paths.cache_dir", c.paths.cache_dir);
  text("paths.checkpoint", c.paths.checkpoint);
  text("paths.train_log", c.paths.train_log);
  text("paths.report", c.paths.report);

  c.feature.Validate();
  c.model.Validate();
  return c;
}

KeyValueConfig RunConfig::ToKeyValues() const {
  KeyValueConfig kv = feature.ToKeyValues();
  kv.Merge(model.ToKeyValues());
  kv.Merge(train.ToKeyValues());
  kv.Set("augment.p_noise", FormatDouble(augment.p_noise));
  kv.Set("augment.p_rir", FormatDouble(augment.p_rir));
  kv.Set("augment.snr_low", FormatDouble(augment.snr_low_db));
  kv.Set("augment.snr_high", FormatDouble(augment.snr_high_db));
  kv.Set("augment.noise_manifest", augment.noise_manifest);
  kv.Set("augment.rir_manifest", augment.rir_manifest);
  kv.Set("augment.align_rir_peak", augment.align_rir_peak ? "true" : "false");
  kv.Set("augment.seed", std::to_string(augment.seed));
  kv.Set("eval.median_width", std::to_string(eval.median_width));
  kv.Set("eval.collar_frames", std::to_string(eval.collar_frames));
  kv.Set("eval.system_name", eval.system_name);
  std::string tags;
  for (const auto& t : eval.required_tags) tags += (tags.empty() ? "" : ",") + t;
  kv.Set("eval.required_tags", tags);
  kv.Set("audio.downmix", audio.downmix ? "true" : "false");
  kv.Set("audio.allow_resample", audio.allow_resample ? "true" : "false");
  kv.Set("paths.train_manifest", paths.train_manifest);
  kv.Set("paths.val_manifest", paths.val_manifest);
  kv.Set("paths.test_manifest", paths.test_manifest);
  kv.Set("paths.rttm_dir", paths.rttm_dir);
  kv.Set("paths.cache_dir", paths.cache_dir);
  kv.Set("paths.checkpoint", paths.checkpoint);
  kv.Set("paths.train_log", paths.train_log);
  kv.Set("paths.report", paths.report);
  return kv;
}

std::string RunConfig::Digest() const {
  KeyValueConfig kv;
  const KeyValueConfig all = ToKeyValues();
  for (const auto& [k, v] : all.entries())
    if (k.rfind("paths.", 0) != 0 && !IsPathKey(k)) kv.Set(k, v);
  return ShortDigest(kv.ToString());
}

RunConfig LoadRunConfig(const ConfigRequest& request) {
  KeyValueConfig kv;
  if (request.config_file) {
    const fs::path file = *request.config_file;
    if (!fs::exists(file)) throw ConfigError("config file not found: " + file.string());
    kv = KeyValueConfig::Load(file.string());
    CheckKeys(kv, file.string());
    ResolvePaths(kv, fs::absolute(file).parent_path());
  }
  KeyValueConfig overrides;
  for (const auto& a : request.overrides) overrides.SetAssignment(a);
  CheckKeys(overrides, "--set");
  ResolvePaths(overrides, fs::current_path());
  kv.Merge(overrides);
  if (request.seed) {
    const std::string s = std::to_string(*request.seed);
    kv.Set("model.seed", s);
    kv.Set("train.seed", s);
    kv.Set("augment.seed", s);
  }
  if (const char* env = std::getenv("OSD_CACHE_DIR"); env && *env)
    kv.Set("paths.cache_dir", fs::absolute(env).lexically_normal().string());
  else if (!kv.Has("paths.cache_dir"))
    kv.Set("paths.cache_dir", fs::absolute(PathSettings{}.cache_dir).string());
  return RunConfig::FromKeyValues(kv);
}

}  // namespace osd::cli
