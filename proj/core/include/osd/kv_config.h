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

#ifndef OSD_KV_CONFIG_H_
#define OSD_KV_CONFIG_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace osd {

// Flat "key = value" text format shared by recipes, cache headers, feature
// digests and checkpoints. Lines starting with '#' are comments.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig Parse(std::string_view text,
                              const std::string& origin = "<string>");
  static KeyValueConfig Load(const std::string& path);

  void Set(const std::string& key, const std::string& value);
  // Applies a "key=value" override as given on the command line.
  void SetAssignment(std::string_view assignment);
  void Merge(const KeyValueConfig& other);

  bool Has(const std::string& key) const;
  std::optional<std::string> Get(const std::string& key) const;
  std::string GetOr(const std::string& key, const std::string& fallback) const;

  // Canonical serialization: sorted "key=value" lines. Digests are taken over
  // this text so they do not depend on file formatting.
  std::string ToString() const;

  // Entries whose key starts with `prefix`, prefix kept.
  KeyValueConfig Section(std::string_view prefix) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::string, std::string> entries_;
};

// Typed value parsing; errors name the offending key.
double ParseDouble(std::string_view text, std::string_view key);
int64_t ParseInt(std::string_view text, std::string_view key);
bool ParseBool(std::string_view text, std::string_view key);

// Shortest text that round-trips a double exactly.
std::string FormatDouble(double v);

}  // namespace osd

#endif  // OSD_KV_CONFIG_H_
