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

#include "osd/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "osd/error.h"

namespace osd::models {

void SaveCheckpoint(const std::string& path, const OsdModel& model,
                    const KeyValueConfig& metadata) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint blobs are written in host order");
  KeyValueConfig header = metadata;
  header.Merge(model.config().ToKeyValues());
  header.Set("checkpoint.arch_digest", model.config().ArchitectureDigest());
  header.Set("checkpoint.param_count", std::to_string(model.ParamCount()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << "OSDCKPT " << kCheckpointVersion << '\n' << header.ToString();
  for (const auto& p : model.params().all())
    out << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
  out << "end_header\n";
  for (const auto& p : model.params().all())
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  if (!out) throw DataError("short write to checkpoint " + path);
}

LoadedCheckpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != "OSDCKPT " + std::to_string(kCheckpointVersion))
    throw DataError(path + ": not a version " + std::to_string(kCheckpointVersion) +
                    " checkpoint");

  std::string kv_text;
  struct Entry {
    std::string name;
    long rows, cols;
  };
  std::vector<Entry> table;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      terminated = true;
      break;
    }
    if (line.rfind("param ", 0) == 0) {
      std::istringstream ss(line.substr(6));
      Entry e;
      if (!(ss >> e.name >> e.rows >> e.cols)) throw DataError(path + ": bad param line");
      table.push_back(e);
    } else {
      kv_text += line + '\n';
    }
  }
  if (!terminated) throw DataError(path + ": truncated header");

  LoadedCheckpoint loaded;
  loaded.metadata = KeyValueConfig::Parse(kv_text, path);
  const ModelConfig config = ModelConfig::FromKeyValues(loaded.metadata);
  if (loaded.metadata.GetOr("checkpoint.arch_digest", "") != config.ArchitectureDigest())
    throw ConfigError(path + ": architecture digest does not match embedded config");
  loaded.model = BuildModel(config);

  auto& params = loaded.model->params().all();
  if (params.size() != table.size())
    throw ConfigError(path + ": parameter table has " + std::to_string(table.size()) +
                      " entries, architecture expects " + std::to_string(params.size()));
  for (size_t i = 0; i < table.size(); ++i) {
    auto& p = params[i];
    if (p.name != table[i].name || p.value.rows() != table[i].rows ||
        p.value.cols() != table[i].cols)
      throw ConfigError(path + ": parameter '" + table[i].name +
                        "' does not match architecture");
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!in) throw DataError(path + ": truncated parameter blob");
  }
  return loaded;
}

}  // namespace osd::models
