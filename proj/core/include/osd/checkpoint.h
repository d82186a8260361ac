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

#ifndef OSD_CHECKPOINT_H_
#define OSD_CHECKPOINT_H_

#include <memory>
#include <string>

#include "osd/kv_config.h"
#include "osd/model_zoo.h"

namespace osd::models {

// On-disk layout:
//
//   OSDCKPT 1
//   key=value ...                  model.* config, digests, caller metadata
//   param <name> <rows> <cols>     one line per parameter, store order
//   end_header
//   <little-endian float64 blob, each parameter column-major>
//
// Loading rebuilds the model from the embedded config and refuses files whose
// parameter table does not match the rebuilt architecture.
inline constexpr int kCheckpointVersion = 1;

void SaveCheckpoint(const std::string& path, const OsdModel& model,
                    const KeyValueConfig& metadata = {});

struct LoadedCheckpoint {
  std::unique_ptr<OsdModel> model;
  KeyValueConfig metadata;  // everything from the header, model.* included
};

LoadedCheckpoint LoadCheckpoint(const std::string& path);

}  // namespace osd::models

#endif  // OSD_CHECKPOINT_H_
