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

#ifndef OSD_DIGEST_H_
#define OSD_DIGEST_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace osd {

/// Lowercase hex SHA-256 of a byte string.
std::string Sha256Hex(std::string_view bytes);
std::string Sha256Hex(std::span<const std::byte> bytes);

/// SHA-256 of a file's full contents; throws DataError if unreadable.
std::string FileSha256Hex(const std::string& path);

/// The first 16 hex characters of Sha256Hex, used as a short config digest.
std::string ShortDigest(std::string_view text);

}  // namespace osd

#endif  // OSD_DIGEST_H_
