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

#include "osd/wav.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "osd/error.h"

namespace osd::audio {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint32_t ReadLe32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}
uint16_t ReadLe16(const uint8_t* p) { return uint16_t(p[0] | p[1] << 8); }

void PutLe32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
void PutLe16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
}
void PutTag(std::vector<uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

double DecodeSample(const uint8_t* p, uint16_t format, int bits) {
  if (format == kFormatFloat) {
    if (bits == 32) {
      float f;
      uint32_t u = ReadLe32(p);
      std::memcpy(&f, &u, 4);
      return f;
    }
    uint64_t u = uint64_t(ReadLe32(p)) | uint64_t(ReadLe32(p + 4)) << 32;
    double d;
    std::memcpy(&d, &u, 8);
    return d;
  }
  switch (bits) {
    case 8:
      return (double(p[0]) - 128.0) / 128.0;
    case 16:
      return double(int16_t(ReadLe16(p))) / 32768.0;
    case 24: {
      int32_t v = int32_t(uint32_t(p[0]) << 8 | uint32_t(p[1]) << 16 |
                          uint32_t(p[2]) << 24) >> 8;
      return double(v) / 8388608.0;
    }
    default:
      return double(int32_t(ReadLe32(p))) / 2147483648.0;
  }
}

void WriteBytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path);
}

std::vector<uint8_t> Header(uint16_t format, int sample_rate, int channels,
                            int bits, uint32_t data_bytes) {
  std::vector<uint8_t> h;
  PutTag(h, "RIFF");
  PutLe32(h, 36 + data_bytes);
  PutTag(h, "WAVE");
  PutTag(h, "fmt ");
  PutLe32(h, 16);
  PutLe16(h, format);
  PutLe16(h, uint16_t(channels));
  PutLe32(h, uint32_t(sample_rate));
  PutLe32(h, uint32_t(sample_rate * channels * bits / 8));
  PutLe16(h, uint16_t(channels * bits / 8));
  PutLe16(h, uint16_t(bits));
  PutTag(h, "data");
  PutLe32(h, data_bytes);
  return h;
}

}  // namespace

WavData DecodeWav(std::span<const uint8_t> bytes, const std::string& origin) {
  auto corrupt = [&](const std::string& why) {
    return DataError(origin + ": corrupt WAV (" + why + ")");
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw corrupt("missing RIFF/WAVE header");

  uint16_t format = 0;
  int channels = 0, bits = 0, sample_rate = 0;
  bool have_fmt = false;
  const uint8_t* data = nullptr;
  size_t data_size = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* chunk = bytes.data() + pos;
    size_t size = ReadLe32(chunk + 4);
    size_t avail = bytes.size() - pos - 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || size > avail) throw corrupt("bad fmt chunk");
      format = ReadLe16(chunk + 8);
      channels = ReadLe16(chunk + 10);
      sample_rate = int(ReadLe32(chunk + 12));
      bits = ReadLe16(chunk + 22);
      if (format == kFormatExtensible) {
        if (size < 40) throw corrupt("short extensible fmt chunk");
        format = ReadLe16(chunk + 8 + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      // Some writers leave the size at 0xFFFFFFFF when streaming.
      data = chunk + 8;
      data_size = std::min(size, avail);
      break;
    }
    pos += 8 + size + (size & 1);
  }
  if (!have_fmt) throw corrupt("no fmt chunk");
  if (!data) throw corrupt("no data chunk");
  if (channels <= 0 || sample_rate <= 0) throw corrupt("bad channel count or rate");
  const bool int_ok = format == kFormatPcm &&
                      (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = format == kFormatFloat && (bits == 32 || bits == 64);
  if (!int_ok && !float_ok)
    throw DataError(origin + ": unsupported WAV encoding (format " +
                    std::to_string(format) + ", " + std::to_string(bits) +
                    " bits)");

  WavData wav;
  wav.sample_rate = sample_rate;
  wav.channels = channels;
  const size_t width = size_t(bits) / 8;
  const size_t count = data_size / width;
  wav.interleaved.resize(count - count % size_t(channels));
  for (size_t i = 0; i < wav.interleaved.size(); ++i)
    wav.interleaved[i] = DecodeSample(data + i * width, format, bits);
  return wav;
}

WavData ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return DecodeWav(bytes, path);
}

void WriteWavPcm16(const std::string& path, std::span<const double> interleaved,
                   int sample_rate, int channels) {
  const auto data_bytes = uint32_t(interleaved.size() * 2);
  std::vector<uint8_t> bytes = Header(kFormatPcm, sample_rate, channels, 16,
                                      data_bytes);
  bytes.reserve(bytes.size() + data_bytes);
  for (double x : interleaved) {
    double scaled = std::nearbyint(std::clamp(x, -1.0, 1.0) * 32767.0);
    PutLe16(bytes, uint16_t(int16_t(scaled)));
  }
  WriteBytes(path, bytes);
}

void WriteWavFloat32(const std::string& path,
                     std::span<const double> interleaved, int sample_rate,
                     int channels) {
  const auto data_bytes = uint32_t(interleaved.size() * 4);
  std::vector<uint8_t> bytes = Header(kFormatFloat, sample_rate, channels, 32,
                                      data_bytes);
  for (double x : interleaved)
    PutLe32(bytes, std::bit_cast<uint32_t>(static_cast<float>(x)));
  WriteBytes(path, bytes);
}

}  // namespace osd::audio
