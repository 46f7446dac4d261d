// dsr/wav.cc

// Copyright 2026  The DSR Toolkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dsr/wav.h"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace dsr {

namespace {

void put_u32(std::string* s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string* s, uint16_t v) {
  for (int i = 0; i < 2; ++i) s->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
uint32_t get_u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t get_u16(const unsigned char* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }

}  // namespace

void write_wav(const std::string& path, const Waveform& x, int sample_rate) {
  const uint32_t n = static_cast<uint32_t>(x.size());
  const uint32_t data_bytes = n * 2;
  std::string s;
  s.reserve(44 + data_bytes);
  s += "RIFF";
  put_u32(&s, 36 + data_bytes);
  s += "WAVEfmt ";
  put_u32(&s, 16);
  put_u16(&s, 1);  // PCM
  put_u16(&s, 1);  // mono
  put_u32(&s, static_cast<uint32_t>(sample_rate));
  put_u32(&s, static_cast<uint32_t>(sample_rate) * 2);
  put_u16(&s, 2);
  put_u16(&s, 16);
  s += "data";
  put_u32(&s, data_bytes);
  for (double v : x) {
    double c = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
    auto q = static_cast<int32_t>(std::lround(c * 32767.0));
    if (q > 32767) q = 32767;
    if (q < -32768) q = -32768;
    put_u16(&s, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  write_text_file(path, s);
}

Waveform read_wav(const std::string& path, int* sample_rate) {
  std::string bytes = read_text_file(path);
  DSR_REQUIRE(bytes.size() >= 44, path << ": too short for a WAV file");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  DSR_REQUIRE(std::memcmp(p, "RIFF", 4) == 0 && std::memcmp(p + 8, "WAVE", 4) == 0,
              path << ": not a RIFF/WAVE file");
  size_t off = 12;
  int channels = 0, bits = 0, rate = 0;
  size_t data_off = 0, data_len = 0;
  while (off + 8 <= bytes.size()) {
    const char* id = bytes.data() + off;
    uint32_t len = get_u32(p + off + 4);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      DSR_REQUIRE(len >= 16, path << ": bad fmt chunk");
      uint16_t fmt = get_u16(p + off + 8);
      channels = get_u16(p + off + 10);
      rate = static_cast<int>(get_u32(p + off + 12));
      bits = get_u16(p + off + 22);
      DSR_REQUIRE(fmt == 1, path << ": only PCM supported, got format " << fmt);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = off + 8;
      data_len = len;
    }
    off += 8 + len + (len & 1);
  }
  DSR_REQUIRE(channels == 1, path << ": expected mono, got " << channels << " channels");
  DSR_REQUIRE(bits == 16, path << ": expected 16-bit samples, got " << bits);
  DSR_REQUIRE(data_off > 0 && data_off + data_len <= bytes.size(), path << ": bad data chunk");
  const size_t n = data_len / 2;
  Waveform x(n);
  for (size_t i = 0; i < n; ++i) {
    auto v = static_cast<int16_t>(get_u16(p + data_off + 2 * i));
    x[i] = static_cast<double>(v) / 32767.0;
  }
  if (sample_rate) *sample_rate = rate;
  return x;
}

}  // namespace dsr
