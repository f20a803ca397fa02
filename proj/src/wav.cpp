// Copyright 2026 The tapsed Authors
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

#include "tapsed/audio/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tapsed::audio {

namespace {

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0]) | (static_cast<uint16_t>(b[1]) << 8);
}

void write_u32(std::ostream& out, uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                     static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
  const char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::string& path, int64_t expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("wav: cannot open " + path);
  char tag[4];
  in.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("wav: " + path + " is not a RIFF file");
  read_u32(in);  // riff size
  in.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("wav: " + path + " is not a WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<int16_t> pcm;
  bool have_fmt = false, have_data = false;
  while (in.read(tag, 4)) {
    const uint32_t size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_u16(in);
      channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      pcm.resize(size / 2);
      in.read(reinterpret_cast<char*>(pcm.data()), size / 2 * 2);
      have_data = true;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data)
    throw std::runtime_error("wav: " + path + " is missing fmt/data chunks");
  if (format != 1 || bits != 16)
    throw std::runtime_error("wav: " + path +
                             ": only 16-bit PCM is supported (format " +
                             std::to_string(format) + ", " +
                             std::to_string(bits) + " bits)");
  if (channels != 1)
    throw std::runtime_error("wav: " + path + ": expected mono, got " +
                             std::to_string(channels) + " channels");
  if (expected_rate > 0 && static_cast<int64_t>(rate) != expected_rate)
    throw std::runtime_error("wav: " + path + ": sample rate " +
                             std::to_string(rate) + " Hz, expected " +
                             std::to_string(expected_rate) +
                             " Hz (resampling not supported)");
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(pcm.size());
  for (size_t i = 0; i < pcm.size(); ++i) w.samples[i] = pcm[i] / 32768.0;
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("wav: cannot write " + path);
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<uint32_t>(w.sample_rate));
  write_u32(out, static_cast<uint32_t>(w.sample_rate * 2));
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (double s : w.samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    const int32_t q = static_cast<int32_t>(std::lrint(clipped * 32767.0));
    const int16_t v = static_cast<int16_t>(std::clamp(q, -32768, 32767));
    const char b[2] = {static_cast<char>(v & 0xff),
                       static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
  }
  if (!out) throw std::runtime_error("wav: failed writing " + path);
}

}  // namespace tapsed::audio
