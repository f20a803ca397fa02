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

#pragma once

// Single-channel 16-bit PCM WAV reader/writer. Anything else (other sample
// rates, channel counts, sample formats) is rejected with a diagnostic;
// resampling is out of scope.

#include <cstdint>
#include <string>
#include <vector>

namespace tapsed::audio {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int64_t sample_rate = 16000;
};

Waveform read_wav(const std::string& path, int64_t expected_rate = 16000);
void write_wav(const std::string& path, const Waveform& w);

}  // namespace tapsed::audio
