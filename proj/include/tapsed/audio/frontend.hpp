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

// Waveform -> log-mel features. Max-abs normalization, centered STFT
// (reflect-padded edges) with a periodic Hamming window, HTK-style mel
// filterbank over 0 Hz..Nyquist, natural log with a 1e-10 floor. The mel
// axis is referred to as the frequency dimension throughout.

#include <cstdint>
#include <vector>

#include "tapsed/audio/wav.hpp"

namespace tapsed::audio {

struct FrontendConfig {
  int64_t sample_rate = 16000;
  int64_t clip_samples = 160000;  // clips are padded/cropped to 10 s
  int64_t fft_size = 2048;
  int64_t hop = 256;
  int64_t n_mels = 128;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;

  bool operator==(const FrontendConfig&) const = default;

  int64_t frames_for(int64_t n_samples) const { return n_samples / hop + 1; }
};

// Row-major [n_mels x frames] feature matrix.
struct LogMel {
  int64_t n_mels = 0;
  int64_t frames = 0;
  std::vector<double> values;

  double& at(int64_t m, int64_t t) { return values[m * frames + t]; }
  double at(int64_t m, int64_t t) const { return values[m * frames + t]; }
};

// Scales so max |sample| == 1; all-zero input is returned unchanged.
Waveform normalize_waveform(const Waveform& w);

// Pad with zeros / crop to exactly `samples`.
Waveform pad_or_crop(const Waveform& w, int64_t samples);

// Triangular HTK-mel filterbank, peak 1, bins indexed [mel][fft_bin].
std::vector<std::vector<double>> mel_filterbank(const FrontendConfig& cfg);

// Center frequency (Hz) of each mel filter; used by tests to locate the
// expected dominant bin for a pure tone.
std::vector<double> mel_center_frequencies(const FrontendConfig& cfg);

LogMel logmel(const Waveform& w, const FrontendConfig& cfg);

// Full per-clip pipeline: pad/crop -> normalize -> logmel.
LogMel features_for_clip(const Waveform& w, const FrontendConfig& cfg);

// In-place radix-2 complex FFT, n a power of two.
void fft_inplace(std::vector<double>& re, std::vector<double>& im);

}  // namespace tapsed::audio
