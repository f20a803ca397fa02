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

#include "tapsed/audio/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tapsed::audio {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Band edges in Hz for n_mels triangles: n_mels + 2 points equally spaced on
// the mel scale between fmin and fmax.
std::vector<double> mel_points(const FrontendConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> pts(cfg.n_mels + 2);
  for (int64_t i = 0; i < cfg.n_mels + 2; ++i)
    pts[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.n_mels + 1));
  return pts;
}

}  // namespace

Waveform normalize_waveform(const Waveform& w) {
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  Waveform out = w;
  if (peak > 0.0)
    for (double& s : out.samples) s /= peak;
  return out;
}

Waveform pad_or_crop(const Waveform& w, int64_t samples) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = w.samples;
  out.samples.resize(samples, 0.0);
  return out;
}

void fft_inplace(std::vector<double>& re, std::vector<double>& im) {
  const size_t n = re.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw std::invalid_argument("fft: size must be a power of two");
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (size_t k = 0; k < len / 2; ++k) {
        const size_t a = i + k, b = i + k + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

std::vector<std::vector<double>> mel_filterbank(const FrontendConfig& cfg) {
  const int64_t n_bins = cfg.fft_size / 2 + 1;
  const auto pts = mel_points(cfg);
  std::vector<std::vector<double>> bank(cfg.n_mels,
                                        std::vector<double>(n_bins, 0.0));
  const double hz_per_bin =
      static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.fft_size);
  for (int64_t m = 0; m < cfg.n_mels; ++m) {
    const double f0 = pts[m], f1 = pts[m + 1], f2 = pts[m + 2];
    for (int64_t k = 0; k < n_bins; ++k) {
      const double f = k * hz_per_bin;
      if (f > f0 && f < f1)
        bank[m][k] = (f - f0) / (f1 - f0);
      else if (f >= f1 && f <= f2 && f2 > f1)
        bank[m][k] = (f2 - f) / (f2 - f1);
    }
  }
  return bank;
}

std::vector<double> mel_center_frequencies(const FrontendConfig& cfg) {
  const auto pts = mel_points(cfg);
  return std::vector<double>(pts.begin() + 1, pts.end() - 1);
}

LogMel logmel(const Waveform& w, const FrontendConfig& cfg) {
  const int64_t n = static_cast<int64_t>(w.samples.size());
  const int64_t n_fft = cfg.fft_size, hop = cfg.hop;
  const int64_t pad = n_fft / 2;
  const int64_t frames = cfg.frames_for(n);

  // Reflect padding for centered frames.
  std::vector<double> padded(n + 2 * pad);
  auto sample_at = [&](int64_t i) -> double {
    if (n == 1) return w.samples[0];
    // Reflect without repeating the edge sample.
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * (n - 1) - i;
    }
    return w.samples[i];
  };
  for (int64_t i = 0; i < n + 2 * pad; ++i) padded[i] = sample_at(i - pad);

  // Periodic Hamming window.
  std::vector<double> window(n_fft);
  for (int64_t i = 0; i < n_fft; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / n_fft);

  const auto bank = mel_filterbank(cfg);
  const int64_t n_bins = n_fft / 2 + 1;

  LogMel out;
  out.n_mels = cfg.n_mels;
  out.frames = frames;
  out.values.assign(cfg.n_mels * frames, 0.0);

  std::vector<double> re(n_fft), im(n_fft), power(n_bins);
  for (int64_t t = 0; t < frames; ++t) {
    const int64_t start = t * hop;
    for (int64_t i = 0; i < n_fft; ++i) {
      re[i] = padded[start + i] * window[i];
      im[i] = 0.0;
    }
    fft_inplace(re, im);
    for (int64_t k = 0; k < n_bins; ++k)
      power[k] = re[k] * re[k] + im[k] * im[k];
    for (int64_t m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      const auto& row = bank[m];
      for (int64_t k = 0; k < n_bins; ++k) acc += row[k] * power[k];
      out.values[m * frames + t] = std::log(acc + cfg.log_floor);
    }
  }
  return out;
}

LogMel features_for_clip(const Waveform& w, const FrontendConfig& cfg) {
  if (w.sample_rate != cfg.sample_rate)
    throw std::runtime_error("frontend: clip sampled at " +
                             std::to_string(w.sample_rate) + " Hz, expected " +
                             std::to_string(cfg.sample_rate));
  return logmel(normalize_waveform(pad_or_crop(w, cfg.clip_samples)), cfg);
}

}  // namespace tapsed::audio
