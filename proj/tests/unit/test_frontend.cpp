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

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "tapsed/audio/frontend.hpp"
#include "tapsed/audio/wav.hpp"
#include "tapsed/rng.hpp"

using namespace tapsed;
using audio::FrontendConfig;
using audio::Waveform;

TEST_CASE("waveform normalization") {
  Waveform w;
  w.samples = {0.5, -0.25};
  const Waveform n = audio::normalize_waveform(w);
  CHECK(n.samples == std::vector<double>{1.0, -0.5});

  Waveform zero;
  zero.samples.assign(100, 0.0);
  const Waveform nz = audio::normalize_waveform(zero);
  for (double s : nz.samples) CHECK(s == 0.0);

  SeqRng rng(3, "wave");
  Waveform r;
  for (int i = 0; i < 4000; ++i) r.samples.push_back(rng.uniform(-0.3, 0.3));
  const Waveform nr = audio::normalize_waveform(r);
  double peak = 0.0;
  for (double s : nr.samples) peak = std::max(peak, std::abs(s));
  CHECK(peak == 1.0);
}

TEST_CASE("silence maps to the log floor everywhere") {
  FrontendConfig cfg;
  Waveform w;
  w.samples.assign(cfg.clip_samples, 0.0);
  const audio::LogMel mel = audio::features_for_clip(w, cfg);
  const double floor_val = std::log(cfg.log_floor);
  for (double v : mel.values) CHECK(v == doctest::Approx(floor_val));
}

TEST_CASE("ten seconds of audio produce 128 x 626 features") {
  FrontendConfig cfg;
  SeqRng rng(4, "wave");
  Waveform w;
  for (int64_t i = 0; i < cfg.clip_samples; ++i)
    w.samples.push_back(rng.uniform(-0.5, 0.5));
  const audio::LogMel mel = audio::features_for_clip(w, cfg);
  CHECK(mel.n_mels == 128);
  CHECK(mel.frames == 626);
}

TEST_CASE("feature frame count is a pure function of duration and hop") {
  FrontendConfig cfg;
  for (int seconds = 1; seconds <= 10; ++seconds) {
    const int64_t n = static_cast<int64_t>(seconds) * cfg.sample_rate;
    SeqRng rng(100 + seconds, "wave");
    Waveform w;
    for (int64_t i = 0; i < n; ++i) w.samples.push_back(rng.uniform(-1.0, 1.0));
    const audio::LogMel mel = audio::logmel(audio::normalize_waveform(w), cfg);
    CHECK(mel.frames == n / cfg.hop + 1);
    CHECK(mel.n_mels == cfg.n_mels);
  }
}

TEST_CASE("a pure tone concentrates energy at the matching mel bin") {
  FrontendConfig cfg;
  const double tone_hz = 1000.0;
  Waveform w;
  for (int64_t i = 0; i < cfg.clip_samples; ++i)
    w.samples.push_back(
        0.8 * std::sin(2.0 * M_PI * tone_hz * i / cfg.sample_rate));
  const audio::LogMel mel = audio::features_for_clip(w, cfg);

  // The expected bin from the implemented filterbank geometry: the filter
  // whose center frequency lies closest to the tone.
  const auto centers = audio::mel_center_frequencies(cfg);
  int64_t expect = 0;
  for (size_t m = 1; m < centers.size(); ++m)
    if (std::abs(centers[m] - tone_hz) < std::abs(centers[expect] - tone_hz))
      expect = static_cast<int64_t>(m);

  for (int64_t t = 0; t < mel.frames; t += 51) {
    int64_t arg = 0;
    for (int64_t m = 1; m < mel.n_mels; ++m)
      if (mel.at(m, t) > mel.at(arg, t)) arg = m;
    CHECK(arg == expect);
  }
}

TEST_CASE("pre-normalization scaling leaves the features unchanged") {
  FrontendConfig cfg;
  SeqRng rng(9, "wave");
  Waveform w;
  for (int64_t i = 0; i < cfg.sample_rate; ++i)
    w.samples.push_back(rng.uniform(-0.9, 0.9));

  const audio::LogMel base = audio::logmel(audio::normalize_waveform(w), cfg);

  Waveform half = w;
  for (double& s : half.samples) s *= 0.5;  // exact in binary
  const audio::LogMel scaled =
      audio::logmel(audio::normalize_waveform(half), cfg);
  CHECK(base.values == scaled.values);

  Waveform odd = w;
  for (double& s : odd.samples) s *= 0.3;
  const audio::LogMel scaled_odd =
      audio::logmel(audio::normalize_waveform(odd), cfg);
  for (size_t i = 0; i < base.values.size(); ++i)
    CHECK(base.values[i] == doctest::Approx(scaled_odd.values[i]).epsilon(1e-9));
}

TEST_CASE("wav io round trip within 16-bit quantization") {
  Waveform w;
  w.sample_rate = 16000;
  SeqRng rng(11, "wave");
  for (int i = 0; i < 16000; ++i) w.samples.push_back(rng.uniform(-0.99, 0.99));
  const std::string path = "/tmp/tapsed_test_roundtrip.wav";
  audio::write_wav(path, w);
  const Waveform r = audio::read_wav(path, 16000);
  REQUIRE(r.samples.size() == w.samples.size());
  CHECK(r.sample_rate == 16000);
  for (size_t i = 0; i < w.samples.size(); ++i)
    CHECK(std::abs(r.samples[i] - w.samples[i]) <= 1.0 / 32768.0 + 1e-12);
  CHECK_THROWS_AS(audio::read_wav(path, 44100), std::runtime_error);
  CHECK_THROWS_AS(audio::read_wav("/tmp/tapsed_does_not_exist.wav", 16000),
                  std::runtime_error);
}
