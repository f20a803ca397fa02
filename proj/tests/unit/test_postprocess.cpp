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

#include "../support/oracles.hpp"
#include "tapsed/eval/postprocess.hpp"
#include "tapsed/rng.hpp"

using namespace tapsed;
using namespace tapsed::eval;

TEST_CASE("weak masking caps posteriors and never raises them") {
  // classes=1, frames=3
  CHECK(weak_mask({0.2, 0.5, 0.9}, 1, 3, {1.0}) ==
        std::vector<double>{0.2, 0.5, 0.9});
  CHECK(weak_mask({0.2, 0.5, 0.9}, 1, 3, {0.0}) ==
        std::vector<double>{0.0, 0.0, 0.0});
  CHECK(weak_mask({0.8}, 1, 1, {0.6}) == std::vector<double>{0.6});
  CHECK(weak_mask({0.8, 0.5}, 1, 2, {0.6}, WeakMaskMode::kGate) ==
        std::vector<double>{0.0, 0.5});

  SeqRng rng(5, "mask");
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> strong(30), weak(3);
    for (auto& v : strong) v = rng.uniform();
    for (auto& v : weak) v = rng.uniform();
    for (auto mode : {WeakMaskMode::kMin, WeakMaskMode::kGate}) {
      const auto masked = weak_mask(strong, 3, 10, weak, mode);
      for (size_t i = 0; i < strong.size(); ++i) CHECK(masked[i] <= strong[i]);
    }
  }
}

TEST_CASE("median filter length seven") {
  std::vector<double> spike(15, 0.0);
  spike[7] = 1.0;
  const auto cleaned = median_filter(spike, 7);
  for (double v : cleaned) CHECK(v == 0.0);

  std::vector<double> constant(12, 0.75);
  CHECK(median_filter(constant, 7) == constant);

  const std::vector<double> track = {0, 0, 1, 1, 1, 1, 0, 0, 0, 1, 0};
  CHECK(median_filter(track, 7) == oracles::sliding_median(track, 7));

  CHECK_THROWS_AS(median_filter(track, 4), std::invalid_argument);
}

TEST_CASE("median filter matches the brute-force oracle on random tracks") {
  SeqRng rng(6, "median");
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t n = 5 + rng.below(40);
    std::vector<double> track(n);
    for (auto& v : track) v = rng.coin(0.4) ? 1.0 : 0.0;
    for (int64_t len : {3, 5, 7}) {
      if (len > n) continue;
      CHECK(median_filter(track, len) == oracles::sliding_median(track, len));
    }
  }
}

TEST_CASE("median filtering is idempotent once runs are long enough") {
  SeqRng rng(7, "median2");
  for (int trial = 0; trial < 30; ++trial) {
    // Build a binary track whose runs all have length >= 4.
    std::vector<double> track;
    double level = rng.coin(0.5) ? 1.0 : 0.0;
    while (track.size() < 40) {
      const int64_t run = 4 + rng.below(6);
      for (int64_t i = 0; i < run; ++i) track.push_back(level);
      level = 1.0 - level;
    }
    const auto once = median_filter(track, 7);
    CHECK(median_filter(once, 7) == once);
  }
}

TEST_CASE("run segmentation converts frames to seconds") {
  const double fs = 0.064;  // 64 ms frames
  CHECK(binarize_and_segment({0.1, 0.2, 0.3}, 0, "c.wav", 0.5, fs, 10.0)
            .empty());

  std::vector<double> track(20, 0.0);
  for (int t = 8; t <= 15; ++t) track[t] = 0.9;
  const auto events = binarize_and_segment(track, 2, "c.wav", 0.5, fs, 10.0);
  REQUIRE(events.size() == 1);
  CHECK(events[0].cls == 2);
  CHECK(events[0].onset == doctest::Approx(0.512));
  CHECK(events[0].offset == doctest::Approx(1.024));

  std::vector<double> two(10, 0.0);
  two[2] = two[3] = 1.0;
  two[5] = two[6] = 1.0;
  CHECK(binarize_and_segment(two, 0, "c.wav", 0.5, fs, 10.0).size() == 2);
}

TEST_CASE("full detection chain applies mask, threshold and median") {
  // One class, strong frames above threshold only inside a long run; the
  // single-frame blip must be removed by the median filter.
  const int64_t frames = 24;
  std::vector<double> strong(frames, 0.1);
  for (int t = 4; t < 12; ++t) strong[t] = 0.9;
  strong[20] = 0.9;  // isolated blip
  const auto events = detect_events(strong, 1, frames, {1.0}, "x.wav", 0.5,
                                    0.064, 10.0, 7, WeakMaskMode::kMin);
  REQUIRE(events.size() == 1);
  CHECK(events[0].onset == doctest::Approx(4 * 0.064));
  CHECK(events[0].offset == doctest::Approx(12 * 0.064));

  // A weak ceiling below the threshold suppresses everything.
  CHECK(detect_events(strong, 1, frames, {0.3}, "x.wav", 0.5, 0.064, 10.0, 7,
                      WeakMaskMode::kMin)
            .empty());
}
