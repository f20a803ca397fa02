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

// Posterior post-processing: weak-prediction masking, median filtering and
// run segmentation into timestamped events.

#include <cstdint>
#include <string>
#include <vector>

namespace tapsed::eval {

struct EventInterval {
  std::string clip;
  int cls = 0;
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds, onset < offset
};

using EventList = std::vector<EventInterval>;

enum class WeakMaskMode { kMin, kGate };

// Caps frame posteriors with the clip-level weak posterior per class:
// min mode clamps to the weak value; gate mode zeroes frames that exceed it.
// Never increases any posterior.
std::vector<double> weak_mask(const std::vector<double>& strong,
                              int64_t classes, int64_t frames,
                              const std::vector<double>& weak,
                              WeakMaskMode mode = WeakMaskMode::kMin);

// Sliding median with reflected edges; length must be odd.
std::vector<double> median_filter(const std::vector<double>& track,
                                  int64_t length);

// Frames >= threshold form maximal runs; run [a,b] maps to
// [a * frame_seconds, (b+1) * frame_seconds], clipped to [0, clip_seconds].
EventList binarize_and_segment(const std::vector<double>& track, int cls,
                               const std::string& clip, double threshold,
                               double frame_seconds, double clip_seconds);

// Full chain for one clip: mask -> threshold -> median -> segment.
EventList detect_events(const std::vector<double>& strong, int64_t classes,
                        int64_t frames, const std::vector<double>& weak,
                        const std::string& clip, double threshold,
                        double frame_seconds, double clip_seconds,
                        int64_t median_length, WeakMaskMode mode);

}  // namespace tapsed::eval
