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

#include "tapsed/eval/postprocess.hpp"

#include <algorithm>
#include <stdexcept>

namespace tapsed::eval {

std::vector<double> weak_mask(const std::vector<double>& strong,
                              int64_t classes, int64_t frames,
                              const std::vector<double>& weak,
                              WeakMaskMode mode) {
  if (static_cast<int64_t>(strong.size()) != classes * frames)
    throw std::invalid_argument("weak_mask: strong size mismatch");
  if (static_cast<int64_t>(weak.size()) != classes)
    throw std::invalid_argument("weak_mask: weak size mismatch");
  std::vector<double> out(strong.size());
  for (int64_t c = 0; c < classes; ++c)
    for (int64_t t = 0; t < frames; ++t) {
      const double s = strong[c * frames + t];
      out[c * frames + t] = mode == WeakMaskMode::kMin
                                ? std::min(s, weak[c])
                                : (s > weak[c] ? 0.0 : s);
    }
  return out;
}

std::vector<double> median_filter(const std::vector<double>& track,
                                  int64_t length) {
  if (length % 2 == 0)
    throw std::invalid_argument("median_filter: length must be odd, got " +
                                std::to_string(length));
  const int64_t n = static_cast<int64_t>(track.size());
  if (n == 0 || length == 1) return track;
  const int64_t half = length / 2;
  auto reflect = [n](int64_t i) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i;
      if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
  };
  std::vector<double> out(n);
  std::vector<double> window(length);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < length; ++j)
      window[j] = track[reflect(i - half + j)];
    std::nth_element(window.begin(), window.begin() + half, window.end());
    out[i] = window[half];
  }
  return out;
}

EventList binarize_and_segment(const std::vector<double>& track, int cls,
                               const std::string& clip, double threshold,
                               double frame_seconds, double clip_seconds) {
  EventList events;
  const int64_t n = static_cast<int64_t>(track.size());
  int64_t run_start = -1;
  for (int64_t t = 0; t <= n; ++t) {
    const bool active = t < n && track[t] >= threshold;
    if (active && run_start < 0) run_start = t;
    if (!active && run_start >= 0) {
      EventInterval ev;
      ev.clip = clip;
      ev.cls = cls;
      ev.onset = std::min(run_start * frame_seconds, clip_seconds);
      ev.offset = std::min(t * frame_seconds, clip_seconds);
      if (ev.offset > ev.onset) events.push_back(ev);
      run_start = -1;
    }
  }
  return events;
}

EventList detect_events(const std::vector<double>& strong, int64_t classes,
                        int64_t frames, const std::vector<double>& weak,
                        const std::string& clip, double threshold,
                        double frame_seconds, double clip_seconds,
                        int64_t median_length, WeakMaskMode mode) {
  const std::vector<double> masked =
      weak_mask(strong, classes, frames, weak, mode);
  EventList all;
  std::vector<double> track(frames);
  for (int64_t c = 0; c < classes; ++c) {
    for (int64_t t = 0; t < frames; ++t)
      track[t] = masked[c * frames + t] >= threshold ? 1.0 : 0.0;
    track = median_filter(track, median_length);
    EventList evs = binarize_and_segment(track, static_cast<int>(c), clip, 0.5,
                                         frame_seconds, clip_seconds);
    all.insert(all.end(), evs.begin(), evs.end());
  }
  return all;
}

}  // namespace tapsed::eval
