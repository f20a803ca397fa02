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

#include "tapsed/train/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tapsed::train {

namespace {

void circular_shift_rows(std::vector<double>& data, int64_t rows, int64_t cols,
                         int64_t shift) {
  if (cols == 0) return;
  shift = ((shift % cols) + cols) % cols;
  if (shift == 0) return;
  std::vector<double> row(cols);
  for (int64_t r = 0; r < rows; ++r) {
    double* p = &data[r * cols];
    for (int64_t t = 0; t < cols; ++t) row[(t + shift) % cols] = p[t];
    std::copy(row.begin(), row.end(), p);
  }
}

}  // namespace

void frameshift(FeatureClip& clip, int64_t shift) {
  circular_shift_rows(clip.feat, clip.n_mels, clip.frames, shift);
  if (!clip.strong.empty())
    circular_shift_rows(clip.strong, clip.classes, clip.frames, shift);
}

void time_mask(FeatureClip& clip, int64_t start, int64_t length) {
  if (length <= 0) return;
  const int64_t end = std::min(clip.frames, start + length);
  for (int64_t m = 0; m < clip.n_mels; ++m)
    std::fill(clip.feat.begin() + m * clip.frames + start,
              clip.feat.begin() + m * clip.frames + end, 0.0);
  if (!clip.strong.empty())
    for (int64_t c = 0; c < clip.classes; ++c)
      std::fill(clip.strong.begin() + c * clip.frames + start,
                clip.strong.begin() + c * clip.frames + end, 0.0);
}

void frameshift_random(FeatureClip& clip, int64_t max_shift, SeqRng& rng) {
  if (max_shift <= 0) return;
  const int64_t shift =
      static_cast<int64_t>(rng.below(2 * max_shift + 1)) - max_shift;
  frameshift(clip, shift);
}

void time_mask_random(FeatureClip& clip, int64_t max_frames, SeqRng& rng) {
  if (max_frames <= 0) return;
  const int64_t length = static_cast<int64_t>(rng.below(max_frames + 1));
  if (length == 0 || length >= clip.frames) return;
  const int64_t start = static_cast<int64_t>(rng.below(clip.frames - length));
  time_mask(clip, start, length);
}

void mixup_pair(FeatureClip& a, const FeatureClip& b, double lam) {
  if (a.feat.size() != b.feat.size())
    throw std::invalid_argument("mixup: feature size mismatch");
  for (size_t i = 0; i < a.feat.size(); ++i)
    a.feat[i] = lam * a.feat[i] + (1.0 - lam) * b.feat[i];
  if (!a.strong.empty() && !b.strong.empty())
    for (size_t i = 0; i < a.strong.size(); ++i)
      a.strong[i] = lam * a.strong[i] + (1.0 - lam) * b.strong[i];
  if (!a.weak.empty() && !b.weak.empty())
    for (size_t i = 0; i < a.weak.size(); ++i)
      a.weak[i] = lam * a.weak[i] + (1.0 - lam) * b.weak[i];
}

void mixup(std::vector<FeatureClip>& subset, double alpha, SeqRng& rng) {
  if (subset.size() < 2 || alpha <= 0.0) return;
  const std::vector<FeatureClip> originals = subset;
  for (size_t i = 0; i < subset.size(); ++i) {
    const size_t j = rng.below(originals.size());
    const double lam = rng.beta_symmetric(alpha);
    mixup_pair(subset[i], originals[j], lam);
  }
}

void apply_band_gains(FeatureClip& clip, const std::vector<int64_t>& bounds,
                      const std::vector<double>& gains_db) {
  if (bounds.size() != gains_db.size() + 1)
    throw std::invalid_argument("filter_augment: bad band layout");
  const double db_to_ln = std::log(10.0) / 20.0;
  for (size_t b = 0; b + 1 < bounds.size(); ++b) {
    const double add = gains_db[b] * db_to_ln;
    for (int64_t m = bounds[b]; m < bounds[b + 1]; ++m)
      for (int64_t t = 0; t < clip.frames; ++t)
        clip.f(m, t) += add;
  }
}

void filter_augment(FeatureClip& clip, int64_t bands_min, int64_t bands_max,
                    double gain_db, SeqRng& rng) {
  const int64_t n_bands =
      bands_min + static_cast<int64_t>(rng.below(bands_max - bands_min + 1));
  std::vector<int64_t> bounds{0};
  for (int64_t b = 1; b < n_bands; ++b)
    bounds.push_back(1 + static_cast<int64_t>(rng.below(clip.n_mels - 1)));
  bounds.push_back(clip.n_mels);
  std::sort(bounds.begin(), bounds.end());
  std::vector<double> gains(n_bands);
  for (auto& g : gains) g = rng.uniform(-gain_db, gain_db);
  apply_band_gains(clip, bounds, gains);
}

std::vector<double> pool_labels(const std::vector<double>& strong,
                                int64_t classes, int64_t frames,
                                int64_t factor) {
  const int64_t out_frames = frames / factor;
  std::vector<double> pooled(classes * out_frames, 0.0);
  for (int64_t c = 0; c < classes; ++c)
    for (int64_t j = 0; j < out_frames; ++j) {
      double m = 0.0;
      for (int64_t t = j * factor; t < (j + 1) * factor; ++t)
        m = std::max(m, strong[c * frames + t]);
      pooled[c * out_frames + j] = m;
    }
  return pooled;
}

}  // namespace tapsed::train
