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

// Feature-space augmentations. All operate on a log-mel matrix plus labels
// kept at feature-frame resolution, so feature/label alignment is automatic;
// labels are max-pooled to the model's output rate afterwards.

#include <cstdint>
#include <string>
#include <vector>

#include "tapsed/rng.hpp"

namespace tapsed::train {

// One clip in feature space.
struct FeatureClip {
  std::string id;
  int64_t n_mels = 0;
  int64_t frames = 0;
  std::vector<double> feat;    // [n_mels x frames]
  std::vector<double> strong;  // [classes x frames], empty if unlabeled/weak
  std::vector<double> weak;    // [classes], empty if unlabeled
  int64_t classes = 0;

  double& f(int64_t m, int64_t t) { return feat[m * frames + t]; }
  double& s(int64_t c, int64_t t) { return strong[c * frames + t]; }
};

// Circular shift along time of features and frame labels.
void frameshift(FeatureClip& clip, int64_t shift);

// Zeroes features and frame labels over [start, start + length).
void time_mask(FeatureClip& clip, int64_t start, int64_t length);

// Random draw helpers used by the training loop.
void frameshift_random(FeatureClip& clip, int64_t max_shift, SeqRng& rng);
void time_mask_random(FeatureClip& clip, int64_t max_frames, SeqRng& rng);

// Pairwise mixup inside a homogeneous subset: clip[i] <- lam * clip[i] +
// (1 - lam) * clip[partner], applied to features and whatever labels exist.
// lam ~ Beta(alpha, alpha) per pair.
void mixup(std::vector<FeatureClip>& subset, double alpha, SeqRng& rng);
void mixup_pair(FeatureClip& a, const FeatureClip& b, double lam);

// Per-band gain on the log-mel features: the frequency axis is cut at
// `bands - 1` random boundaries and each band gets a constant gain drawn
// uniformly in +-gain_db, added as dB on amplitude (g * ln(10) / 20 in the
// natural-log domain).
void filter_augment(FeatureClip& clip, int64_t bands_min, int64_t bands_max,
                    double gain_db, SeqRng& rng);
void apply_band_gains(FeatureClip& clip, const std::vector<int64_t>& bounds,
                      const std::vector<double>& gains_db);

// Max-pool frame labels to the model output rate (window `factor`, floor).
std::vector<double> pool_labels(const std::vector<double>& strong,
                                int64_t classes, int64_t frames,
                                int64_t factor);

}  // namespace tapsed::train
