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

// Synthetic desk-scale dataset: ten classes, half transient archetypes
// (click train, chirp burst, noise burst, plosive pulse, struck decay) and
// half quasi-stationary (steady tone, band noise, mains hum, AM tone,
// broadband wash), placed in 10 s clips with exact onset/offset ground truth
// and polyphony capped at two. Deterministic per seed; splits draw from
// disjoint seeded streams.

#include <cstdint>
#include <string>
#include <vector>

#include "tapsed/audio/wav.hpp"
#include "tapsed/config.hpp"
#include "tapsed/eval/postprocess.hpp"

namespace tapsed::synth {

inline constexpr int kNumClasses = 10;
const std::vector<std::string>& class_names();
bool is_transient_class(int cls);
int class_id(const std::string& name);  // -1 if unknown

struct GeneratedClip {
  std::string id;
  audio::Waveform wave;
  eval::EventList events;  // exact ground truth
};

// One clip from a per-clip deterministic stream.
GeneratedClip generate_clip(const SynthSpec& spec, uint64_t seed,
                            const std::string& split, int64_t index,
                            int64_t sample_rate, int64_t clip_samples);

struct SynthOutput {
  std::string strong_manifest;
  std::string weak_manifest;
  std::string unlabeled_manifest;
  std::string val_ground_truth;
  std::string val_manifest;
};

// Writes WAVs + manifests under out_dir:
//   strong/, weak/, unlabeled/, val/ with strong.tsv, weak.tsv,
//   unlabeled.tsv, val.tsv (ground truth for scoring).
SynthOutput synthesize_dataset(const SynthSpec& spec, uint64_t seed,
                               const std::string& out_dir,
                               int64_t sample_rate = 16000,
                               int64_t clip_samples = 160000);

}  // namespace tapsed::synth
