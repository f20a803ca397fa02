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

// TSV manifests and feature loading.
//   strong:    filename<TAB>onset<TAB>offset<TAB>event_label
//   weak:      filename<TAB>event_labels (comma separated)
//   unlabeled: filename
// Features are extracted once per clip; strong labels are rasterized at
// feature-frame resolution and pooled to the model rate at batch time.

#include <string>
#include <vector>

#include "tapsed/audio/frontend.hpp"
#include "tapsed/eval/postprocess.hpp"
#include "tapsed/train/augment.hpp"

namespace tapsed::train {

struct Dataset {
  std::vector<FeatureClip> clips;
  eval::EventList ground_truth;  // populated for strong/validation sets
};

// Parsed manifest rows (before feature extraction).
struct StrongRow {
  std::string file;
  double onset = 0.0;
  double offset = 0.0;
  std::string label;
};

std::vector<StrongRow> read_strong_manifest(const std::string& path);
std::vector<std::pair<std::string, std::vector<std::string>>>
read_weak_manifest(const std::string& path);
std::vector<std::string> read_unlabeled_manifest(const std::string& path);

void write_predictions_tsv(const std::string& path,
                           const eval::EventList& events,
                           const std::vector<std::string>& class_names);

// Rasterize second-resolution events onto feature frames.
std::vector<double> rasterize_labels(const eval::EventList& events,
                                     int64_t classes, int64_t frames,
                                     double frame_seconds);

Dataset load_strong_dataset(const std::string& root, const std::string& manifest,
                            const audio::FrontendConfig& frontend,
                            const std::vector<std::string>& class_names);
Dataset load_weak_dataset(const std::string& root, const std::string& manifest,
                          const audio::FrontendConfig& frontend,
                          const std::vector<std::string>& class_names);
Dataset load_unlabeled_dataset(const std::string& root,
                               const std::string& manifest,
                               const audio::FrontendConfig& frontend);

}  // namespace tapsed::train
