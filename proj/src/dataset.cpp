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

#include "tapsed/train/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace tapsed::train {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, '\t')) out.push_back(item);
  return out;
}

int class_index(const std::vector<std::string>& names, const std::string& n,
                const std::string& where) {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == n) return static_cast<int>(i);
  throw std::runtime_error(where + ": unknown event label '" + n + "'");
}

FeatureClip make_clip(const std::string& root, const std::string& file,
                      const audio::FrontendConfig& frontend) {
  const audio::Waveform wave =
      audio::read_wav(root + "/" + file, frontend.sample_rate);
  const audio::LogMel mel = audio::features_for_clip(wave, frontend);
  FeatureClip clip;
  clip.id = file;
  clip.n_mels = mel.n_mels;
  clip.frames = mel.frames;
  clip.feat = mel.values;
  return clip;
}

}  // namespace

std::vector<StrongRow> read_strong_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  std::vector<StrongRow> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 4 tab-separated columns");
    StrongRow row;
    row.file = cols[0];
    row.onset = std::stod(cols[1]);
    row.offset = std::stod(cols[2]);
    row.label = cols[3];
    if (row.offset <= row.onset)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": offset must exceed onset");
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::pair<std::string, std::vector<std::string>>>
read_weak_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.empty() || cols.size() > 2)
      throw std::runtime_error(path + ": expected 1-2 columns per row");
    std::vector<std::string> labels;
    if (cols.size() == 2 && !cols[1].empty()) {
      std::istringstream ls(cols[1]);
      std::string label;
      while (std::getline(ls, label, ',')) labels.push_back(label);
    }
    rows.push_back({cols[0], labels});
  }
  return rows;
}

std::vector<std::string> read_unlabeled_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split_tabs(line)[0]);
  return rows;
}

void write_predictions_tsv(const std::string& path,
                           const eval::EventList& events,
                           const std::vector<std::string>& class_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("predictions: cannot write " + path);
  for (const auto& ev : events)
    out << ev.clip << "\t" << ev.onset << "\t" << ev.offset << "\t"
        << class_names[ev.cls] << "\n";
}

std::vector<double> rasterize_labels(const eval::EventList& events,
                                     int64_t classes, int64_t frames,
                                     double frame_seconds) {
  std::vector<double> grid(classes * frames, 0.0);
  for (const auto& ev : events) {
    const int64_t t0 = std::max<int64_t>(
        0, static_cast<int64_t>(std::floor(ev.onset / frame_seconds)));
    const int64_t t1 = std::min<int64_t>(
        frames, static_cast<int64_t>(std::ceil(ev.offset / frame_seconds)));
    for (int64_t t = t0; t < t1; ++t) grid[ev.cls * frames + t] = 1.0;
  }
  return grid;
}

Dataset load_strong_dataset(const std::string& root, const std::string& manifest,
                            const audio::FrontendConfig& frontend,
                            const std::vector<std::string>& class_names) {
  const auto rows = read_strong_manifest(manifest);
  std::map<std::string, eval::EventList> per_clip;
  std::vector<std::string> order;
  for (const auto& row : rows) {
    if (!per_clip.count(row.file)) order.push_back(row.file);
    eval::EventInterval ev;
    ev.clip = row.file;
    ev.cls = class_index(class_names, row.label, manifest);
    ev.onset = row.onset;
    ev.offset = row.offset;
    per_clip[row.file].push_back(ev);
  }
  Dataset ds;
  const double frame_seconds = static_cast<double>(frontend.hop) /
                               static_cast<double>(frontend.sample_rate);
  for (const auto& file : order) {
    FeatureClip clip = make_clip(root, file, frontend);
    clip.classes = static_cast<int64_t>(class_names.size());
    clip.strong = rasterize_labels(per_clip[file], clip.classes, clip.frames,
                                   frame_seconds);
    clip.weak.assign(class_names.size(), 0.0);
    for (const auto& ev : per_clip[file]) clip.weak[ev.cls] = 1.0;
    ds.clips.push_back(std::move(clip));
    for (const auto& ev : per_clip[file]) ds.ground_truth.push_back(ev);
  }
  return ds;
}

Dataset load_weak_dataset(const std::string& root, const std::string& manifest,
                          const audio::FrontendConfig& frontend,
                          const std::vector<std::string>& class_names) {
  Dataset ds;
  for (const auto& [file, labels] : read_weak_manifest(manifest)) {
    FeatureClip clip = make_clip(root, file, frontend);
    clip.classes = static_cast<int64_t>(class_names.size());
    clip.weak.assign(class_names.size(), 0.0);
    for (const auto& label : labels)
      clip.weak[class_index(class_names, label, manifest)] = 1.0;
    ds.clips.push_back(std::move(clip));
  }
  return ds;
}

Dataset load_unlabeled_dataset(const std::string& root,
                               const std::string& manifest,
                               const audio::FrontendConfig& frontend) {
  Dataset ds;
  for (const auto& file : read_unlabeled_manifest(manifest))
    ds.clips.push_back(make_clip(root, file, frontend));
  return ds;
}

}  // namespace tapsed::train
