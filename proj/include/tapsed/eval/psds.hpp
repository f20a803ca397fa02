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

// Intersection-based polyphonic sound detection score (temporal-localization
// setting) and intersection-criterion classwise F1.
//
// Matching per operating point and class:
//  - a detection is valid iff its summed intersection with same-class ground
//    truths of the same clip covers >= dtc of the detection length;
//  - a ground truth counts as a true positive iff valid detections cover
//    >= gtc of its length;
//  - detections failing the dtc test are false positives.
// Per class this yields a TPR / (FP per hour) point per operating point; the
// per-class ROC is the running supremum over rates, the effective TPR at a
// rate is mean - alpha_st * population std across classes (clamped at 0),
// and the score is the exact area under that staircase over [0, e_max],
// normalized by e_max. Classes without ground truth are excluded and
// reported.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tapsed/eval/postprocess.hpp"

namespace tapsed::eval {

struct PsdsConfig {
  double dtc = 0.7;
  double gtc = 0.7;
  double alpha_st = 1.0;
  double alpha_ct = 0.0;  // cross-trigger term unused in this setting
  double e_max = 100.0;   // FP per hour
  int64_t thresholds = 50;

  std::vector<double> threshold_values() const {
    std::vector<double> ts(thresholds);
    for (int64_t i = 0; i < thresholds; ++i)
      ts[i] = static_cast<double>(i + 1) / static_cast<double>(thresholds + 1);
    return ts;
  }
};

struct PsdsReport {
  double score = 0.0;
  std::vector<int> excluded_classes;  // no ground truth
  // Per operating point, per class: (fp_per_hour, tpr).
  std::vector<std::vector<std::pair<double, double>>> points;
};

struct OperatingPointCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t n_truth = 0;
};

// Matching counts for one class at one operating point.
OperatingPointCounts match_intersection(const EventList& detections,
                                        const EventList& ground_truth, int cls,
                                        double dtc, double gtc);

double psds(const std::vector<EventList>& detections_per_op,
            const EventList& ground_truth, int n_classes,
            const PsdsConfig& cfg, double total_duration_hours,
            PsdsReport* report = nullptr);

struct ClasswiseF1 {
  std::vector<double> f1;         // per class
  std::vector<double> precision;
  std::vector<double> recall;
};

ClasswiseF1 classwise_f1(const EventList& detections,
                         const EventList& ground_truth, int n_classes,
                         double dtc, double gtc);

}  // namespace tapsed::eval
