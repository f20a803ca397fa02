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

#include "tapsed/eval/psds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tapsed::eval {

namespace {

double overlap(const EventInterval& a, const EventInterval& b) {
  return std::max(0.0, std::min(a.offset, b.offset) - std::max(a.onset, b.onset));
}

}  // namespace

OperatingPointCounts match_intersection(const EventList& detections,
                                        const EventList& ground_truth, int cls,
                                        double dtc, double gtc) {
  OperatingPointCounts counts;
  std::vector<const EventInterval*> dets, gts;
  for (const auto& d : detections)
    if (d.cls == cls) dets.push_back(&d);
  for (const auto& g : ground_truth)
    if (g.cls == cls) gts.push_back(&g);
  counts.n_truth = static_cast<int64_t>(gts.size());

  std::vector<const EventInterval*> valid;
  for (const auto* d : dets) {
    const double len = d->offset - d->onset;
    double inter = 0.0;
    for (const auto* g : gts)
      if (g->clip == d->clip) inter += overlap(*d, *g);
    if (len > 0.0 && inter / len >= dtc)
      valid.push_back(d);
    else
      ++counts.fp;
  }
  for (const auto* g : gts) {
    const double len = g->offset - g->onset;
    if (len <= 0.0) continue;
    double covered = 0.0;
    for (const auto* d : valid)
      if (d->clip == g->clip) covered += overlap(*d, *g);
    if (covered / len >= gtc) ++counts.tp;
  }
  return counts;
}

double psds(const std::vector<EventList>& detections_per_op,
            const EventList& ground_truth, int n_classes,
            const PsdsConfig& cfg, double total_duration_hours,
            PsdsReport* report) {
  if (total_duration_hours <= 0.0)
    throw std::invalid_argument("psds: total duration must be positive");
  std::vector<int> active;  // classes that have ground truth
  std::vector<int> excluded;
  for (int c = 0; c < n_classes; ++c) {
    bool any = false;
    for (const auto& g : ground_truth) any |= g.cls == c;
    (any ? active : excluded).push_back(c);
  }
  if (report) {
    report->excluded_classes = excluded;
    report->points.assign(detections_per_op.size(), {});
  }
  if (active.empty()) {
    if (report) report->score = 0.0;
    return 0.0;
  }

  // Per class: operating points (fp/hour, tpr).
  std::vector<std::vector<std::pair<double, double>>> curve(active.size());
  for (size_t op = 0; op < detections_per_op.size(); ++op) {
    for (size_t ci = 0; ci < active.size(); ++ci) {
      const auto counts = match_intersection(detections_per_op[op],
                                             ground_truth, active[ci],
                                             cfg.dtc, cfg.gtc);
      const double tpr =
          counts.n_truth > 0
              ? static_cast<double>(counts.tp) / static_cast<double>(counts.n_truth)
              : 0.0;
      const double rate = static_cast<double>(counts.fp) / total_duration_hours;
      curve[ci].push_back({rate, tpr});
      if (report) report->points[op].push_back({rate, tpr});
    }
  }

  // Rate grid: every observed rate within [0, e_max], plus both ends.
  std::vector<double> grid{0.0, cfg.e_max};
  for (const auto& pts : curve)
    for (const auto& [rate, tpr] : pts)
      if (rate <= cfg.e_max) grid.push_back(rate);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  // r_c(e) = best TPR among operating points with rate <= e (0 if none).
  auto tpr_at = [&](size_t ci, double e) {
    double best = 0.0;
    for (const auto& [rate, tpr] : curve[ci])
      if (rate <= e) best = std::max(best, tpr);
    return best;
  };

  double area = 0.0;
  for (size_t i = 0; i + 1 < grid.size(); ++i) {
    double mean = 0.0;
    std::vector<double> vals(active.size());
    for (size_t ci = 0; ci < active.size(); ++ci) {
      vals[ci] = tpr_at(ci, grid[i]);
      mean += vals[ci];
    }
    mean /= static_cast<double>(active.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(active.size());
    const double etpr = std::max(0.0, mean - cfg.alpha_st * std::sqrt(var));
    area += (grid[i + 1] - grid[i]) * etpr;
  }
  const double score = area / cfg.e_max;
  if (report) report->score = score;
  return score;
}

ClasswiseF1 classwise_f1(const EventList& detections,
                         const EventList& ground_truth, int n_classes,
                         double dtc, double gtc) {
  ClasswiseF1 out;
  out.f1.assign(n_classes, 0.0);
  out.precision.assign(n_classes, 0.0);
  out.recall.assign(n_classes, 0.0);
  for (int c = 0; c < n_classes; ++c) {
    const auto counts = match_intersection(detections, ground_truth, c, dtc, gtc);
    const int64_t fn = counts.n_truth - counts.tp;
    const double p = counts.tp + counts.fp > 0
                         ? static_cast<double>(counts.tp) / (counts.tp + counts.fp)
                         : 0.0;
    const double r = counts.n_truth > 0
                         ? static_cast<double>(counts.tp) / counts.n_truth
                         : 0.0;
    out.precision[c] = p;
    out.recall[c] = r;
    out.f1[c] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    (void)fn;
  }
  return out;
}

}  // namespace tapsed::eval
