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

// Test-only brute-force oracles, written as literal translations of the
// definitions and kept independent of the library's implementation paths.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "tapsed/eval/postprocess.hpp"
#include "tapsed/eval/psds.hpp"
#include "tapsed/tensor.hpp"

namespace oracles {

using tapsed::Tensor;

// Frequency-dynamic convolution by per-frequency kernel assembly: for every
// output row f, blend the basis kernels with the attention weights at f and
// correlate row by row. Dilations apply per basis kernel on the frequency
// axis. Plain quintuple loop.
inline Tensor<double> fdy_assembled(
    const Tensor<double>& x, const std::vector<Tensor<double>>& weights,
    const std::vector<int64_t>& dilations, const Tensor<double>& attention) {
  const int64_t nb = x.extent(0), ci = x.extent(1), nf = x.extent(2),
                nt = x.extent(3);
  const int64_t kk = static_cast<int64_t>(weights.size());
  const int64_t co = weights[0].extent(0), kf = weights[0].extent(2),
                kt = weights[0].extent(3);
  Tensor<double> out = Tensor<double>::zeros({nb, co, nf, nt});
  for (int64_t b = 0; b < nb; ++b)
    for (int64_t c = 0; c < co; ++c)
      for (int64_t f = 0; f < nf; ++f)
        for (int64_t t = 0; t < nt; ++t) {
          double acc = 0.0;
          for (int64_t k = 0; k < kk; ++k) {
            const double a = attention.data()[(b * kk + k) * nf + f];
            const int64_t d = dilations[k];
            for (int64_t q = 0; q < ci; ++q)
              for (int64_t u = 0; u < kf; ++u)
                for (int64_t v = 0; v < kt; ++v) {
                  const int64_t fi = f + d * (u - kf / 2);
                  const int64_t ti = t + (v - kt / 2);
                  if (fi < 0 || fi >= nf || ti < 0 || ti >= nt) continue;
                  acc += a *
                         weights[k].data()[((c * ci + q) * kf + u) * kt + v] *
                         x.data()[((b * ci + q) * nf + fi) * nt + ti];
                }
          }
          out.data()[((b * co + c) * nf + f) * nt + t] = acc;
        }
  return out;
}

// Sliding median by sorting each window explicitly (reflected edges).
inline std::vector<double> sliding_median(const std::vector<double>& track,
                                          int64_t length) {
  const int64_t n = static_cast<int64_t>(track.size());
  std::vector<double> out(n);
  for (int64_t i = 0; i < n; ++i) {
    std::vector<double> w;
    for (int64_t j = i - length / 2; j <= i + length / 2; ++j) {
      int64_t r = j;
      while (r < 0 || r >= n) {
        if (r < 0) r = -r;
        if (r >= n) r = 2 * (n - 1) - r;
      }
      w.push_back(track[r]);
    }
    std::sort(w.begin(), w.end());
    out[i] = w[w.size() / 2];
  }
  return out;
}

// PSDS by direct enumeration. Every (detection, ground-truth) pair is
// examined per class and operating point; the effective-TPR staircase is
// integrated by scanning its breakpoints.
inline double psds_brute_force(
    const std::vector<tapsed::eval::EventList>& detections_per_op,
    const tapsed::eval::EventList& ground_truth, int n_classes,
    const tapsed::eval::PsdsConfig& cfg, double hours) {
  using tapsed::eval::EventInterval;
  std::vector<int> classes;
  for (int c = 0; c < n_classes; ++c) {
    bool any = false;
    for (const auto& g : ground_truth)
      if (g.cls == c) any = true;
    if (any) classes.push_back(c);
  }
  if (classes.empty()) return 0.0;

  auto inter = [](const EventInterval& a, const EventInterval& b) {
    const double lo = std::max(a.onset, b.onset);
    const double hi = std::min(a.offset, b.offset);
    return hi > lo ? hi - lo : 0.0;
  };

  // points[class] = list of (rate, tpr)
  std::map<int, std::vector<std::pair<double, double>>> points;
  for (const auto& dets : detections_per_op) {
    for (int c : classes) {
      std::vector<EventInterval> dc, gc;
      for (const auto& d : dets)
        if (d.cls == c) dc.push_back(d);
      for (const auto& g : ground_truth)
        if (g.cls == c) gc.push_back(g);
      std::vector<bool> valid(dc.size(), false);
      int64_t fp = 0;
      for (size_t i = 0; i < dc.size(); ++i) {
        double covered = 0.0;
        for (const auto& g : gc)
          if (g.clip == dc[i].clip) covered += inter(dc[i], g);
        if (dc[i].offset > dc[i].onset &&
            covered / (dc[i].offset - dc[i].onset) >= cfg.dtc)
          valid[i] = true;
        else
          ++fp;
      }
      int64_t tp = 0;
      for (const auto& g : gc) {
        double covered = 0.0;
        for (size_t i = 0; i < dc.size(); ++i)
          if (valid[i] && dc[i].clip == g.clip) covered += inter(dc[i], g);
        if (covered / (g.offset - g.onset) >= cfg.gtc) ++tp;
      }
      points[c].push_back({static_cast<double>(fp) / hours,
                           static_cast<double>(tp) / gc.size()});
    }
  }

  std::set<double> breakpoints{0.0, cfg.e_max};
  for (const auto& [c, pts] : points)
    for (const auto& [rate, tpr] : pts)
      if (rate <= cfg.e_max) breakpoints.insert(rate);
  const std::vector<double> grid(breakpoints.begin(), breakpoints.end());

  double area = 0.0;
  for (size_t i = 0; i + 1 < grid.size(); ++i) {
    std::vector<double> vals;
    for (int c : classes) {
      double best = 0.0;
      for (const auto& [rate, tpr] : points[c])
        if (rate <= grid[i] && tpr > best) best = tpr;
      vals.push_back(best);
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= vals.size();
    const double etpr = std::max(0.0, mean - cfg.alpha_st * std::sqrt(var));
    area += (grid[i + 1] - grid[i]) * etpr;
  }
  return area / cfg.e_max;
}

}  // namespace oracles
