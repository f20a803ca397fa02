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

#include "tapsed/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tapsed::eval {

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
  const double tiny = 1e-300;
  const int max_iter = 500;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-14) break;
  }
  return h;
}

// alpha = 0.05 studentized range critical values; rows over df, columns over
// k = 2..10 groups.
constexpr int kQTableK = 9;
const int64_t kQTableDf[] = {2,  3,  4,  5,  6,  7,  8,  9,  10, 11, 12, 13,
                             14, 15, 16, 17, 18, 19, 20, 24, 30, 40, 60, 120};
const double kQTable[][kQTableK] = {
    {6.0849, 8.3308, 9.7980, 10.8811, 11.7343, 12.4349, 13.0273, 13.5390, 13.9885},
    {4.5007, 5.9096, 6.8245, 7.5017, 8.0371, 8.4783, 8.8525, 9.1766, 9.4620},
    {3.9265, 5.0402, 5.7571, 6.2870, 6.7064, 7.0526, 7.3465, 7.6015, 7.8263},
    {3.6354, 4.6017, 5.2183, 5.6731, 6.0329, 6.3299, 6.5823, 6.8014, 6.9947},
    {3.4605, 4.3392, 4.8956, 5.3049, 5.6284, 5.8953, 6.1222, 6.3192, 6.4931},
    {3.3441, 4.1649, 4.6813, 5.0601, 5.3591, 5.6057, 5.8153, 5.9973, 6.1579},
    {3.2612, 4.0410, 4.5288, 4.8858, 5.1672, 5.3991, 5.5962, 5.7673, 5.9183},
    {3.1992, 3.9485, 4.4149, 4.7554, 5.0235, 5.2444, 5.4319, 5.5947, 5.7384},
    {3.1511, 3.8768, 4.3266, 4.6543, 4.9120, 5.1242, 5.3042, 5.4605, 5.5984},
    {3.1127, 3.8196, 4.2561, 4.5736, 4.8230, 5.0281, 5.2021, 5.3531, 5.4863},
    {3.0813, 3.7729, 4.1987, 4.5077, 4.7502, 4.9496, 5.1187, 5.2653, 5.3946},
    {3.0552, 3.7341, 4.1509, 4.4529, 4.6897, 4.8842, 5.0491, 5.1921, 5.3181},
    {3.0332, 3.7014, 4.1105, 4.4066, 4.6385, 4.8290, 4.9903, 5.1301, 5.2534},
    {3.0143, 3.6734, 4.0760, 4.3670, 4.5947, 4.7816, 4.9399, 5.0770, 5.1979},
    {2.9980, 3.6491, 4.0461, 4.3327, 4.5568, 4.7406, 4.8962, 5.0310, 5.1498},
    {2.9837, 3.6280, 4.0200, 4.3027, 4.5237, 4.7048, 4.8580, 4.9907, 5.1077},
    {2.9712, 3.6093, 3.9970, 4.2763, 4.4944, 4.6731, 4.8243, 4.9552, 5.0705},
    {2.9600, 3.5927, 3.9766, 4.2528, 4.4685, 4.6450, 4.7944, 4.9236, 5.0375},
    {2.9500, 3.5779, 3.9583, 4.2319, 4.4452, 4.6199, 4.7676, 4.8954, 5.0079},
    {2.9188, 3.5317, 3.9013, 4.1663, 4.3727, 4.5413, 4.6838, 4.8069, 4.9152},
    {2.8882, 3.4864, 3.8454, 4.1021, 4.3015, 4.4642, 4.6014, 4.7199, 4.8241},
    {2.8582, 3.4421, 3.7907, 4.0391, 4.2316, 4.3885, 4.5205, 4.6345, 4.7345},
    {2.8288, 3.3987, 3.7371, 3.9774, 4.1632, 4.3141, 4.4411, 4.5504, 4.6463},
    {2.8000, 3.3561, 3.6846, 3.9169, 4.0960, 4.2412, 4.3630, 4.4678, 4.5595},
};
const double kQTableInf[kQTableK] = {2.7718, 3.3145, 3.6332, 3.8577, 4.0301,
                                     4.1696, 4.2863, 4.3865, 4.4741};

}  // namespace

double betainc_reg(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
  if (f <= 0.0) return 1.0;
  return betainc_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2)
    throw std::invalid_argument("anova: need at least 2 groups");
  int64_t n_total = 0;
  double grand_sum = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2)
      throw std::invalid_argument("anova: each group needs >= 2 samples");
    n_total += static_cast<int64_t>(g.size());
    grand_sum += std::accumulate(g.begin(), g.end(), 0.0);
  }
  const double grand_mean = grand_sum / static_cast<double>(n_total);
  double ss_between = 0.0, ss_within = 0.0;
  for (const auto& g : groups) {
    const double mean =
        std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    ss_between += static_cast<double>(g.size()) * (mean - grand_mean) *
                  (mean - grand_mean);
    for (double v : g) ss_within += (v - mean) * (v - mean);
  }
  AnovaResult res;
  res.df_between = static_cast<int64_t>(groups.size()) - 1;
  res.df_within = n_total - static_cast<int64_t>(groups.size());
  res.ms_within = ss_within / static_cast<double>(res.df_within);
  const double ms_between = ss_between / static_cast<double>(res.df_between);
  if (ss_within == 0.0 && ss_between == 0.0) {
    res.f = 0.0;  // fully degenerate data
    res.p = 1.0;
    return res;
  }
  if (ss_within == 0.0) {
    res.f = std::numeric_limits<double>::infinity();
    res.p = 0.0;
    return res;
  }
  res.f = ms_between / res.ms_within;
  res.p = f_survival(res.f, static_cast<double>(res.df_between),
                     static_cast<double>(res.df_within));
  return res;
}

double studentized_range_critical(int64_t k, int64_t df) {
  if (k < 2) throw std::invalid_argument("studentized range: k must be >= 2");
  const int col = static_cast<int>(std::min<int64_t>(k, 2 + kQTableK - 1)) - 2;
  if (df > kQTableDf[std::size(kQTableDf) - 1]) return kQTableInf[col];
  // Round down to the nearest tabulated df (larger critical value).
  int row = 0;
  for (size_t i = 0; i < std::size(kQTableDf); ++i)
    if (kQTableDf[i] <= df) row = static_cast<int>(i);
  if (df < kQTableDf[0])
    throw std::invalid_argument("studentized range: df must be >= 2");
  return kQTable[row][col];
}

TukeyResult tukey_hsd(const std::vector<std::vector<double>>& groups) {
  const AnovaResult anova = anova_oneway(groups);
  const size_t k = groups.size();
  TukeyResult res;
  res.means.resize(k);
  res.q.assign(k, std::vector<double>(k, 0.0));
  res.significant.assign(k, std::vector<bool>(k, false));
  res.q_critical =
      studentized_range_critical(static_cast<int64_t>(k), anova.df_within);
  for (size_t i = 0; i < k; ++i)
    res.means[i] = std::accumulate(groups[i].begin(), groups[i].end(), 0.0) /
                   static_cast<double>(groups[i].size());
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      // Tukey-Kramer standard error for unequal group sizes.
      const double se = std::sqrt(
          anova.ms_within / 2.0 *
          (1.0 / static_cast<double>(groups[i].size()) +
           1.0 / static_cast<double>(groups[j].size())));
      const double q = se > 0.0
                           ? std::abs(res.means[i] - res.means[j]) / se
                           : (res.means[i] == res.means[j]
                                  ? 0.0
                                  : std::numeric_limits<double>::infinity());
      res.q[i][j] = q;
      res.significant[i][j] = q >= res.q_critical;
    }
  return res;
}

std::string tukey_ordering(const TukeyResult& tukey,
                           const std::vector<std::string>& names) {
  const size_t k = tukey.means.size();
  if (names.size() != k)
    throw std::invalid_argument("tukey_ordering: name count mismatch");
  std::vector<size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return tukey.means[a] < tukey.means[b];
  });
  std::string out = names[order[0]];
  for (size_t i = 1; i < k; ++i) {
    const size_t a = order[i - 1], b = order[i];
    const double ratio =
        tukey.q_critical > 0.0 ? tukey.q[a][b] / tukey.q_critical : 0.0;
    const char* sep = ratio >= 1.0 ? " < " : (ratio >= 0.5 ? " <= " : " = ");
    out += sep;
    out += names[b];
  }
  return out;
}

}  // namespace tapsed::eval
