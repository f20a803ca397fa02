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

// One-way ANOVA with F-distribution p-values (regularized incomplete beta)
// and Tukey HSD pairwise comparisons against tabulated studentized-range
// critical values at alpha = 0.05. Also renders the compact ordering
// notation used in classwise comparisons: groups sorted by mean joined with
// "=" (clearly indistinguishable), "<=" (separated but not significant) or
// "<" (significant at 0.05).

#include <cstdint>
#include <string>
#include <vector>

namespace tapsed::eval {

struct AnovaResult {
  double f = 0.0;
  double p = 1.0;
  double ms_within = 0.0;
  int64_t df_between = 0;
  int64_t df_within = 0;
};

// Requires >= 2 groups with >= 2 samples each. Degenerate data (zero
// between- and within-group variance) yields F = 0, p = 1.
AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups);

struct TukeyResult {
  std::vector<std::vector<double>> q;          // pairwise studentized range
  std::vector<std::vector<bool>> significant;  // q >= critical value
  double q_critical = 0.0;
  std::vector<double> means;
};

TukeyResult tukey_hsd(const std::vector<std::vector<double>>& groups);

// "baseline < fdy = tfd" style summary; names parallel to groups.
std::string tukey_ordering(const TukeyResult& tukey,
                           const std::vector<std::string>& names);

// Regularized incomplete beta I_x(a, b), |error| < ~1e-10 for the F-test
// parameter ranges used here (documented tolerance 1e-8).
double betainc_reg(double a, double b, double x);

// Upper-tail F-distribution probability P(F_{d1,d2} > f).
double f_survival(double f, double d1, double d2);

// Studentized range critical value q(0.05; k groups, df); table lookup with
// conservative rounding down to the nearest tabulated df.
double studentized_range_critical(int64_t k, int64_t df);

}  // namespace tapsed::eval
