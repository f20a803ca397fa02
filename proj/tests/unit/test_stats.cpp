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

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "tapsed/eval/stats.hpp"

using namespace tapsed::eval;

TEST_CASE("identical groups give F = 0, p = 1 and an all-equal ordering") {
  const std::vector<std::vector<double>> groups = {
      {1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}};
  const auto anova = anova_oneway(groups);
  CHECK(anova.f == doctest::Approx(0.0));
  CHECK(anova.p == doctest::Approx(1.0));
  const auto tukey = tukey_hsd(groups);
  CHECK(tukey_ordering(tukey, {"a", "b", "c"}) == "a = b = c");
}

TEST_CASE("textbook F statistic on three small groups") {
  const std::vector<std::vector<double>> groups = {
      {1.0, 2.0, 3.0}, {2.0, 3.0, 4.0}, {10.0, 11.0, 12.0}};
  // Direct computation from sums of squares: group means 2, 3, 11; grand
  // mean 16/3. SSB = 3[(10/3)^2 + (7/3)^2 + (17/3)^2] = 146, SSW = 6,
  // F = (146/2) / (6/6) = 73.
  const auto anova = anova_oneway(groups);
  CHECK(anova.f == doctest::Approx(73.0).epsilon(1e-12));
  CHECK(anova.df_between == 2);
  CHECK(anova.df_within == 6);
  CHECK(anova.p < 1e-4);
  CHECK(anova.p > 0.0);

  // Translation invariance of F.
  std::vector<std::vector<double>> shifted = groups;
  for (auto& g : shifted)
    for (auto& v : g) v += 17.5;
  CHECK(anova_oneway(shifted).f == doctest::Approx(73.0).epsilon(1e-9));

  // The far-separated group is significantly above both others.
  const auto tukey = tukey_hsd(groups);
  CHECK(tukey.significant[2][0]);
  CHECK(tukey.significant[2][1]);
  CHECK_FALSE(tukey.significant[0][1]);
  const std::string order = tukey_ordering(tukey, {"g1", "g2", "g3"});
  CHECK(order.find("g3") > order.find("g1"));
  CHECK(order.find(" < g3") != std::string::npos);
}

TEST_CASE("degenerate and invalid inputs") {
  CHECK_THROWS_AS(anova_oneway({{1.0, 2.0}}), std::invalid_argument);
  CHECK_THROWS_AS(anova_oneway({{1.0}, {2.0, 3.0}}), std::invalid_argument);
  // Zero within-group variance with distinct means: infinite separation.
  const auto sep = anova_oneway({{1.0, 1.0}, {2.0, 2.0}});
  CHECK(std::isinf(sep.f));
  CHECK(sep.p == doctest::Approx(0.0));
}

TEST_CASE("regularized incomplete beta identities") {
  for (double a : {0.5, 1.0, 3.0, 7.5})
    for (double b : {0.5, 2.0, 6.0})
      for (double x : {0.05, 0.3, 0.62, 0.9})
        CHECK(betainc_reg(a, b, x) + betainc_reg(b, a, 1.0 - x) ==
              doctest::Approx(1.0).epsilon(1e-10));
  // I_x(1, 1) = x.
  CHECK(betainc_reg(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("F-distribution tail probabilities hit published quantiles") {
  // 95th percentile of F(2,12) is 3.8853; the survival there is 0.05.
  CHECK(f_survival(3.8853, 2, 12) == doctest::Approx(0.05).epsilon(2e-3));
  // 95th percentile of F(4,20) is 2.8661.
  CHECK(f_survival(2.8661, 4, 20) == doctest::Approx(0.05).epsilon(2e-3));
  CHECK(f_survival(0.0, 3, 10) == doctest::Approx(1.0));
}

TEST_CASE("studentized range critical values match the published table") {
  // q(0.05; k=3, df=12) = 3.77 in standard tables.
  CHECK(studentized_range_critical(3, 12) == doctest::Approx(3.77).epsilon(2e-3));
  CHECK(studentized_range_critical(2, 5) == doctest::Approx(3.64).epsilon(2e-3));
  // Between tabulated rows: round down conservatively (df 25 -> row 24).
  CHECK(studentized_range_critical(4, 25) ==
        doctest::Approx(studentized_range_critical(4, 24)));
  // Very large df approaches the asymptotic row.
  CHECK(studentized_range_critical(10, 100000) ==
        doctest::Approx(4.4741).epsilon(1e-6));
}

TEST_CASE("tukey significance flips across the critical boundary") {
  // Three groups of five samples: df_within = 12, k = 3, q_crit = 3.7729.
  // With MSw = 1 and n = 5, the mean gap at the boundary is
  // q_crit * sqrt(1/5) = 1.6873. Place two groups just inside / outside.
  auto make_group = [](double mean) {
    // Five samples with mean `mean` and sample variance 1.
    return std::vector<double>{mean - 1.2649110640673518,
                               mean - 0.6324555320336759, mean,
                               mean + 0.6324555320336759,
                               mean + 1.2649110640673518};
  };
  const double q_crit = studentized_range_critical(3, 12);
  const double boundary = q_crit * std::sqrt(1.0 / 5.0);
  {
    const auto groups = {make_group(0.0), make_group(0.0),
                         make_group(boundary * 1.05)};
    const auto tukey = tukey_hsd({groups.begin(), groups.end()});
    CHECK(tukey.significant[0][2]);
  }
  {
    const auto groups = {make_group(0.0), make_group(0.0),
                         make_group(boundary * 0.95)};
    const auto tukey = tukey_hsd({groups.begin(), groups.end()});
    CHECK_FALSE(tukey.significant[0][2]);
  }
}

TEST_CASE("ordering string distinguishes equal, close and separated groups") {
  auto noise = [](double mean, int n, double spread) {
    std::vector<double> g;
    for (int i = 0; i < n; ++i)
      g.push_back(mean + spread * ((i % 2 == 0) ? 1.0 : -1.0));
    return g;
  };
  const std::vector<std::vector<double>> groups = {
      noise(0.0, 6, 0.5), noise(0.05, 6, 0.5), noise(5.0, 6, 0.5)};
  const auto tukey = tukey_hsd(groups);
  const std::string order = tukey_ordering(tukey, {"a", "b", "c"});
  CHECK(order == "a = b < c");
}
