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

#include "tapsed/gradcheck.hpp"
#include "tapsed/tap.hpp"

using namespace tapsed;
using D = double;

namespace {

TapPooling<D> make_tap(uint64_t seed, int64_t channels, TapConfig cfg = {}) {
  TapPooling<D> tap("tap", channels, cfg);
  SeqRng rng(seed, "tap-params");
  tap.visit_params([&](Parameter<D>& p) {
    if (p.name.ends_with(".gamma"))
      for (auto& v : p.tensor.data()) v = 1.0;
    else if (!p.name.ends_with(".beta"))
      for (auto& v : p.tensor.data()) v = rng.uniform(-0.8, 0.8);
  });
  return tap;
}

Tensor<D> randu(Shape shape, uint64_t seed) {
  SeqRng rng(seed, "x");
  return random_tensor(std::move(shape), rng);
}

// Sums of attention-weighted salient frames plus the raw time average,
// recomputed with plain loops from the module's own alpha/beta/salient maps.
std::vector<double> pooled_by_loops(const TapOutput<D>& out,
                                    const Tensor<D>& x, bool use_ta,
                                    bool use_va, bool use_avg) {
  const int64_t nb = x.extent(0), nc = x.extent(1), nf = x.extent(2),
                nt = x.extent(3);
  std::vector<double> pooled(nb * nc * nf, 0.0);
  for (int64_t b = 0; b < nb; ++b)
    for (int64_t c = 0; c < nc; ++c)
      for (int64_t f = 0; f < nf; ++f) {
        const int64_t row = ((b * nc + c) * nf + f) * nt;
        double acc = 0.0;
        for (int64_t t = 0; t < nt; ++t) {
          if (use_ta) acc += out.alpha.data()[row + t] * out.salient.data()[row + t];
          if (use_va) acc += out.beta.data()[row + t] * out.salient.data()[row + t];
          if (use_avg) acc += x.data()[row + t] / nt;
        }
        pooled[(b * nc + c) * nf + f] = acc;
      }
  return pooled;
}

}  // namespace

TEST_CASE("salient representation lies strictly inside (0,1)") {
  TapPooling<D> tap = make_tap(5, 3);
  Tensor<D> x = randu({2, 3, 4, 6}, 6);
  const auto out = tap.forward(nullptr, x, true, false);
  for (double v : out.salient.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("zero-parameter saliency block gives exactly one half") {
  TapConfig cfg;
  TapPooling<D> tap("tap", 2, cfg);  // all weights zero
  tap.visit_params([&](Parameter<D>& p) {
    if (p.name.ends_with(".gamma"))
      for (auto& v : p.tensor.data()) v = 1.0;
  });
  Tensor<D> x = randu({1, 2, 3, 4}, 7);
  const auto out = tap.forward(nullptr, x, true, false);
  for (double v : out.salient.data())
    CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
  // Zero attention logits: uniform weights 1/T.
  for (double v : out.alpha.data())
    CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
  for (double v : out.beta.data())
    CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("attention weights normalize over time per (b,c,f) bin") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    TapPooling<D> tap = make_tap(seed, 2);
    Tensor<D> x = randu({2, 2, 3, 5}, seed + 100);
    const auto out = tap.forward(nullptr, x, true, false);
    const int64_t nt = 5;
    for (int64_t row = 0; row < out.alpha.numel() / nt; ++row) {
      double sa = 0.0, sb = 0.0;
      for (int64_t t = 0; t < nt; ++t) {
        sa += out.alpha.data()[row * nt + t];
        sb += out.beta.data()[row * nt + t];
      }
      CHECK(sa == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(sb == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("velocity branch sees zero differences on time-constant input") {
  Tensor<D> x = Tensor<D>::zeros({1, 2, 3, 6});
  for (int64_t row = 0; row < 6; ++row)
    for (int64_t t = 0; t < 6; ++t) x.data()[row * 6 + t] = 0.3 * row - 0.7;
  Tensor<D> dx = delta_time<D>(nullptr, x);
  for (double v : dx.data()) CHECK(v == 0.0);

  // A single step at t=k yields a difference only at t=k, with the step sign.
  Tensor<D> step = Tensor<D>::zeros({1, 1, 1, 8});
  for (int64_t t = 5; t < 8; ++t) step.data()[t] = 2.0;
  Tensor<D> ds = delta_time<D>(nullptr, step);
  for (int64_t t = 0; t < 8; ++t)
    CHECK(ds.data()[t] == (t == 5 ? 2.0 : 0.0));
}

TEST_CASE("disabling both attention terms reduces pooling to the average") {
  TapConfig cfg;
  cfg.use_time_attention = false;
  cfg.use_velocity_attention = false;
  TapPooling<D> tap = make_tap(9, 3, cfg);
  Tensor<D> x = randu({2, 3, 4, 7}, 10);
  const auto out = tap.forward(nullptr, x, true, false);
  Tensor<D> avg = avg_pool_time<D>(nullptr, x);
  REQUIRE(out.pooled.shape() == avg.shape());
  for (int64_t i = 0; i < avg.numel(); ++i)
    CHECK(std::abs(out.pooled.data()[i] - avg.data()[i]) < 1e-6);
}

TEST_CASE("single-frame pooling is twice the salient value plus the input") {
  TapPooling<D> tap = make_tap(11, 2);
  Tensor<D> x = randu({1, 2, 3, 1}, 12);
  const auto out = tap.forward(nullptr, x, true, false);
  for (int64_t i = 0; i < out.pooled.numel(); ++i)
    CHECK(out.pooled.data()[i] ==
          doctest::Approx(2.0 * out.salient.data()[i] + x.data()[i])
              .epsilon(1e-9));
}

TEST_CASE("pooled output equals the three-term loop computation") {
  TapPooling<D> tap = make_tap(13, 2);
  Tensor<D> x = randu({1, 2, 3, 5}, 14);
  const auto out = tap.forward(nullptr, x, true, false);
  const auto expect = pooled_by_loops(out, x, true, true, true);
  for (int64_t i = 0; i < out.pooled.numel(); ++i)
    CHECK(out.pooled.data()[i] == doctest::Approx(expect[i]).epsilon(1e-9));
}

TEST_CASE("frame permutation moves attention but not the average") {
  TapPooling<D> tap = make_tap(15, 2);
  Tensor<D> x = randu({1, 2, 2, 6}, 16);
  Tensor<D> x_perm = Tensor<D>::zeros({1, 2, 2, 6});
  const std::vector<int64_t> perm = {3, 0, 5, 1, 4, 2};
  for (int64_t row = 0; row < 4; ++row)
    for (int64_t t = 0; t < 6; ++t)
      x_perm.data()[row * 6 + perm[t]] = x.data()[row * 6 + t];

  const auto a = tap.forward(nullptr, x, true, false);
  const auto b = tap.forward(nullptr, x_perm, true, false);
  double alpha_diff = 0.0;
  for (int64_t row = 0; row < 4; ++row)
    for (int64_t t = 0; t < 6; ++t)
      alpha_diff += std::abs(b.alpha.data()[row * 6 + perm[t]] -
                             a.alpha.data()[row * 6 + t]);
  CHECK(alpha_diff > 1e-6);  // attention is time-selective

  Tensor<D> avg_a = avg_pool_time<D>(nullptr, x);
  Tensor<D> avg_b = avg_pool_time<D>(nullptr, x_perm);
  for (int64_t i = 0; i < avg_a.numel(); ++i)
    CHECK(avg_a.data()[i] == doctest::Approx(avg_b.data()[i]).epsilon(1e-12));
}

TEST_CASE("velocity attention input honors the configured variant") {
  TapConfig raw;
  raw.velocity_from_delta = false;
  TapPooling<D> tap_delta = make_tap(17, 2);
  TapPooling<D> tap_raw = make_tap(17, 2, raw);
  // Same parameters, different velocity input: betas must differ on a
  // time-varying signal.
  Tensor<D> x = randu({1, 2, 2, 5}, 18);
  const auto a = tap_delta.forward(nullptr, x, true, false);
  const auto b = tap_raw.forward(nullptr, x, true, false);
  double diff = 0.0;
  for (int64_t i = 0; i < a.beta.numel(); ++i)
    diff += std::abs(a.beta.data()[i] - b.beta.data()[i]);
  CHECK(diff > 1e-9);
}

TEST_CASE("average pooling over time") {
  Tensor<D> x = Tensor<D>::from({1, 1, 1, 3}, {1.0, 2.0, 3.0});
  CHECK(avg_pool_time<D>(nullptr, x).data()[0] == doctest::Approx(2.0));
  Tensor<D> c = Tensor<D>::full({2, 3, 4, 6}, -1.25);
  Tensor<D> cavg = avg_pool_time<D>(nullptr, c);
  for (double v : cavg.data())
    CHECK(v == doctest::Approx(-1.25).epsilon(1e-15));
  SeqRng rng(19, "avg");
  Tensor<D> r = random_tensor({2, 2, 3, 4}, rng);
  Tensor<D> avg = avg_pool_time<D>(nullptr, r);
  for (int64_t row = 0; row < 12; ++row) {
    double acc = 0.0;
    for (int64_t t = 0; t < 4; ++t) acc += r.data()[row * 4 + t];
    CHECK(avg.data()[row] == doctest::Approx(acc / 4.0).epsilon(1e-12));
  }
}
