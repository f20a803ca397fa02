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
#include "tapsed/model.hpp"
#include "tapsed/nn.hpp"
#include "tapsed/tensor.hpp"

using namespace tapsed;
using D = double;

namespace {
Tensor<D> randu(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  SeqRng rng(seed, "randu");
  return random_tensor(std::move(shape), rng, lo, hi);
}
}  // namespace

TEST_CASE("conv2d identity kernel reproduces the input") {
  Tensor<D> x = randu({2, 3, 5, 7}, 11);
  Tensor<D> w = Tensor<D>::zeros({3, 3, 1, 1});
  for (int64_t c = 0; c < 3; ++c) w.data()[c * 3 + c] = 1.0;
  Tensor<D> b = Tensor<D>::zeros({3});
  Tensor<D> y = conv2d<D>(nullptr, x, w, &b);
  REQUIRE(y.shape() == x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d dilation reaches exactly the dilated frequency offsets") {
  // Delta input; 3x3 kernel of ones with freq dilation d touches frequency
  // offsets {-d, 0, +d} only.
  for (int64_t d : {1, 2, 3}) {
    Tensor<D> x = Tensor<D>::zeros({1, 1, 9, 9});
    x.data()[(4 * 9) + 4] = 1.0;  // f=4, t=4
    Tensor<D> w = Tensor<D>::full({1, 1, 3, 3}, 1.0);
    Tensor<D> b = Tensor<D>::zeros({1});
    Tensor<D> y = conv2d<D>(nullptr, x, w, &b, d);
    for (int64_t f = 0; f < 9; ++f)
      for (int64_t t = 0; t < 9; ++t) {
        const bool hit = (f == 4 - d || f == 4 || f == 4 + d) &&
                         (t >= 3 && t <= 5);
        CHECK(y.data()[f * 9 + t] == (hit ? 1.0 : 0.0));
      }
  }
}

TEST_CASE("conv2d rejects malformed operands") {
  Tensor<D> x = randu({1, 3, 4, 4}, 1);
  Tensor<D> w_bad_ci = randu({2, 4, 3, 3}, 2);
  Tensor<D> w_even = randu({2, 3, 2, 3}, 3);
  Tensor<D> b_bad = randu({3}, 4);
  Tensor<D> w_ok = randu({2, 3, 3, 3}, 5);
  CHECK_THROWS_AS(conv2d<D>(nullptr, x, w_bad_ci, nullptr),
                  std::invalid_argument);
  CHECK_THROWS_AS(conv2d<D>(nullptr, x, w_even, nullptr),
                  std::invalid_argument);
  CHECK_THROWS_AS(conv2d<D>(nullptr, x, w_ok, &b_bad), std::invalid_argument);
}

TEST_CASE("softmax slices sum to one and are strictly positive") {
  for (uint64_t seed = 1; seed <= 25; ++seed) {
    Tensor<D> x = randu({2, 3, 6}, seed, -5.0, 5.0);
    const size_t axis = seed % 3;
    Tensor<D> s = softmax_axis<D>(nullptr, x, axis);
    int64_t outer = 1, inner = 1;
    for (size_t dd = 0; dd < axis; ++dd) outer *= x.extent(dd);
    for (size_t dd = axis + 1; dd < 3; ++dd) inner *= x.extent(dd);
    const int64_t n = x.extent(axis);
    for (int64_t a = 0; a < outer; ++a)
      for (int64_t i = 0; i < inner; ++i) {
        double sum = 0.0;
        for (int64_t j = 0; j < n; ++j) {
          const double v = s.data()[(a * n + j) * inner + i];
          CHECK(v > 0.0);
          sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
      }
  }
}

TEST_CASE("softmax limit cases") {
  Tensor<D> equal = Tensor<D>::full({1, 5}, 3.25);
  Tensor<D> s = softmax_axis<D>(nullptr, equal, 1);
  for (double v : s.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));

  Tensor<D> spread = Tensor<D>::from({1, 2}, {1e4, 0.0});
  Tensor<D> hot = softmax_axis<D>(nullptr, spread, 1);
  CHECK(hot.data()[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(hot.data()[1] < 1e-9);
}

TEST_CASE("batch norm flattens constant channels to beta") {
  Tensor<D> x = Tensor<D>::zeros({3, 2, 4, 5});
  for (int64_t b = 0; b < 3; ++b)
    for (int64_t c = 0; c < 2; ++c)
      std::fill_n(&x.data()[(b * 2 + c) * 20], 20, c == 0 ? 1.5 : -0.25);
  Tensor<D> gamma = Tensor<D>::full({2}, 1.0);
  Tensor<D> beta = Tensor<D>::from({2}, {0.7, -0.3});
  Tensor<D> y = batch_norm_train<D>(nullptr, x, gamma, beta, 1e-5, nullptr);
  for (int64_t b = 0; b < 3; ++b)
    for (int64_t c = 0; c < 2; ++c)
      for (int64_t i = 0; i < 20; ++i)
        CHECK(std::abs(y.data()[(b * 2 + c) * 20 + i] - beta.data()[c]) < 1e-5);
}

TEST_CASE("batch norm is near identity on standardized input") {
  SeqRng rng(7, "bn");
  const int64_t n = 2 * 4 * 5;
  Tensor<D> x = Tensor<D>::zeros({2, 3, 4, 5});
  for (int64_t c = 0; c < 3; ++c) {
    std::vector<double> vals(n);
    double mean = 0.0;
    for (auto& v : vals) {
      v = rng.uniform(-2.0, 2.0);
      mean += v;
    }
    mean /= n;
    double var = 0.0;
    for (auto& v : vals) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var);
    int64_t i = 0;
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t s = 0; s < 20; ++s)
        x.data()[(b * 3 + c) * 20 + s] = (vals[i++] - mean) * inv;
  }
  Tensor<D> gamma = Tensor<D>::full({3}, 1.0);
  Tensor<D> beta = Tensor<D>::zeros({3});
  Tensor<D> y = batch_norm_train<D>(nullptr, x, gamma, beta, 1e-5, nullptr);
  for (int64_t i = 0; i < x.numel(); ++i)
    CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-4));
}

TEST_CASE("batch norm rejects an empty batch and keeps running stats") {
  Tensor<D> empty = Tensor<D>::zeros({0, 2, 3, 3});
  Tensor<D> gamma = Tensor<D>::full({2}, 1.0);
  Tensor<D> beta = Tensor<D>::zeros({2});
  CHECK_THROWS_AS(
      batch_norm_train<D>(nullptr, empty, gamma, beta, 1e-5, nullptr),
      std::invalid_argument);

  BatchNormLayer<D> bn("bn", 2);
  bn.gamma.tensor.data() = {1.0, 1.0};
  Tensor<D> x = randu({4, 2, 3, 3}, 9, 1.0, 3.0);
  bn.forward(nullptr, x, /*training=*/true);
  CHECK(bn.running_mean[0] != 0.0);  // moved toward the batch mean
  CHECK(bn.running_var[0] != 1.0);
  // Eval mode uses running statistics, not batch statistics.
  Tensor<D> y_eval = bn.forward(nullptr, x, /*training=*/false);
  Tensor<D> y_train = bn.forward(nullptr, x, /*training=*/true, false);
  bool differs = false;
  for (int64_t i = 0; i < x.numel(); ++i)
    differs |= std::abs(y_eval.data()[i] - y_train.data()[i]) > 1e-9;
  CHECK(differs);
}

TEST_CASE("gru collapses to zero on zero input and zero parameters") {
  BiGru<D> gru("g", 3, 4, 2, 0.0);  // params default to zero
  Tensor<D> x = Tensor<D>::zeros({2, 5, 3});
  Tensor<D> y = gru.forward(nullptr, x, false, 0);
  REQUIRE(y.shape() == Shape{2, 5, 8});
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("single-frame gru equals one gated cell per direction") {
  SeqRng rng(21, "gru1");
  GruDirection<D> fwd("f", 3, 4, false);
  std::vector<Parameter<D>*> params{&fwd.w_ih, &fwd.w_hh, &fwd.b_ih, &fwd.b_hh};
  for (auto* p : params)
    for (auto& v : p->tensor.data()) v = rng.uniform(-0.9, 0.9);
  Tensor<D> x = randu({1, 1, 3}, 22);

  Tensor<D> y = fwd.forward(nullptr, x);
  REQUIRE(y.shape() == Shape{1, 1, 4});

  // Manual cell with zero initial state: n = tanh(gi_n + r * gh_n) and
  // h = (1 - z) * n.
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int64_t j = 0; j < 4; ++j) {
    auto gate = [&](int64_t row) {
      double gi = fwd.b_ih.tensor.data()[row];
      const double gh = fwd.b_hh.tensor.data()[row];
      for (int64_t d = 0; d < 3; ++d)
        gi += fwd.w_ih.tensor.data()[row * 3 + d] * x.data()[d];
      return std::pair<double, double>{gi, gh};
    };
    const auto [gir, ghr] = gate(j);
    const auto [giz, ghz] = gate(4 + j);
    const auto [gin, ghn] = gate(8 + j);
    const double r = sig(gir + ghr);
    const double z = sig(giz + ghz);
    const double n = std::tanh(gin + r * ghn);
    const double h = (1.0 - z) * n;
    CHECK(y.data()[j] == doctest::Approx(h).epsilon(1e-12));
  }
}

TEST_CASE("elementwise basics") {
  Tensor<D> zero = Tensor<D>::zeros({3});
  CHECK(sigmoid<D>(nullptr, zero).data()[0] == 0.5);

  Tensor<D> c = Tensor<D>::full({2, 3, 4, 6}, 2.5);
  Tensor<D> m = mean_axis<D>(nullptr, c, 3);
  for (double v : m.data()) CHECK(v == doctest::Approx(2.5).epsilon(1e-15));

  Tensor<D> x = Tensor<D>::from({4}, {-2.0, -0.5, 0.5, 2.0});
  Tensor<D> r = relu<D>(nullptr, x);
  CHECK(r.data() == std::vector<D>{0.0, 0.0, 0.5, 2.0});
}

TEST_CASE("dropout is identity in eval mode and rescales kept values") {
  DropoutLayer<D> drop("d", 0.5);
  drop.seed = 3;
  Tensor<D> x = randu({4, 8}, 31);
  Tensor<D> eval_out = drop.forward(nullptr, x, /*training=*/false, 0);
  CHECK(eval_out.data() == x.data());

  Tensor<D> a = drop.forward(nullptr, x, /*training=*/true, 5);
  Tensor<D> b = drop.forward(nullptr, x, /*training=*/true, 5);
  CHECK(a.data() == b.data());  // same (seed, name, step) => same mask
  Tensor<D> other = drop.forward(nullptr, x, /*training=*/true, 6);
  CHECK(a.data() != other.data());
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double v = a.data()[i];
    const bool kept_or_dropped =
        v == 0.0 || v == doctest::Approx(2.0 * x.data()[i]);
    CHECK(kept_or_dropped);
  }
}

TEST_CASE("forward passes are deterministic and finite") {
  Tensor<D> x = randu({2, 3, 8, 9}, 77, -3.0, 3.0);
  Tensor<D> w = randu({4, 3, 3, 3}, 78);
  Tensor<D> b = randu({4}, 79);
  Tensor<D> y1 = conv2d<D>(nullptr, x, w, &b, 2);
  Tensor<D> y2 = conv2d<D>(nullptr, x, w, &b, 2);
  CHECK(y1.data() == y2.data());
  for (double v : y1.data()) CHECK(std::isfinite(v));
  Tensor<D> s = softmax_axis<D>(nullptr, y1, 1);
  for (double v : s.data()) CHECK(std::isfinite(v));
}

TEST_CASE("linear matches a straightforward loop") {
  Tensor<D> x = randu({3, 4}, 41);
  Tensor<D> w = randu({2, 4}, 42);
  Tensor<D> b = randu({2}, 43);
  Tensor<D> y = linear<D>(nullptr, x, w, &b);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 2; ++j) {
      double acc = b.data()[j];
      for (int64_t k = 0; k < 4; ++k)
        acc += x.data()[i * 4 + k] * w.data()[j * 4 + k];
      CHECK(y.data()[i * 2 + j] == doctest::Approx(acc).epsilon(1e-12));
    }
}
