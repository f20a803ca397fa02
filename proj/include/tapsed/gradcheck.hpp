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

// Central finite-difference gradient checking. The closure is evaluated as a
// pure function of the perturbed leaf tensors; the analytic gradient comes
// from one taped forward + backward. Always runs in double.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tapsed/rng.hpp"
#include "tapsed/tensor.hpp"

namespace tapsed {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_leaf;
  bool ok(double tol) const { return max_rel_err < tol; }
};

// forward(tape) must rebuild the graph from the current leaf values and
// return a scalar loss. Leaves must be tracked tensors.
//
// Elements whose first estimate disagrees are re-measured with a 32x tighter
// step: a perturbation that crosses a piecewise-linear kink (ReLU) produces
// a spurious mismatch that vanishes at smaller steps, while a genuinely
// wrong analytic gradient persists at every step.
template <class T = double>
GradCheckResult gradcheck(
    const std::function<Tensor<T>(Tape<T>*)>& forward,
    const std::vector<std::pair<std::string, Tensor<T>>>& leaves,
    double step = 1e-5) {
  for (auto& [name, leaf] : leaves) {
    (void)name;
    const_cast<Tensor<T>&>(leaf).set_tracked(true);
    const_cast<Tensor<T>&>(leaf).zero_grad();
  }
  Tape<T> tape;
  Tensor<T> loss = forward(&tape);
  tape.backward(loss);

  // Errors are judged relative to the gradient scale of the whole problem,
  // so a parameter with a structurally zero gradient (a conv bias absorbed
  // by batch norm, a logit shift erased by softmax) is compared against the
  // typical gradient magnitude rather than against numerical noise.
  double ref_scale = 0.0;
  for (auto& [name, leaf] : leaves) {
    (void)name;
    auto& t = const_cast<Tensor<T>&>(leaf);
    for (int64_t i = 0; i < t.numel(); ++i)
      ref_scale = std::max(ref_scale, std::abs(static_cast<double>(t.grad()[i])));
  }

  GradCheckResult res;
  for (auto& [name, leaf] : leaves) {
    auto& t = const_cast<Tensor<T>&>(leaf);
    for (int64_t i = 0; i < t.numel(); ++i) {
      const T orig = t.data()[i];
      auto central = [&](double h) {
        t.data()[i] = orig + static_cast<T>(h);
        const double f_plus = static_cast<double>(forward(nullptr).item());
        t.data()[i] = orig - static_cast<T>(h);
        const double f_minus = static_cast<double>(forward(nullptr).item());
        t.data()[i] = orig;
        return (f_plus - f_minus) / (2.0 * h);
      };
      const double analytic = static_cast<double>(t.grad()[i]);
      auto rel_of = [&](double numeric) {
        const double denom = std::max({std::abs(numeric), ref_scale, 1e-8});
        return std::abs(analytic - numeric) / denom;
      };
      double rel = rel_of(central(step));
      if (rel > 1e-7) rel = std::min(rel, rel_of(central(step / 32.0)));
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_leaf = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

// Uniform values in [lo, hi], kept away from zero by |margin| when requested
// (for kinked ops such as ReLU, where a central difference straddling the
// kink is meaningless).
inline Tensor<double> random_tensor(Shape shape, SeqRng& rng, double lo = -2.0,
                                    double hi = 2.0, double margin = 0.0) {
  Tensor<double> t = Tensor<double>::zeros(std::move(shape));
  for (auto& v : t.data()) {
    do {
      v = rng.uniform(lo, hi);
    } while (margin > 0.0 && std::abs(v) < margin);
  }
  return t;
}

}  // namespace tapsed
