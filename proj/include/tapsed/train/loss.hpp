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

// Semi-supervised loss: BCE on strong-labeled frames, weighted BCE on weak
// clip labels, and a ramped mean-teacher consistency term
//
//   L = BCE(strong_s, l_s) + w_w * BCE(weak_s, l_w) + w_c * L_C
//   L_C = MSE(strong_s, strong_T) + MSE(weak_s, weak_T)
//
// The teacher is an EMA copy of the student and carries no gradients; by
// default the student side of L_C is trainable (conventional mean teacher).
// The literal stop-gradient-on-student reading is available via
// detach_teacher = false, in which case L_C contributes no gradient at all.

#include <cmath>
#include <map>
#include <string>

#include "tapsed/model.hpp"
#include "tapsed/tensor.hpp"

namespace tapsed {

// w_c(epoch) = max * exp(-5 (1 - min(epoch/ramp, 1))^2): ~0 at epoch 0,
// exactly `max` from `ramp_epochs` on, nondecreasing.
inline double consistency_ramp(int64_t epoch, double w_max = 2.0,
                               int64_t ramp_epochs = 50) {
  const double frac =
      std::min(1.0, static_cast<double>(epoch) /
                        static_cast<double>(ramp_epochs));
  return w_max * std::exp(-5.0 * (1.0 - frac) * (1.0 - frac));
}

template <class T>
Tensor<T> consistency_loss(Tape<T>* tape, const Predictions<T>& student,
                           const Predictions<T>& teacher) {
  Tensor<T> ls = mse_mean(tape, student.strong, teacher.strong);
  Tensor<T> lw = mse_mean(tape, student.weak, teacher.weak);
  return add(tape, ls, lw);
}

template <class T>
struct LossBreakdown {
  Tensor<T> total;
  double strong = 0.0;
  double weak = 0.0;
  double consistency = 0.0;
  double w_c = 0.0;
};

// student/teacher predictions cover the whole composed batch; the strong BCE
// sees only the first n_strong clips, the weak BCE the next n_weak.
template <class T>
LossBreakdown<T> total_loss(Tape<T>* tape, const Predictions<T>& student,
                            const Predictions<T>& teacher,
                            const Tensor<T>& strong_labels,
                            const Tensor<T>& weak_labels, int64_t n_strong,
                            int64_t n_weak, double w_weak, double w_cons,
                            bool detach_teacher = true) {
  Tensor<T> strong_pred = slice_axis(tape, student.strong, 0, 0, n_strong);
  Tensor<T> weak_pred = slice_axis(tape, student.weak, 0, n_strong, n_weak);
  Tensor<T> l_strong = bce_mean(tape, strong_pred, strong_labels);
  Tensor<T> l_weak = bce_mean(tape, weak_pred, weak_labels);
  Tensor<T> l_cons;
  if (detach_teacher) {
    l_cons = consistency_loss(tape, student, teacher);
  } else {
    // Literal stop-gradient on the student: evaluate off-tape.
    l_cons = consistency_loss<T>(nullptr, student, teacher);
  }
  LossBreakdown<T> out;
  out.strong = static_cast<double>(l_strong.item());
  out.weak = static_cast<double>(l_weak.item());
  out.consistency = static_cast<double>(l_cons.item());
  out.w_c = w_cons;
  Tensor<T> weighted =
      add(tape, l_strong, scale(tape, l_weak, static_cast<T>(w_weak)));
  if (detach_teacher) {
    out.total = add(tape, weighted, scale(tape, l_cons, static_cast<T>(w_cons)));
  } else {
    Tensor<T> constant =
        Tensor<T>::scalar(static_cast<T>(w_cons * out.consistency));
    out.total = add(tape, weighted, constant);
  }
  return out;
}

// theta_teacher <- decay * theta_teacher + (1 - decay) * theta_student,
// matched by parameter name. Throws on any mismatch.
template <class T>
void ema_update(SedModel<T>& teacher, SedModel<T>& student, double decay) {
  std::map<std::string, Tensor<T>*> student_params;
  student.visit_params(
      [&](Parameter<T>& p) { student_params[p.name] = &p.tensor; });
  size_t seen = 0;
  teacher.visit_params([&](Parameter<T>& p) {
    auto it = student_params.find(p.name);
    TAPSED_CHECK(it != student_params.end(),
                 "ema: teacher parameter '" + p.name + "' missing in student");
    TAPSED_CHECK(it->second->shape() == p.tensor.shape(),
                 "ema: shape mismatch for '" + p.name + "'");
    auto& tv = p.tensor.data();
    const auto& sv = it->second->data();
    for (size_t i = 0; i < tv.size(); ++i)
      tv[i] = static_cast<T>(decay * tv[i] + (1.0 - decay) * sv[i]);
    ++seen;
  });
  TAPSED_CHECK(seen == student_params.size(),
               "ema: student has parameters unknown to the teacher");
}

// Running statistics follow the same EMA so the teacher stays usable in eval
// mode.
template <class T>
void ema_update_buffers(SedModel<T>& teacher, SedModel<T>& student,
                        double decay) {
  std::map<std::string, std::vector<double>*> sbufs;
  student.visit_buffers(
      [&](const StatBuffer& b) { sbufs[b.name] = b.values; });
  teacher.visit_buffers([&](const StatBuffer& b) {
    auto it = sbufs.find(b.name);
    TAPSED_CHECK(it != sbufs.end(), "ema: buffer '" + b.name + "' missing");
    auto& tv = *b.values;
    const auto& sv = *it->second;
    for (size_t i = 0; i < tv.size(); ++i)
      tv[i] = decay * tv[i] + (1.0 - decay) * sv[i];
  });
}

}  // namespace tapsed
