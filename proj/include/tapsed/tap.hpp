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

// Temporal attention pooling (TAP). Pools a [B,C,F,T] map over time into a
// [B,C,F] context as the sum of three terms:
//
//   time attention:      sum_t alpha_t . x_salient_t
//   velocity attention:  sum_t beta_t  . x_salient_t
//   average pooling:     mean_t x_t           (raw input, not the salient map)
//
// alpha and beta are softmax-normalized over time per (batch, channel,
// frequency) bin; the velocity branch sees the temporal difference of the
// input (first frame zero) so a time-constant signal contributes nothing.
// With the attention terms disabled, TAP reduces exactly to temporal average
// pooling.

#include <optional>
#include <string>

#include "tapsed/model_config.hpp"
#include "tapsed/nn.hpp"
#include "tapsed/tensor.hpp"

namespace tapsed {

template <class T>
struct TapOutput {
  Tensor<T> pooled;   // [B,C,F]
  Tensor<T> alpha;    // [B,C,F,T], defined when time attention is enabled
  Tensor<T> beta;     // [B,C,F,T], defined when velocity attention is enabled
  Tensor<T> salient;  // [B,C,F,T], defined when either attention is enabled
};

// conv(kxk, C -> C/div, no bias) -> BN -> ReLU -> conv(kxk, -> C, bias)
template <class T>
struct TapBranchBlock {
  Conv2dLayer<T> squeeze;
  BatchNormLayer<T> bn;
  Conv2dLayer<T> expand;

  TapBranchBlock() = default;
  TapBranchBlock(const std::string& prefix, int64_t channels,
                 const TapConfig& cfg) {
    const int64_t hidden = std::max<int64_t>(1, channels / cfg.hidden_divisor);
    squeeze = Conv2dLayer<T>(prefix + ".squeeze", channels, hidden,
                             cfg.first_kernel, cfg.first_kernel, false);
    bn = BatchNormLayer<T>(prefix + ".bn", hidden);
    expand = Conv2dLayer<T>(prefix + ".expand", hidden, channels,
                            cfg.second_kernel, cfg.second_kernel, true);
  }

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, bool training,
                    bool update_stats) {
    Tensor<T> h = squeeze.forward(tape, x);
    h = bn.forward(tape, h, training, update_stats);
    h = relu(tape, h);
    return expand.forward(tape, h);
  }

  void visit_params(const ParamVisitor<T>& fn) {
    squeeze.visit_params(fn);
    bn.visit_params(fn);
    expand.visit_params(fn);
  }
  void visit_buffers(const BufferVisitor& fn) { bn.visit_buffers(fn); }
};

template <class T>
struct TapPooling {
  TapConfig cfg;
  TapBranchBlock<T> saliency;
  TapBranchBlock<T> time_att;
  TapBranchBlock<T> vel_att;

  TapPooling() = default;
  TapPooling(const std::string& prefix, int64_t channels, const TapConfig& c)
      : cfg(c),
        saliency(prefix + ".saliency", channels, c),
        time_att(prefix + ".time_att", channels, c),
        vel_att(prefix + ".vel_att", channels, c) {}

  // x: [B,C,F,T]
  TapOutput<T> forward(Tape<T>* tape, const Tensor<T>& x, bool training,
                       bool update_stats = true) {
    TapOutput<T> out;
    const size_t time_axis = 3;
    const bool need_salient = cfg.use_time_attention || cfg.use_velocity_attention;
    if (need_salient)
      out.salient =
          sigmoid(tape, saliency.forward(tape, x, training, update_stats));

    Tensor<T> pooled;
    auto accumulate = [&](const Tensor<T>& term) {
      pooled = pooled.defined() ? add(tape, pooled, term) : term;
    };
    if (cfg.use_time_attention) {
      out.alpha = softmax_axis(
          tape, time_att.forward(tape, x, training, update_stats), time_axis);
      accumulate(sum_axis(tape, mul(tape, out.alpha, out.salient), time_axis));
    }
    if (cfg.use_velocity_attention) {
      Tensor<T> vel_in = cfg.velocity_from_delta ? delta_time(tape, x) : x;
      out.beta = softmax_axis(
          tape, vel_att.forward(tape, vel_in, training, update_stats),
          time_axis);
      accumulate(sum_axis(tape, mul(tape, out.beta, out.salient), time_axis));
    }
    if (cfg.use_average) accumulate(mean_axis(tape, x, time_axis));
    TAPSED_CHECK(pooled.defined(), "tap: all pooling components disabled");
    out.pooled = pooled;
    return out;
  }

  void visit_params(const ParamVisitor<T>& fn) {
    saliency.visit_params(fn);
    time_att.visit_params(fn);
    vel_att.visit_params(fn);
  }
  void visit_buffers(const BufferVisitor& fn) {
    saliency.visit_buffers(fn);
    time_att.visit_buffers(fn);
    vel_att.visit_buffers(fn);
  }
};

// Plain temporal average pooling: [B,C,F,T] -> [B,C,F].
template <class T>
Tensor<T> avg_pool_time(Tape<T>* tape, const Tensor<T>& x) {
  TAPSED_CHECK(x.rank() == 4, "avg_pool_time: input must be rank 4");
  return mean_axis(tape, x, 3);
}

}  // namespace tapsed
