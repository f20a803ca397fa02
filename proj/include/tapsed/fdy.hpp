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

// Frequency-dynamic convolution layers. A dynamic branch keeps K basis
// kernels (3x3, per-kernel frequency dilation, no bias) and blends their
// outputs per frequency row with attention weights derived from a pooled
// time context, so the effective kernel varies across frequency. Variants:
//
//   fdy   one all-dynamic branch, average-pooled context
//   dfd   fdy with dilated basis kernels
//   pfd   static conv branch + one dynamic branch, concatenated channels
//   mdfd  static branch + several dynamic branches with their own dilations
//   tfd   fdy whose context comes from temporal attention pooling
//
// Each dynamic branch owns its attention head, and owns its TAP module when
// attention-pooled context is configured; the parameter-free average context
// is computed once per layer and shared.

#include <optional>
#include <string>
#include <vector>

#include "tapsed/model_config.hpp"
#include "tapsed/nn.hpp"
#include "tapsed/tap.hpp"
#include "tapsed/tensor.hpp"

namespace tapsed {

// Kernel attention head: context [B,C,F] -> weights [B,K,F] that sum to one
// over K for every frequency bin. Two frequency-axis convolutions of extent
// 3 with a squeezed hidden width, then a tempered softmax over K.
template <class T>
struct KernelAttention {
  Conv2dLayer<T> squeeze;  // (3,1), C -> hidden, no bias
  BatchNormLayer<T> bn;
  Conv2dLayer<T> expand;   // (3,1), hidden -> K, bias
  double temperature = 31.0;
  int64_t basis_kernels = 0;

  KernelAttention() = default;
  KernelAttention(const std::string& prefix, int64_t channels, int64_t k,
                  double temp, int64_t hidden_divisor)
      : temperature(temp), basis_kernels(k) {
    const int64_t hidden = std::max<int64_t>(4, channels / hidden_divisor);
    squeeze = Conv2dLayer<T>(prefix + ".squeeze", channels, hidden, 3, 1, false);
    bn = BatchNormLayer<T>(prefix + ".bn", hidden);
    expand = Conv2dLayer<T>(prefix + ".expand", hidden, k, 3, 1, true);
  }

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& context, bool training,
                    bool update_stats = true) {
    TAPSED_CHECK(context.rank() == 3, "kernel_attention: context must be [B,C,F]");
    const int64_t b = context.extent(0), c = context.extent(1),
                  f = context.extent(2);
    Tensor<T> h = reshape(tape, context, {b, c, f, 1});
    h = squeeze.forward(tape, h);
    h = bn.forward(tape, h, training, update_stats);
    h = relu(tape, h);
    h = expand.forward(tape, h);
    h = scale(tape, h, static_cast<T>(1.0 / temperature));
    h = softmax_axis(tape, h, 1);  // over the K basis kernels
    return reshape(tape, h, {b, basis_kernels, f});
  }

  void visit_params(const ParamVisitor<T>& fn) {
    squeeze.visit_params(fn);
    bn.visit_params(fn);
    expand.visit_params(fn);
  }
  void visit_buffers(const BufferVisitor& fn) { bn.visit_buffers(fn); }
};

// Blends K per-basis convolutions with per-frequency attention:
//   out[b,co,f,t] = sum_k attn[b,k,f] * (x * basis_k)[b,co,f,t]
template <class T>
Tensor<T> fdy_forward(Tape<T>* tape, const Tensor<T>& x,
                      const std::vector<Conv2dLayer<T>>& basis,
                      const Tensor<T>& attention) {
  std::vector<Tensor<T>> ys;
  ys.reserve(basis.size());
  for (const auto& conv : basis) ys.push_back(conv.forward(tape, x));
  return blend_freq(tape, ys, attention);
}

template <class T>
struct FdyBranch {
  std::vector<Conv2dLayer<T>> basis;
  KernelAttention<T> head;
  std::optional<TapPooling<T>> tap;  // set when the branch pools with TAP

  FdyBranch() = default;
  FdyBranch(const std::string& prefix, int64_t in_ch, int64_t out_ch,
            const DynBranchConfig& bc, const FdyLayerConfig& lc) {
    for (int64_t k = 0; k < bc.basis_kernels; ++k)
      basis.emplace_back(prefix + ".basis" + std::to_string(k), in_ch, out_ch,
                         3, 3, false, bc.dilations[k]);
    head = KernelAttention<T>(prefix + ".head", in_ch, bc.basis_kernels,
                              lc.attention_temperature,
                              lc.attention_hidden_divisor);
    if (lc.context == ContextPooling::kTap)
      tap.emplace(prefix + ".tap", in_ch, lc.tap);
  }

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x,
                    const Tensor<T>& shared_avg_context, bool training,
                    bool update_stats) {
    Tensor<T> context = tap ? tap->forward(tape, x, training, update_stats).pooled
                            : shared_avg_context;
    Tensor<T> attn = head.forward(tape, context, training, update_stats);
    return fdy_forward(tape, x, basis, attn);
  }

  void visit_params(const ParamVisitor<T>& fn) {
    for (auto& b : basis) b.visit_params(fn);
    head.visit_params(fn);
    if (tap) tap->visit_params(fn);
  }
  void visit_buffers(const BufferVisitor& fn) {
    head.visit_buffers(fn);
    if (tap) tap->visit_buffers(fn);
  }
};

// One conv layer of the backbone: optional static conv plus zero or more
// dynamic branches, outputs concatenated along channels.
template <class T>
struct FreqDynLayer {
  std::optional<Conv2dLayer<T>> static_conv;
  std::vector<FdyBranch<T>> branches;

  FreqDynLayer() = default;
  FreqDynLayer(const std::string& prefix, const LayerPlan& plan,
               const FdyLayerConfig& lc) {
    if (!plan.dynamic || plan.static_channels > 0) {
      static_conv = Conv2dLayer<T>(prefix + ".static", plan.in_channels,
                                   plan.dynamic ? plan.static_channels
                                                : plan.out_channels,
                                   3, 3, true);
    }
    if (plan.dynamic) {
      for (size_t i = 0; i < lc.branches.size(); ++i)
        branches.emplace_back(prefix + ".branch" + std::to_string(i),
                              plan.in_channels, plan.branch_channels[i],
                              lc.branches[i], lc);
    }
  }

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, bool training,
                    bool update_stats = true) {
    std::vector<Tensor<T>> parts;
    if (static_conv) parts.push_back(static_conv->forward(tape, x));
    if (!branches.empty()) {
      Tensor<T> avg_context;
      bool any_avg = false;
      for (const auto& b : branches) any_avg |= !b.tap.has_value();
      if (any_avg) avg_context = avg_pool_time(tape, x);
      for (auto& b : branches)
        parts.push_back(b.forward(tape, x, avg_context, training, update_stats));
    }
    return parts.size() == 1 ? parts[0] : concat_axis(tape, parts, 1);
  }

  void visit_params(const ParamVisitor<T>& fn) {
    if (static_conv) static_conv->visit_params(fn);
    for (auto& b : branches) b.visit_params(fn);
  }
  void visit_buffers(const BufferVisitor& fn) {
    for (auto& b : branches) b.visit_buffers(fn);
  }
};

}  // namespace tapsed
