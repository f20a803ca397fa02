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

// Small layer zoo on top of the tensor ops: named parameters, conv / batch
// norm / linear / dropout modules, and weight initialization. Modules expose
// their parameters and stat buffers through visitor callbacks so counting,
// optimization, EMA and checkpointing stay generic.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tapsed/rng.hpp"
#include "tapsed/tensor.hpp"

namespace tapsed {

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

// Non-trainable named state (batch-norm running stats).
struct StatBuffer {
  std::string name;
  std::vector<double>* values = nullptr;
};

template <class T>
using ParamVisitor = std::function<void(Parameter<T>&)>;
using BufferVisitor = std::function<void(const StatBuffer&)>;

template <class T>
Parameter<T> make_param(std::string name, Shape shape, bool trainable = true) {
  Parameter<T> p;
  p.name = std::move(name);
  p.tensor = Tensor<T>::zeros(std::move(shape));
  p.tensor.set_tracked(true);
  p.trainable = trainable;
  return p;
}

// Kaiming-uniform for weights (bound sqrt(6 / fan_in)), zeros for biases,
// ones for batch-norm scale. Each parameter draws from its own stream keyed
// by (seed, name), so initialization is independent of construction order.
template <class T>
void init_parameter(Parameter<T>& p, uint64_t seed) {
  auto& v = p.tensor.data();
  const std::string& n = p.name;
  auto ends_with = [&n](const char* suf) {
    const std::string s(suf);
    return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with(".gamma")) {
    std::fill(v.begin(), v.end(), T(1));
    return;
  }
  if (ends_with(".beta") || ends_with(".bias")) {
    std::fill(v.begin(), v.end(), T(0));
    return;
  }
  const int64_t fan_in = p.tensor.numel() / p.tensor.extent(0);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  RngStream rng(seed, n);
  for (size_t i = 0; i < v.size(); ++i)
    v[i] = static_cast<T>(rng.uniform(i, -bound, bound));
}

// ---------------------------------------------------------------------------
// Conv2d with frequency-axis dilation, same padding.
// ---------------------------------------------------------------------------

template <class T>
struct Conv2dLayer {
  Parameter<T> weight;
  Parameter<T> bias;
  bool has_bias = true;
  int64_t freq_dilation = 1;

  Conv2dLayer() = default;
  Conv2dLayer(const std::string& prefix, int64_t in_ch, int64_t out_ch,
              int64_t kf, int64_t kt, bool with_bias, int64_t dilation = 1)
      : weight(make_param<T>(prefix + ".weight", {out_ch, in_ch, kf, kt})),
        has_bias(with_bias),
        freq_dilation(dilation) {
    if (with_bias) bias = make_param<T>(prefix + ".bias", {out_ch});
  }

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x) const {
    return conv2d(tape, x, weight.tensor, has_bias ? &bias.tensor : nullptr,
                  freq_dilation);
  }

  void visit_params(const ParamVisitor<T>& fn) {
    fn(weight);
    if (has_bias) fn(bias);
  }
};

// ---------------------------------------------------------------------------
// BatchNorm over channels of a rank-4 tensor (rank-3 inputs are wrapped with
// a trailing singleton axis by callers). Running stats update with momentum
// 0.1 and the unbiased batch variance, as is conventional.
// ---------------------------------------------------------------------------

template <class T>
struct BatchNormLayer {
  Parameter<T> gamma;
  Parameter<T> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;
  double momentum = 0.1;
  std::string prefix;

  BatchNormLayer() = default;
  BatchNormLayer(const std::string& name, int64_t channels)
      : gamma(make_param<T>(name + ".gamma", {channels})),
        beta(make_param<T>(name + ".beta", {channels})),
        running_mean(channels, 0.0),
        running_var(channels, 1.0),
        prefix(name) {}

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, bool training,
                    bool update_stats = true) {
    if (!training)
      return batch_norm_eval(tape, x, gamma.tensor, beta.tensor, running_mean,
                             running_var, eps);
    BatchNormStats stats;
    Tensor<T> out =
        batch_norm_train(tape, x, gamma.tensor, beta.tensor, eps, &stats);
    if (update_stats) {
      const int64_t n = x.extent(0) * x.extent(2) * x.extent(3);
      const double correction =
          n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
      for (size_t c = 0; c < running_mean.size(); ++c) {
        running_mean[c] =
            (1.0 - momentum) * running_mean[c] + momentum * stats.mean[c];
        running_var[c] = (1.0 - momentum) * running_var[c] +
                         momentum * stats.var[c] * correction;
      }
    }
    return out;
  }

  void visit_params(const ParamVisitor<T>& fn) {
    fn(gamma);
    fn(beta);
  }
  void visit_buffers(const BufferVisitor& fn) {
    fn({prefix + ".running_mean", &running_mean});
    fn({prefix + ".running_var", &running_var});
  }
};

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

template <class T>
struct LinearLayer {
  Parameter<T> weight;  // [out, in]
  Parameter<T> bias;

  LinearLayer() = default;
  LinearLayer(const std::string& prefix, int64_t in_dim, int64_t out_dim)
      : weight(make_param<T>(prefix + ".weight", {out_dim, in_dim})),
        bias(make_param<T>(prefix + ".bias", {out_dim})) {}

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x) const {
    return linear(tape, x, weight.tensor, &bias.tensor);
  }

  void visit_params(const ParamVisitor<T>& fn) {
    fn(weight);
    fn(bias);
  }
};

// ---------------------------------------------------------------------------
// Dropout with a counter-based stream keyed by (seed, layer name, step):
// the mask is a pure function of that key, giving bitwise-reproducible
// training without shared mutable RNG state.
// ---------------------------------------------------------------------------

template <class T>
struct DropoutLayer {
  double p = 0.5;
  std::string name;
  uint64_t seed = 0;

  DropoutLayer() = default;
  DropoutLayer(std::string layer_name, double prob)
      : p(prob), name(std::move(layer_name)) {}

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, bool training,
                    uint64_t step) const {
    if (!training || p <= 0.0) return x;
    RngStream rng(seed, name, step);
    std::vector<uint8_t> keep(x.data().size());
    for (size_t i = 0; i < keep.size(); ++i)
      keep[i] = rng.uniform(i) >= p ? 1 : 0;
    return dropout(tape, x, keep, 1.0 - p);
  }
};

}  // namespace tapsed
