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

// The SED network: seven conv blocks (conv variant -> BN -> gated linear unit
// or ReLU -> dropout -> 2-D average pool), frequency axis collapsed to one
// bin, a two-layer bidirectional GRU, a sigmoid frame head for strong
// predictions and a softmax attention head that pools frames into clip-level
// weak predictions.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tapsed/fdy.hpp"
#include "tapsed/model_config.hpp"
#include "tapsed/nn.hpp"
#include "tapsed/tensor.hpp"

namespace tapsed {

template <class T>
struct Predictions {
  Tensor<T> strong;  // [B, classes, Tout], values in (0,1)
  Tensor<T> weak;    // [B, classes], values in (0,1)
};

// ---------------------------------------------------------------------------
// Gated recurrent unit, bidirectional, composed from tensor primitives so
// backward falls out of the tape.
// ---------------------------------------------------------------------------

template <class T>
struct GruDirection {
  Parameter<T> w_ih;  // [3H, D]
  Parameter<T> w_hh;  // [3H, H]
  Parameter<T> b_ih;  // [3H]
  Parameter<T> b_hh;  // [3H]
  int64_t hidden = 0;
  bool reverse = false;

  GruDirection() = default;
  GruDirection(const std::string& prefix, int64_t in_dim, int64_t hidden_dim,
               bool backward_dir)
      : w_ih(make_param<T>(prefix + ".ih.weight", {3 * hidden_dim, in_dim})),
        w_hh(make_param<T>(prefix + ".hh.weight", {3 * hidden_dim, hidden_dim})),
        b_ih(make_param<T>(prefix + ".ih.bias", {3 * hidden_dim})),
        b_hh(make_param<T>(prefix + ".hh.bias", {3 * hidden_dim})),
        hidden(hidden_dim),
        reverse(backward_dir) {}

  // x: [B,T,D] -> [B,T,H]
  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x) const {
    const int64_t nb = x.extent(0), nt = x.extent(1), nd = x.extent(2);
    const int64_t h = hidden;
    Tensor<T> flat = reshape(tape, x, {nb * nt, nd});
    Tensor<T> gates_in = linear(tape, flat, w_ih.tensor, &b_ih.tensor);
    gates_in = reshape(tape, gates_in, {nb, nt, 3 * h});
    Tensor<T> state = Tensor<T>::zeros({nb, h});
    std::vector<Tensor<T>> outputs(nt);
    for (int64_t step = 0; step < nt; ++step) {
      const int64_t t = reverse ? nt - 1 - step : step;
      Tensor<T> gi = reshape(tape, slice_axis(tape, gates_in, 1, t, 1),
                             {nb, 3 * h});
      Tensor<T> gh = linear(tape, state, w_hh.tensor, &b_hh.tensor);
      Tensor<T> r = sigmoid(tape, add(tape, slice_axis(tape, gi, 1, 0, h),
                                      slice_axis(tape, gh, 1, 0, h)));
      Tensor<T> z = sigmoid(tape, add(tape, slice_axis(tape, gi, 1, h, h),
                                      slice_axis(tape, gh, 1, h, h)));
      Tensor<T> n = tanh_op(
          tape, add(tape, slice_axis(tape, gi, 1, 2 * h, h),
                    mul(tape, r, slice_axis(tape, gh, 1, 2 * h, h))));
      // h' = n + z * (h - n)
      state = add(tape, n, mul(tape, z, sub(tape, state, n)));
      outputs[t] = reshape(tape, state, {nb, 1, h});
    }
    return concat_axis(tape, outputs, 1);
  }

  void visit_params(const ParamVisitor<T>& fn) {
    fn(w_ih);
    fn(w_hh);
    fn(b_ih);
    fn(b_hh);
  }
};

template <class T>
struct BiGru {
  struct Layer {
    GruDirection<T> fwd;
    GruDirection<T> bwd;
  };
  std::vector<Layer> layers;
  DropoutLayer<T> between;
  double dropout_p = 0.5;

  BiGru() = default;
  BiGru(const std::string& prefix, int64_t in_dim, int64_t hidden,
        int64_t n_layers, double dropout)
      : between(prefix + ".dropout", dropout), dropout_p(dropout) {
    int64_t d = in_dim;
    for (int64_t l = 0; l < n_layers; ++l) {
      const std::string lp = prefix + ".l" + std::to_string(l);
      layers.push_back({GruDirection<T>(lp + ".fwd", d, hidden, false),
                        GruDirection<T>(lp + ".bwd", d, hidden, true)});
      d = 2 * hidden;
    }
  }

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, bool training,
                    uint64_t step) {
    Tensor<T> h = x;
    for (size_t l = 0; l < layers.size(); ++l) {
      if (l > 0) h = between.forward(tape, h, training, step * 131 + l);
      Tensor<T> f = layers[l].fwd.forward(tape, h);
      Tensor<T> b = layers[l].bwd.forward(tape, h);
      h = concat_axis(tape, std::vector<Tensor<T>>{f, b}, 2);
    }
    return h;
  }

  void visit_params(const ParamVisitor<T>& fn) {
    for (auto& l : layers) {
      l.fwd.visit_params(fn);
      l.bwd.visit_params(fn);
    }
  }
};

// ---------------------------------------------------------------------------
// Conv block and full model
// ---------------------------------------------------------------------------

template <class T>
struct ConvBlock {
  FreqDynLayer<T> layer;
  BatchNormLayer<T> bn;
  Conv2dLayer<T> gate;  // pointwise linear for the gated activation
  Activation activation = Activation::kGlu;
  DropoutLayer<T> drop;
  int64_t pool_time = 1;
  int64_t pool_freq = 1;

  ConvBlock() = default;
  ConvBlock(const std::string& prefix, const LayerPlan& plan,
            const ModelConfig& cfg)
      : layer(prefix, plan, cfg.dyn),
        bn(prefix + ".bn", plan.out_channels),
        activation(cfg.activation),
        drop(prefix + ".dropout", cfg.dropout),
        pool_time(cfg.pools[plan.index - 1].first),
        pool_freq(cfg.pools[plan.index - 1].second) {
    if (activation == Activation::kGlu)
      gate = Conv2dLayer<T>(prefix + ".gate", plan.out_channels,
                            plan.out_channels, 1, 1, true);
  }

  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x, bool training,
                    uint64_t step, bool update_stats) {
    Tensor<T> h = layer.forward(tape, x, training, update_stats);
    h = bn.forward(tape, h, training, update_stats);
    if (activation == Activation::kGlu)
      h = mul(tape, gate.forward(tape, h), sigmoid(tape, h));
    else
      h = relu(tape, h);
    h = drop.forward(tape, h, training, step);
    if (pool_time > 1 || pool_freq > 1)
      h = avg_pool2d(tape, h, pool_freq, pool_time);
    return h;
  }

  void visit_params(const ParamVisitor<T>& fn) {
    layer.visit_params(fn);
    bn.visit_params(fn);
    if (activation == Activation::kGlu) gate.visit_params(fn);
  }
  void visit_buffers(const BufferVisitor& fn) {
    layer.visit_buffers(fn);
    bn.visit_buffers(fn);
  }
};

template <class T>
class SedModel {
 public:
  explicit SedModel(const ModelConfig& cfg) : cfg_(cfg) {
    const auto plans = plan_layers(cfg);
    for (const auto& plan : plans)
      blocks_.emplace_back("cnn" + std::to_string(plan.index), plan, cfg);
    feature_dim_ = plans.back().out_channels;
    rnn_ = BiGru<T>("rnn", feature_dim_, cfg.gru_hidden, cfg.gru_layers,
                    cfg.dropout);
    rnn_out_drop_ = DropoutLayer<T>("rnn.out_dropout", cfg.dropout);
    head_strong_ = LinearLayer<T>("head.strong", 2 * cfg.gru_hidden, cfg.classes);
    head_att_ = LinearLayer<T>("head.att", 2 * cfg.gru_hidden, cfg.classes);
  }

  const ModelConfig& config() const { return cfg_; }

  // features: [B, 1, n_mels, T]
  Predictions<T> forward(Tape<T>* tape, const Tensor<T>& features,
                         bool training, uint64_t step = 0,
                         bool update_stats = true) {
    TAPSED_CHECK(features.rank() == 4 && features.extent(1) == 1 &&
                     features.extent(2) == cfg_.n_mels,
                 "model: features must be [B,1," + std::to_string(cfg_.n_mels) +
                     ",T], got " + shape_str(features.shape()));
    Tensor<T> h = features;
    for (size_t i = 0; i < blocks_.size(); ++i)
      h = blocks_[i].forward(tape, h, training, step * 1009 + i, update_stats);
    TAPSED_CHECK(h.extent(2) == 1, "model: frequency axis not collapsed");
    const int64_t nb = h.extent(0), nc = h.extent(1), nt = h.extent(3);
    h = reshape(tape, h, {nb, nc, nt});
    h = permute(tape, h, {0, 2, 1});  // [B,T,C]
    h = rnn_.forward(tape, h, training, step);
    h = rnn_out_drop_.forward(tape, h, training, step);
    Tensor<T> flat = reshape(tape, h, {nb * nt, 2 * cfg_.gru_hidden});
    Tensor<T> strong_btc = sigmoid(
        tape, reshape(tape, head_strong_.forward(tape, flat),
                      {nb, nt, cfg_.classes}));
    Tensor<T> att = softmax_axis(
        tape,
        reshape(tape, head_att_.forward(tape, flat), {nb, nt, cfg_.classes}),
        1);  // class-wise softmax over time
    Tensor<T> weighted = sum_axis(tape, mul(tape, att, strong_btc), 1);
    Tensor<T> norm = sum_axis(tape, att, 1);
    Predictions<T> out;
    out.weak = div(tape, weighted, norm);
    out.strong = permute(tape, strong_btc, {0, 2, 1});
    return out;
  }

  void visit_params(const ParamVisitor<T>& fn) {
    for (auto& b : blocks_) b.visit_params(fn);
    rnn_.visit_params(fn);
    head_strong_.visit_params(fn);
    head_att_.visit_params(fn);
  }
  void visit_buffers(const BufferVisitor& fn) {
    for (auto& b : blocks_) b.visit_buffers(fn);
  }

  void init(uint64_t seed) {
    visit_params([seed](Parameter<T>& p) { init_parameter(p, seed); });
    set_dropout_seed(seed);
  }

  void set_dropout_seed(uint64_t seed) {
    for (auto& b : blocks_) b.drop.seed = seed;
    rnn_.between.seed = seed;
    rnn_out_drop_.seed = seed;
  }

  int64_t count_trainable() {
    int64_t total = 0;
    visit_params([&total](Parameter<T>& p) {
      if (p.trainable) total += p.tensor.numel();
    });
    return total;
  }

  void zero_grads() {
    visit_params([](Parameter<T>& p) { p.tensor.zero_grad(); });
  }

  std::vector<ConvBlock<T>>& blocks() { return blocks_; }
  BiGru<T>& rnn() { return rnn_; }

 private:
  ModelConfig cfg_;
  std::vector<ConvBlock<T>> blocks_;
  int64_t feature_dim_ = 0;
  BiGru<T> rnn_;
  DropoutLayer<T> rnn_out_drop_;
  LinearLayer<T> head_strong_;
  LinearLayer<T> head_att_;
};

// Parameter count in millions rounded to three decimals, as reported.
inline double params_millions(int64_t count) {
  return static_cast<double>(count) / 1e6;
}

}  // namespace tapsed
