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

// Finite-difference suites for every differentiable operation and the
// composed model, with per-suite tolerances. Pointwise ops are held to 1e-6,
// structured ops to 1e-5, deep compositions to 1e-4; all run in double with
// step 1e-5 over many seeds.

#include <functional>
#include <string>
#include <vector>

#include "tapsed/fdy.hpp"
#include "tapsed/gradcheck.hpp"
#include "tapsed/model.hpp"
#include "tapsed/tap.hpp"
#include "tapsed/tensor.hpp"

namespace tapsed {

struct SuiteResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  int seeds = 0;
  bool pass() const { return max_rel_err < tolerance; }
};

namespace gradsuite {

using D = double;

// Scalar loss: fixed-weight contraction of an arbitrary tensor.
inline Tensor<D> contract(Tape<D>* tape, const Tensor<D>& x, uint64_t seed) {
  RngStream rng(seed, "contract");
  Tensor<D> w = Tensor<D>::zeros(x.shape());
  for (int64_t i = 0; i < w.numel(); ++i)
    w.data()[i] = rng.uniform(i, -1.0, 1.0);
  return mean_all(tape, mul(tape, x, w));
}

template <class Fn>
SuiteResult run_suite(const std::string& name, double tol, int seeds, Fn fn) {
  SuiteResult res;
  res.name = name;
  res.tolerance = tol;
  res.seeds = seeds;
  for (int s = 0; s < seeds; ++s) {
    const GradCheckResult g = fn(static_cast<uint64_t>(s) + 1);
    res.max_rel_err = std::max(res.max_rel_err, g.max_rel_err);
  }
  return res;
}

inline GradCheckResult check_unary(
    uint64_t seed, double margin,
    const std::function<Tensor<D>(Tape<D>*, const Tensor<D>&)>& op) {
  SeqRng rng(seed, "unary");
  Tensor<D> x = random_tensor({2, 3, 4}, rng, -2.0, 2.0, margin);
  return gradcheck<D>(
      [&](Tape<D>* t) { return contract(t, op(t, x), seed); }, {{"x", x}});
}

inline std::vector<SuiteResult> elementwise_suites(int seeds) {
  std::vector<SuiteResult> out;
  out.push_back(run_suite("relu", 1e-6, seeds, [](uint64_t s) {
    return check_unary(s, 0.05, [](Tape<D>* t, const Tensor<D>& x) {
      return relu(t, x);
    });
  }));
  out.push_back(run_suite("sigmoid", 1e-6, seeds, [](uint64_t s) {
    return check_unary(s, 0.0, [](Tape<D>* t, const Tensor<D>& x) {
      return sigmoid(t, x);
    });
  }));
  out.push_back(run_suite("tanh", 1e-6, seeds, [](uint64_t s) {
    return check_unary(s, 0.0, [](Tape<D>* t, const Tensor<D>& x) {
      return tanh_op(t, x);
    });
  }));
  out.push_back(run_suite("scale", 1e-6, seeds, [](uint64_t s) {
    return check_unary(s, 0.0, [](Tape<D>* t, const Tensor<D>& x) {
      return scale(t, x, 1.7);
    });
  }));
  out.push_back(run_suite("add_mul_sub_div", 1e-6, seeds, [](uint64_t s) {
    SeqRng rng(s, "binary");
    Tensor<D> a = random_tensor({3, 4}, rng);
    Tensor<D> b = random_tensor({3, 4}, rng, 0.5, 2.0);
    return gradcheck<D>(
        [&](Tape<D>* t) {
          Tensor<D> u = mul(t, add(t, a, b), sub(t, a, b));
          return contract(t, div(t, u, b), s);
        },
        {{"a", a}, {"b", b}});
  }));
  out.push_back(run_suite("mean_sum_axis", 1e-6, seeds, [](uint64_t s) {
    SeqRng rng(s, "reduce");
    Tensor<D> x = random_tensor({2, 3, 5}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) {
          return contract(t, sum_axis(t, mean_axis(t, x, 1), 1), s);
        },
        {{"x", x}});
  }));
  out.push_back(run_suite("dropout", 1e-6, seeds, [](uint64_t s) {
    SeqRng rng(s, "dropout");
    Tensor<D> x = random_tensor({4, 5}, rng);
    RngStream mask_rng(s, "dropout.mask");
    std::vector<uint8_t> keep(20);
    for (size_t i = 0; i < keep.size(); ++i)
      keep[i] = mask_rng.uniform(i) >= 0.5 ? 1 : 0;
    return gradcheck<D>(
        [&](Tape<D>* t) { return contract(t, dropout(t, x, keep, 0.5), s); },
        {{"x", x}});
  }));
  out.push_back(run_suite("linear", 1e-6, seeds, [](uint64_t s) {
    SeqRng rng(s, "linear");
    Tensor<D> x = random_tensor({4, 3}, rng);
    Tensor<D> w = random_tensor({5, 3}, rng);
    Tensor<D> b = random_tensor({5}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return contract(t, linear(t, x, w, &b), s); },
        {{"x", x}, {"w", w}, {"b", b}});
  }));
  out.push_back(run_suite("shape_ops", 1e-6, seeds, [](uint64_t s) {
    SeqRng rng(s, "shape");
    Tensor<D> x = random_tensor({2, 3, 4}, rng);
    Tensor<D> y = random_tensor({2, 2, 4}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) {
          Tensor<D> cat = concat_axis(t, {x, y}, 1);          // [2,5,4]
          Tensor<D> p = permute(t, cat, {1, 0, 2});           // [5,2,4]
          Tensor<D> sl = slice_axis(t, p, 0, 1, 3);           // [3,2,4]
          return contract(t, reshape(t, sl, {6, 4}), s);
        },
        {{"x", x}, {"y", y}});
  }));
  out.push_back(run_suite("delta_time", 1e-6, seeds, [](uint64_t s) {
    return check_unary(s, 0.0, [](Tape<D>* t, const Tensor<D>& x) {
      return delta_time(t, x);
    });
  }));
  out.push_back(run_suite("losses", 1e-6, seeds, [](uint64_t s) {
    SeqRng rng(s, "loss");
    Tensor<D> p = random_tensor({3, 4}, rng, 0.05, 0.95);
    Tensor<D> q = random_tensor({3, 4}, rng, 0.05, 0.95);
    Tensor<D> y = Tensor<D>::zeros({3, 4});
    for (auto& v : y.data()) v = rng.coin(0.5) ? 1.0 : 0.0;
    return gradcheck<D>(
        [&](Tape<D>* t) {
          return add(t, bce_mean(t, p, y), mse_mean(t, p, q));
        },
        {{"p", p}, {"q", q}});
  }));
  return out;
}

inline SuiteResult softmax_suite(int seeds) {
  return run_suite("softmax_axis", 1e-6, seeds, [](uint64_t s) {
    SeqRng rng(s, "softmax");
    Tensor<D> x = random_tensor({2, 4, 3}, rng, -3.0, 3.0);
    const size_t axis = s % 3;
    return gradcheck<D>(
        [&](Tape<D>* t) { return contract(t, softmax_axis(t, x, axis), s); },
        {{"x", x}});
  });
}

inline SuiteResult conv2d_suite(int seeds) {
  return run_suite("conv2d", 1e-6, seeds, [](uint64_t s) {
    SeqRng rng(s, "conv");
    Tensor<D> x = random_tensor({2, 3, 5, 7}, rng, -1.0, 1.0);
    Tensor<D> w = random_tensor({4, 3, 3, 3}, rng, -1.0, 1.0);
    Tensor<D> b = random_tensor({4}, rng, -1.0, 1.0);
    const int64_t dilation = 1 + static_cast<int64_t>(s % 2);
    return gradcheck<D>(
        [&](Tape<D>* t) {
          return contract(t, conv2d(t, x, w, &b, dilation), s);
        },
        {{"x", x}, {"w", w}, {"b", b}});
  });
}

inline SuiteResult avg_pool_suite(int seeds) {
  return run_suite("avg_pool2d", 1e-6, seeds, [](uint64_t s) {
    SeqRng rng(s, "pool");
    Tensor<D> x = random_tensor({2, 3, 5, 6}, rng);
    return gradcheck<D>(
        [&](Tape<D>* t) { return contract(t, avg_pool2d(t, x, 2, 3), s); },
        {{"x", x}});
  });
}

inline SuiteResult batch_norm_suite(int seeds) {
  return run_suite("batch_norm2d", 1e-5, seeds, [](uint64_t s) {
    SeqRng rng(s, "bn");
    Tensor<D> x = random_tensor({2, 3, 4, 5}, rng);
    Tensor<D> gamma = random_tensor({3}, rng, 0.5, 1.5);
    Tensor<D> beta = random_tensor({3}, rng, -0.5, 0.5);
    return gradcheck<D>(
        [&](Tape<D>* t) {
          return contract(t, batch_norm_train(t, x, gamma, beta, 1e-5, nullptr),
                          s);
        },
        {{"x", x}, {"gamma", gamma}, {"beta", beta}});
  });
}

inline SuiteResult bigru_suite(int seeds) {
  return run_suite("bigru", 1e-5, seeds, [](uint64_t s) {
    SeqRng rng(s, "gru");
    BiGru<D> gru("g", 4, 5, 2, 0.0);
    std::vector<std::pair<std::string, Tensor<D>>> leaves;
    gru.visit_params([&](Parameter<D>& p) {
      for (auto& v : p.tensor.data()) v = rng.uniform(-0.8, 0.8);
      leaves.push_back({p.name, p.tensor});
    });
    Tensor<D> x = random_tensor({1, 3, 4}, rng);
    leaves.push_back({"x", x});
    return gradcheck<D>(
        [&](Tape<D>* t) {
          return contract(t, gru.forward(t, x, false, 0), s);
        },
        leaves);
  });
}

inline SuiteResult tap_suite(int seeds) {
  return run_suite("tap_pool", 1e-4, seeds, [](uint64_t s) {
    SeqRng rng(s, "tap");
    TapConfig tc;
    tc.hidden_divisor = 2;
    TapPooling<D> tap("tap", 2, tc);
    std::vector<std::pair<std::string, Tensor<D>>> leaves;
    tap.visit_params([&](Parameter<D>& p) {
      for (auto& v : p.tensor.data()) v = rng.uniform(-0.7, 0.7);
      leaves.push_back({p.name, p.tensor});
    });
    Tensor<D> x = random_tensor({1, 2, 3, 4}, rng);
    leaves.push_back({"x", x});
    return gradcheck<D>(
        [&](Tape<D>* t) {
          return contract(t, tap.forward(t, x, true, false).pooled, s);
        },
        leaves);
  });
}

inline SuiteResult fdy_suite(int seeds) {
  return run_suite("fdy_forward", 1e-4, seeds, [](uint64_t s) {
    SeqRng rng(s, "fdy");
    DynBranchConfig bc;
    bc.basis_kernels = 2;
    bc.dilations = {1, 2};
    bc.proportion = {1, 1};
    FdyLayerConfig lc;
    lc.variant = LayerVariant::kFdy;
    lc.branches = {bc};
    lc.attention_temperature = 2.0;
    FdyBranch<D> branch("fdy", 2, 3, bc, lc);
    std::vector<std::pair<std::string, Tensor<D>>> leaves;
    branch.visit_params([&](Parameter<D>& p) {
      for (auto& v : p.tensor.data()) v = rng.uniform(-0.7, 0.7);
      leaves.push_back({p.name, p.tensor});
    });
    Tensor<D> x = random_tensor({1, 2, 6, 5}, rng);
    leaves.push_back({"x", x});
    return gradcheck<D>(
        [&](Tape<D>* t) {
          Tensor<D> ctx = avg_pool_time(t, x);
          return contract(t, branch.forward(t, x, ctx, true, false), s);
        },
        leaves);
  });
}

// Small enough for finite differences, but the frequency axis stays >= 2
// bins into the last conv layer so the per-frequency context machinery is
// exercised everywhere (mirroring the full-size pooling schedule).
inline ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.classes = 2;
  cfg.n_mels = 32;
  cfg.stage_channels = {2, 3, 4, 4};
  cfg.pools = {{1, 2}, {1, 2}, {1, 2}, {1, 2}, {1, 1}, {1, 1}, {1, 2}};
  cfg.gru_hidden = 3;
  cfg.dropout = 0.5;
  cfg.activation = Activation::kGlu;
  cfg.dyn.variant = LayerVariant::kTfd;
  cfg.dyn.context = ContextPooling::kTap;
  DynBranchConfig bc;
  bc.basis_kernels = 2;
  bc.dilations = {1, 2};
  bc.proportion = {1, 1};
  cfg.dyn.branches = {bc};
  cfg.dyn.attention_temperature = 4.0;
  cfg.dyn.tap.hidden_divisor = 2;
  return cfg;
}

inline SuiteResult model_suite(int seeds) {
  return run_suite("tiny_model", 1e-4, seeds, [](uint64_t s) {
    SeqRng rng(s, "model");
    SedModel<D> model(tiny_model_config());
    model.init(s);
    std::vector<std::pair<std::string, Tensor<D>>> leaves;
    model.visit_params(
        [&](Parameter<D>& p) { leaves.push_back({p.name, p.tensor}); });
    Tensor<D> x = random_tensor({1, 1, 32, 8}, rng, -1.0, 1.0);
    return gradcheck<D>(
        [&](Tape<D>* t) {
          Predictions<D> preds = model.forward(t, x, /*training=*/true,
                                               /*step=*/7,
                                               /*update_stats=*/false);
          return add(t, contract(t, preds.strong, s),
                     contract(t, preds.weak, s + 1));
        },
        leaves);
  });
}

}  // namespace gradsuite

// module filter: empty = all; otherwise one of tensor-core, tap-pooling,
// freq-dynamic-layers, crnn-sed-model.
inline std::vector<SuiteResult> run_gradcheck_suites(
    const std::string& module = "", int seeds = 20, int model_seeds = -1) {
  using namespace gradsuite;
  if (model_seeds < 0) model_seeds = seeds;
  std::vector<SuiteResult> out;
  const bool all = module.empty();
  if (all || module == "tensor-core") {
    auto ew = elementwise_suites(seeds);
    out.insert(out.end(), ew.begin(), ew.end());
    out.push_back(softmax_suite(seeds));
    out.push_back(conv2d_suite(seeds));
    out.push_back(avg_pool_suite(seeds));
    out.push_back(batch_norm_suite(seeds));
    out.push_back(bigru_suite(seeds));
  }
  if (all || module == "tap-pooling") out.push_back(tap_suite(seeds));
  if (all || module == "freq-dynamic-layers") out.push_back(fdy_suite(seeds));
  if (all || module == "crnn-sed-model") out.push_back(model_suite(model_seeds));
  TAPSED_CHECK(!out.empty(), "gradcheck: unknown module '" + module + "'");
  return out;
}

}  // namespace tapsed
