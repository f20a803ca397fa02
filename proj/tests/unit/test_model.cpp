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
#include <cstdio>

#include "tapsed/checkpoint.hpp"
#include "tapsed/config.hpp"
#include "tapsed/gradcheck_suites.hpp"
#include "tapsed/model.hpp"

using namespace tapsed;
using D = double;

namespace {

RunConfig config_from_text(const std::string& text) {
  return run_config_from(KeyValues::parse_string(text));
}

int64_t count_for(const std::string& text) {
  SedModel<D> model(config_from_text(text).model);
  return model.count_trainable();
}

}  // namespace

TEST_CASE("reference configuration parameter counts") {
  // Structural pins: exact counts of this implementation, guarding against
  // accidental architecture drift.
  CHECK(count_for("model.variant = static") == 4427956);
  CHECK(count_for("model.variant = fdy") == 11063452);
  CHECK(count_for("model.variant = tfd") == 12703756);

  // Published reference sizes (millions) at the documented tolerances.
  auto within = [](int64_t count, double expect_m, double tol_pct) {
    const double m = params_millions(count);
    return std::abs(m - expect_m) / expect_m * 100.0 <= tol_pct;
  };
  CHECK(within(count_for("model.variant = static"), 4.428, 1.0));
  CHECK(within(count_for("model.variant = fdy"), 11.061, 1.0));
  CHECK(within(count_for("model.variant = dfd\nmodel.dilations = (2,3,3)"),
               11.061, 1.0));
  CHECK(within(count_for("model.variant = tfd"), 12.703, 5.0));
  CHECK(within(count_for("model.variant = mdfd\n"
                         "model.channel_multiplier = 11/8\n"
                         "model.branch_proportion = 1/8\n"
                         "model.static_proportion = 3/8\n"
                         "model.dilations = (1)x5+(2,3)+(2,2,3)+(2,3,3)"),
               18.157, 5.0));
  CHECK(within(count_for("model.variant = mdfd\n"
                         "model.context_pooling = tap\n"
                         "model.channel_multiplier = 5/4\n"
                         "model.branch_proportion = 1/4\n"
                         "model.static_proportion = 1/4\n"
                         "model.dilations = (1)x4"),
               25.266, 5.0));
}

TEST_CASE("TAP-over-partial ladder sizes are monotone and on target") {
  const std::vector<std::pair<std::string, double>> ladder = {
      {"1/32", 6.435}, {"1/16", 6.637}, {"1/8", 7.042},  {"2/8", 7.850},
      {"3/8", 8.659},  {"4/8", 9.468},  {"5/8", 10.276}, {"6/8", 11.085},
      {"7/8", 11.894},
  };
  int64_t prev = 0;
  for (const auto& [prop, expect] : ladder) {
    Fraction p = fraction_from_string(prop);
    Fraction stat{p.den - p.num, p.den};
    const std::string cfg = "model.variant = pfd\nmodel.context_pooling = tap\n"
                            "model.branch_proportion = " + prop + "\n"
                            "model.static_proportion = " + stat.str() + "\n";
    const int64_t count = count_for(cfg);
    CHECK(count > prev);  // strictly increasing in the dynamic proportion
    prev = count;
    const double m = params_millions(count);
    INFO("proportion ", prop, " -> ", m, " M, expect ", expect);
    CHECK(std::abs(m - expect) / expect <= 0.05);
  }
  const int64_t tfd = count_for("model.variant = tfd");
  CHECK(tfd > prev);  // the all-dynamic top of the ladder
  CHECK(std::abs(params_millions(tfd) - 12.703) / 12.703 <= 0.05);
}

TEST_CASE("dilation choices never change the parameter count") {
  const int64_t undilated = count_for("model.variant = fdy");
  for (const char* spec : {"(2,3,3)", "(2,3)", "(3)", "(2,2,3)"}) {
    const int64_t dilated = count_for(
        std::string("model.variant = dfd\nmodel.dilations = ") + spec);
    CHECK(dilated == undilated);
  }
}

TEST_CASE("partial split arithmetic matches the layer composition") {
  // Per layer: static 9*Cin*(7/8 Cout) (+bias) plus K*9*Cin*(1/8 Cout)
  // dynamic weights plus the attention head; summed over layers 2..7 on top
  // of the shared backbone.
  const std::string cfg_text =
      "model.variant = pfd\nmodel.branch_proportion = 1/8\n"
      "model.static_proportion = 7/8\n";
  RunConfig cfg = config_from_text(cfg_text);
  const auto plans = plan_layers(cfg.model);
  int64_t expect = count_for("model.variant = static");
  for (const auto& plan : plans) {
    if (!plan.dynamic) continue;
    const int64_t cin = plan.in_channels, cout = plan.out_channels;
    expect -= 9 * cin * cout + cout;                       // replaced conv
    expect += 9 * cin * plan.static_channels + plan.static_channels;
    expect += 4 * 9 * cin * plan.branch_channels[0];       // basis kernels
    const int64_t hidden = std::max<int64_t>(4, cin / 4);  // attention head
    expect += 3 * cin * hidden + 2 * hidden + 3 * hidden * 4 + 4;
  }
  CHECK(count_for(cfg_text) == expect);
}

TEST_CASE("forward emits bounded predictions with the contracted shapes") {
  ModelConfig cfg = gradsuite::tiny_model_config();
  SedModel<D> model(cfg);
  model.init(3);
  SeqRng rng(4, "feat");
  Tensor<D> x = random_tensor({2, 1, cfg.n_mels, 12}, rng, -2.0, 2.0);
  Predictions<D> preds = model.forward(nullptr, x, false);
  REQUIRE(preds.strong.shape() == Shape{2, cfg.classes, 12});
  REQUIRE(preds.weak.shape() == Shape{2, cfg.classes});
  for (double v : preds.strong.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  // The weak prediction is a convex combination of frame posteriors.
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t c = 0; c < cfg.classes; ++c) {
      double lo = 1.0, hi = 0.0;
      for (int64_t t = 0; t < 12; ++t) {
        const double v = preds.strong.data()[(b * cfg.classes + c) * 12 + t];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const double w = preds.weak.data()[b * cfg.classes + c];
      CHECK(w >= lo - 1e-9);
      CHECK(w <= hi + 1e-9);
    }
}

TEST_CASE("constant frame posteriors pool to the same weak value") {
  // All-zero parameters give sigmoid(0) = 0.5 frame posteriors everywhere,
  // so the attention-pooled weak prediction must be exactly 0.5.
  ModelConfig cfg = gradsuite::tiny_model_config();
  SedModel<D> model(cfg);  // parameters stay zero
  model.visit_params([](Parameter<D>& p) {
    if (p.name.ends_with(".gamma"))
      for (auto& v : p.tensor.data()) v = 1.0;
  });
  SeqRng rng(5, "feat");
  Tensor<D> x = random_tensor({1, 1, cfg.n_mels, 8}, rng);
  Predictions<D> preds = model.forward(nullptr, x, false);
  for (double v : preds.weak.data())
    CHECK(v == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("builds are deterministic in config and seed") {
  ModelConfig cfg = gradsuite::tiny_model_config();
  SedModel<D> a(cfg);
  SedModel<D> b(cfg);
  a.init(42);
  b.init(42);
  std::vector<double> va, vb;
  a.visit_params([&](Parameter<D>& p) {
    va.insert(va.end(), p.tensor.data().begin(), p.tensor.data().end());
  });
  b.visit_params([&](Parameter<D>& p) {
    vb.insert(vb.end(), p.tensor.data().begin(), p.tensor.data().end());
  });
  CHECK(va == vb);

  SedModel<D> c(cfg);
  c.init(43);
  std::vector<double> vc;
  c.visit_params([&](Parameter<D>& p) {
    vc.insert(vc.end(), p.tensor.data().begin(), p.tensor.data().end());
  });
  CHECK(va != vc);
}

TEST_CASE("checkpoints restore parameters and stat buffers bit-for-bit") {
  ModelConfig mc = gradsuite::tiny_model_config();
  RunConfig rc;
  rc.model = mc;
  rc.audio.n_mels = mc.n_mels;
  SedModel<D> model(mc);
  model.init(7);
  // Push the running stats away from their defaults.
  SeqRng rng(8, "feat");
  Tensor<D> x = random_tensor({2, 1, mc.n_mels, 10}, rng);
  model.forward(nullptr, x, /*training=*/true, 0, /*update_stats=*/true);

  const std::string path = "/tmp/tapsed_test_model.ckpt";
  save_checkpoint(path, model, run_config_to(rc).serialize());
  const Checkpoint ck = load_checkpoint(path);
  const RunConfig loaded = run_config_from(KeyValues::parse_string(ck.config_text));
  CHECK(loaded.model == mc);

  SedModel<D> restored(loaded.model);
  restore_model(restored, ck);
  Predictions<D> p1 = model.forward(nullptr, x, false);
  Predictions<D> p2 = restored.forward(nullptr, x, false);
  CHECK(p1.strong.data() == p2.strong.data());
  CHECK(p1.weak.data() == p2.weak.data());
}

TEST_CASE("invalid layer configurations are rejected at build time") {
  // Non-integral channel split: 1/32 of a 48-wide stage.
  CHECK_THROWS_AS(
      count_for("model.stage_channels = 24,48,96,192\n"
                "model.n_mels = 128\n"
                "model.variant = pfd\n"
                "model.branch_proportion = 1/32\n"
                "model.static_proportion = 31/32\n"),
      std::invalid_argument);
  // tfd demands TAP context.
  CHECK_THROWS_AS(
      config_from_text("model.variant = tfd\nmodel.context_pooling = average"),
      std::invalid_argument);
  // Splits must cover the multiplier exactly.
  CHECK_THROWS_AS(
      config_from_text("model.variant = mdfd\n"
                       "model.branch_proportion = 1/8\n"
                       "model.static_proportion = 3/8\n"
                       "model.dilations = (1)x2"),
      std::invalid_argument);
}
