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

#include "tapsed/model_config.hpp"

#include <algorithm>
#include <sstream>

namespace tapsed {

std::string to_string(LayerVariant v) {
  switch (v) {
    case LayerVariant::kStatic: return "static";
    case LayerVariant::kFdy: return "fdy";
    case LayerVariant::kDfd: return "dfd";
    case LayerVariant::kPfd: return "pfd";
    case LayerVariant::kMdfd: return "mdfd";
    case LayerVariant::kTfd: return "tfd";
  }
  return "static";
}

std::string to_string(ContextPooling c) {
  return c == ContextPooling::kTap ? "tap" : "average";
}

std::string to_string(Activation a) {
  return a == Activation::kGlu ? "glu" : "relu";
}

LayerVariant variant_from_string(const std::string& s) {
  if (s == "static") return LayerVariant::kStatic;
  if (s == "fdy") return LayerVariant::kFdy;
  if (s == "dfd") return LayerVariant::kDfd;
  if (s == "pfd") return LayerVariant::kPfd;
  if (s == "mdfd") return LayerVariant::kMdfd;
  if (s == "tfd") return LayerVariant::kTfd;
  tensor_fail("unknown layer variant '" + s + "'");
}

ContextPooling context_from_string(const std::string& s) {
  if (s == "average") return ContextPooling::kAverage;
  if (s == "tap") return ContextPooling::kTap;
  tensor_fail("unknown context pooling '" + s + "'");
}

Activation activation_from_string(const std::string& s) {
  if (s == "glu") return Activation::kGlu;
  if (s == "relu") return Activation::kRelu;
  tensor_fail("unknown activation '" + s + "'");
}

Fraction fraction_from_string(const std::string& s) {
  Fraction f;
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) {
      f.num = std::stoll(s);
      f.den = 1;
    } else {
      f.num = std::stoll(s.substr(0, slash));
      f.den = std::stoll(s.substr(slash + 1));
    }
  } catch (const std::exception&) {
    tensor_fail("bad fraction '" + s + "'");
  }
  TAPSED_CHECK(f.den > 0, "fraction '" + s + "' has non-positive denominator");
  return f;
}

std::vector<int64_t> dilation_tuple_expand(const std::vector<int64_t>& spec,
                                           int64_t k) {
  TAPSED_CHECK(static_cast<int64_t>(spec.size()) <= k,
               "dilation tuple has " + std::to_string(spec.size()) +
                   " entries but only " + std::to_string(k) +
                   " basis kernels");
  for (int64_t d : spec)
    TAPSED_CHECK(d >= 1, "dilations must be >= 1");
  std::vector<int64_t> out(k - spec.size(), 1);
  out.insert(out.end(), spec.begin(), spec.end());
  return out;
}

std::vector<std::vector<int64_t>> parse_dilation_spec(const std::string& s) {
  std::vector<std::vector<int64_t>> branches;
  size_t i = 0;
  auto skip_ws = [&] { while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i; };
  skip_ws();
  while (i < s.size()) {
    TAPSED_CHECK(s[i] == '(', "dilation spec: expected '(' in '" + s + "'");
    ++i;
    std::vector<int64_t> tuple;
    while (true) {
      skip_ws();
      size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      TAPSED_CHECK(j > i, "dilation spec: expected digit in '" + s + "'");
      tuple.push_back(std::stoll(s.substr(i, j - i)));
      i = j;
      skip_ws();
      if (i < s.size() && s[i] == ',') { ++i; continue; }
      break;
    }
    TAPSED_CHECK(i < s.size() && s[i] == ')', "dilation spec: expected ')' in '" + s + "'");
    ++i;
    skip_ws();
    int64_t repeat = 1;
    if (i < s.size() && (s[i] == 'x' || s[i] == '*')) {
      ++i;
      size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      TAPSED_CHECK(j > i, "dilation spec: expected repeat count in '" + s + "'");
      repeat = std::stoll(s.substr(i, j - i));
      i = j;
      skip_ws();
    }
    for (int64_t r = 0; r < repeat; ++r) branches.push_back(tuple);
    if (i < s.size()) {
      TAPSED_CHECK(s[i] == '+', "dilation spec: expected '+' in '" + s + "'");
      ++i;
      skip_ws();
    }
  }
  TAPSED_CHECK(!branches.empty(), "dilation spec '" + s + "' has no branches");
  return branches;
}

std::string format_dilation_spec(const std::vector<std::vector<int64_t>>& b) {
  std::ostringstream os;
  size_t i = 0;
  while (i < b.size()) {
    size_t j = i;
    while (j < b.size() && b[j] == b[i]) ++j;
    if (i) os << "+";
    os << "(";
    for (size_t k = 0; k < b[i].size(); ++k) os << (k ? "," : "") << b[i][k];
    os << ")";
    if (j - i > 1) os << "x" << (j - i);
    i = j;
  }
  return os.str();
}

void validate(const ModelConfig& cfg) {
  TAPSED_CHECK(cfg.classes >= 1, "model: classes must be >= 1");
  TAPSED_CHECK(cfg.stage_channels.size() == 4,
               "model: stage_channels must list 4 stages");
  for (int64_t c : cfg.stage_channels)
    TAPSED_CHECK(c >= 1, "model: stage channels must be >= 1");
  TAPSED_CHECK(cfg.pools.size() == 7, "model: exactly 7 conv layers expected");
  TAPSED_CHECK(cfg.freq_pool_total() == cfg.n_mels,
               "model: frequency pools must reduce " +
                   std::to_string(cfg.n_mels) + " bins to 1, got total " +
                   std::to_string(cfg.freq_pool_total()));
  TAPSED_CHECK(cfg.gru_hidden >= 1 && cfg.gru_layers >= 1,
               "model: recurrent sizes must be >= 1");
  const FdyLayerConfig& d = cfg.dyn;
  if (d.variant != LayerVariant::kStatic) {
    TAPSED_CHECK(!d.branches.empty(), "model: dynamic variant needs branches");
    for (const auto& b : d.branches) {
      TAPSED_CHECK(b.basis_kernels >= 2, "model: basis kernels must be >= 2");
      TAPSED_CHECK(static_cast<int64_t>(b.dilations.size()) == b.basis_kernels,
                   "model: dilations must match basis kernel count");
      TAPSED_CHECK(b.proportion.num > 0, "model: branch proportion must be > 0");
    }
    TAPSED_CHECK(d.attention_temperature > 0,
                 "model: attention temperature must be > 0");
    // Static + branch proportions must add up to the channel multiplier.
    // Compared exactly via cross-multiplication over a common denominator.
    long double total = d.static_proportion.value();
    for (const auto& b : d.branches) total += b.proportion.value();
    TAPSED_CHECK(std::abs(static_cast<double>(total) -
                          cfg.channel_multiplier.value()) < 1e-12,
                 "model: static + branch proportions (" +
                     std::to_string(static_cast<double>(total)) +
                     ") must equal the channel multiplier " +
                     cfg.channel_multiplier.str());
  }
  if (d.variant == LayerVariant::kFdy || d.variant == LayerVariant::kDfd ||
      d.variant == LayerVariant::kTfd) {
    TAPSED_CHECK(d.branches.size() == 1 && d.static_proportion.num == 0,
                 "model: " + to_string(d.variant) +
                     " uses a single all-dynamic branch");
  }
  if (d.variant == LayerVariant::kFdy) {
    for (int64_t dil : d.branches[0].dilations)
      TAPSED_CHECK(dil == 1, "model: fdy basis kernels are undilated");
  }
  if (d.variant == LayerVariant::kTfd)
    TAPSED_CHECK(d.context == ContextPooling::kTap,
                 "model: tfd requires tap context pooling");
  if (d.variant == LayerVariant::kFdy || d.variant == LayerVariant::kDfd)
    TAPSED_CHECK(d.context == ContextPooling::kAverage,
                 "model: " + to_string(d.variant) +
                     " uses temporal average context");
}

std::vector<LayerPlan> plan_layers(const ModelConfig& cfg) {
  validate(cfg);
  std::vector<int64_t> base_out = {
      cfg.stage_channels[0], cfg.stage_channels[1], cfg.stage_channels[2],
      cfg.stage_channels[3], cfg.stage_channels[3], cfg.stage_channels[3],
      cfg.stage_channels[3]};
  std::vector<LayerPlan> plans(7);
  int64_t in_ch = 1;
  for (int64_t i = 0; i < 7; ++i) {
    LayerPlan& p = plans[i];
    p.index = i + 1;
    p.in_channels = in_ch;
    p.out_channels = cfg.channel_multiplier.scale_exact(
        base_out[i], "layer " + std::to_string(i + 1) + " width");
    p.dynamic = i > 0 && cfg.dyn.variant != LayerVariant::kStatic;
    if (p.dynamic) {
      p.static_channels = cfg.dyn.static_proportion.scale_exact(
          base_out[i], "layer " + std::to_string(i + 1) + " static split");
      int64_t sum = p.static_channels;
      for (const auto& b : cfg.dyn.branches) {
        const int64_t w = b.proportion.scale_exact(
            base_out[i], "layer " + std::to_string(i + 1) + " branch split");
        TAPSED_CHECK(w >= 1, "layer " + std::to_string(i + 1) +
                                 ": branch width collapses to zero channels");
        p.branch_channels.push_back(w);
        sum += w;
      }
      TAPSED_CHECK(sum == p.out_channels,
                   "layer " + std::to_string(i + 1) + ": splits total " +
                       std::to_string(sum) + " but layer width is " +
                       std::to_string(p.out_channels));
    } else {
      p.static_channels = p.out_channels;
    }
    in_ch = p.out_channels;
  }
  return plans;
}

}  // namespace tapsed
