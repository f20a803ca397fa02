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

// Model configuration: the CRNN backbone recipe plus the per-layer
// frequency-dynamic convolution family (static / fdy / dfd / pfd / mdfd /
// tfd). Channel splits are exact rationals of the per-stage base widths so
// that branch widths are validated as integers at build time.

#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "tapsed/tensor.hpp"

namespace tapsed {

enum class LayerVariant { kStatic, kFdy, kDfd, kPfd, kMdfd, kTfd };
enum class ContextPooling { kAverage, kTap };
enum class Activation { kGlu, kRelu };

std::string to_string(LayerVariant v);
std::string to_string(ContextPooling c);
std::string to_string(Activation a);
LayerVariant variant_from_string(const std::string& s);
ContextPooling context_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);

struct Fraction {
  int64_t num = 0;
  int64_t den = 1;

  bool operator==(const Fraction&) const = default;
  double value() const { return static_cast<double>(num) / den; }
  // Exact product with an integer; throws if not integral.
  int64_t scale_exact(int64_t base, const std::string& what) const {
    const int64_t prod = base * num;
    TAPSED_CHECK(den != 0 && prod % den == 0,
                 what + ": " + std::to_string(base) + " * " +
                     std::to_string(num) + "/" + std::to_string(den) +
                     " is not an integral channel count");
    return prod / den;
  }
  std::string str() const {
    return den == 1 ? std::to_string(num)
                    : std::to_string(num) + "/" + std::to_string(den);
  }
};

Fraction fraction_from_string(const std::string& s);

// Temporal attention pooling knobs. The branch blocks are
// conv(first_kernel^2, C -> C/hidden_divisor, no bias) -> BN -> ReLU ->
// conv(second_kernel^2, -> C, bias). The component switches implement the
// pooling ablations (time attention / velocity attention / average).
struct TapConfig {
  bool use_time_attention = true;
  bool use_velocity_attention = true;
  bool use_average = true;
  bool velocity_from_delta = true;  // attention input: frame difference vs raw
  int64_t hidden_divisor = 4;
  int64_t first_kernel = 3;
  int64_t second_kernel = 1;

  bool operator==(const TapConfig&) const = default;
};

struct DynBranchConfig {
  int64_t basis_kernels = 4;             // K
  std::vector<int64_t> dilations;        // length K (frequency axis)
  Fraction proportion{1, 1};             // of the layer's base output width

  bool operator==(const DynBranchConfig&) const = default;
};

struct FdyLayerConfig {
  LayerVariant variant = LayerVariant::kStatic;
  ContextPooling context = ContextPooling::kAverage;
  Fraction static_proportion{0, 1};
  std::vector<DynBranchConfig> branches;
  double attention_temperature = 31.0;
  int64_t attention_hidden_divisor = 4;  // head squeeze width = C / divisor
  TapConfig tap;

  bool operator==(const FdyLayerConfig&) const = default;
};

struct ModelConfig {
  int64_t classes = 10;
  int64_t n_mels = 128;
  std::vector<int64_t> stage_channels = {32, 64, 128, 256};  // stage 4 repeats
  Fraction channel_multiplier{1, 1};
  // Per-layer (time, freq) average-pool factors.
  std::vector<std::pair<int64_t, int64_t>> pools = {
      {2, 2}, {2, 2}, {1, 2}, {1, 2}, {1, 2}, {1, 2}, {1, 2}};
  int64_t gru_hidden = 256;
  int64_t gru_layers = 2;
  double dropout = 0.5;
  Activation activation = Activation::kGlu;
  FdyLayerConfig dyn;  // applied to conv layers 2..7; layer 1 is always static

  bool operator==(const ModelConfig&) const = default;

  int64_t conv_layers() const { return static_cast<int64_t>(pools.size()); }
  int64_t time_pool_total() const {
    int64_t p = 1;
    for (auto& [t, f] : pools) p *= t;
    return p;
  }
  int64_t freq_pool_total() const {
    int64_t p = 1;
    for (auto& [t, f] : pools) p *= f;
    return p;
  }
};

// Left-pads a dilation tuple with 1s to exactly `k` entries; rejects longer
// tuples. ("2,3,3" with k=4 becomes 1,2,3,3.)
std::vector<int64_t> dilation_tuple_expand(const std::vector<int64_t>& spec,
                                           int64_t k);

// Parses a multi-branch dilation spec such as "(1)x5+(2,3)+(2,2,3)" into one
// (unexpanded) tuple per dynamic branch.
std::vector<std::vector<int64_t>> parse_dilation_spec(const std::string& s);
std::string format_dilation_spec(const std::vector<std::vector<int64_t>>& b);

// Resolved widths for one conv layer.
struct LayerPlan {
  int64_t index = 0;  // 1-based
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t static_channels = 0;
  std::vector<int64_t> branch_channels;
  bool dynamic = false;
};

// Expands the stage recipe into the seven-layer plan and validates every
// channel split. Throws on non-integral splits or proportion mismatches.
std::vector<LayerPlan> plan_layers(const ModelConfig& cfg);

// Cross-field validation used by plan_layers and the config loader.
void validate(const ModelConfig& cfg);

}  // namespace tapsed
