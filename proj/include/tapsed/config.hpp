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

// Flat, human-editable "key = value" config with dotted section paths.
// parse(serialize(cfg)) == cfg.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tapsed/audio/frontend.hpp"
#include "tapsed/eval/postprocess.hpp"
#include "tapsed/eval/psds.hpp"
#include "tapsed/model_config.hpp"

namespace tapsed {

class KeyValues {
 public:
  static KeyValues parse_string(const std::string& text);
  static KeyValues parse_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value);
  void set_bool(const std::string& key, bool v);
  void set_int(const std::string& key, int64_t v);
  void set_double(const std::string& key, double v);

  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int64_t> get_int_list(const std::string& key,
                                    const std::vector<int64_t>& fallback) const;

  std::string serialize() const;  // sorted keys, one per line
  void write_file(const std::string& path) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct TrainingConfig {
  int64_t epochs = 200;
  int64_t batch_strong = 12;
  int64_t batch_weak = 12;
  int64_t batch_unlabeled = 24;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weak_loss_weight = 0.5;        // w_w
  double consistency_max = 2.0;         // w_c ceiling
  int64_t consistency_ramp_epochs = 50;
  double ema_decay = 0.999;
  bool consistency_detach_teacher = true;  // false: stop-gradient on student
  double mixup_alpha = 0.2;
  int64_t time_mask_max_frames = 64;
  int64_t frameshift_max = 90;
  int64_t filter_bands_min = 2;
  int64_t filter_bands_max = 5;
  double filter_gain_db = 6.0;
  std::string precision = "f32";  // f32 | f64

  bool operator==(const TrainingConfig&) const = default;

  int64_t batch_total() const {
    return batch_strong + batch_weak + batch_unlabeled;
  }
};

struct EvalSettings {
  eval::PsdsConfig psds;
  int64_t median_length = 7;
  eval::WeakMaskMode weak_mask_mode = eval::WeakMaskMode::kMin;
  double decision_threshold = 0.5;  // classwise F1 operating point

  bool operator==(const EvalSettings& o) const {
    return psds.dtc == o.psds.dtc && psds.gtc == o.psds.gtc &&
           psds.alpha_st == o.psds.alpha_st && psds.alpha_ct == o.psds.alpha_ct &&
           psds.e_max == o.psds.e_max && psds.thresholds == o.psds.thresholds &&
           median_length == o.median_length &&
           weak_mask_mode == o.weak_mask_mode &&
           decision_threshold == o.decision_threshold;
  }
};

struct SynthSpec {
  int64_t clips_strong = 24;
  int64_t clips_weak = 24;
  int64_t clips_unlabeled = 48;
  int64_t clips_val = 12;
  int64_t events_min = 1;
  int64_t events_max = 3;
  int64_t polyphony = 2;
  double snr_db_min = 6.0;
  double snr_db_max = 20.0;

  bool operator==(const SynthSpec&) const = default;
};

struct RunConfig {
  uint64_t seed = 1;
  ModelConfig model;
  TrainingConfig training;
  EvalSettings eval;
  audio::FrontendConfig audio;
  SynthSpec synth;
  // The STFT centering convention in effect; recorded in serialized output.
  std::string stft_centering = "center-reflect";

  bool operator==(const RunConfig&) const = default;
};

RunConfig run_config_from(const KeyValues& kv);
KeyValues run_config_to(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

// Derives the per-layer dynamic setup from the compact variant knobs.
FdyLayerConfig dyn_config_from(const KeyValues& kv, Fraction channel_multiplier);

}  // namespace tapsed
