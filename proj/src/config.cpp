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

#include "tapsed/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tapsed {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

KeyValues KeyValues::parse_string(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               " is not 'key = value': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config: empty key at line " +
                               std::to_string(lineno));
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

void KeyValues::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}
void KeyValues::set_bool(const std::string& key, bool v) {
  values_[key] = v ? "true" : "false";
}
void KeyValues::set_int(const std::string& key, int64_t v) {
  values_[key] = std::to_string(v);
}
void KeyValues::set_double(const std::string& key, double v) {
  values_[key] = format_double(v);
}

std::string KeyValues::get(const std::string& key,
                           const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string KeyValues::require(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::runtime_error("config: missing required key '" + key + "'");
  return it->second;
}

int64_t KeyValues::get_int(const std::string& key, int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoll(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' is not an integer: " +
                             it->second);
  }
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' is not a number: " +
                             it->second);
  }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::runtime_error("config: key '" + key + "' is not a bool: " +
                           it->second);
}

std::vector<int64_t> KeyValues::get_int_list(
    const std::string& key, const std::vector<int64_t>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int64_t> out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(std::stoll(item));
  }
  return out;
}

std::string KeyValues::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

void KeyValues::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << serialize();
}

FdyLayerConfig dyn_config_from(const KeyValues& kv,
                               Fraction channel_multiplier) {
  FdyLayerConfig dyn;
  dyn.variant = variant_from_string(kv.get("model.variant", "static"));
  dyn.attention_temperature = kv.get_double("model.attention_temperature", 31.0);
  dyn.attention_hidden_divisor = kv.get_int("model.attention_hidden_divisor", 4);
  dyn.tap.use_time_attention = kv.get_bool("model.tap.use_time_attention", true);
  dyn.tap.use_velocity_attention =
      kv.get_bool("model.tap.use_velocity_attention", true);
  dyn.tap.use_average = kv.get_bool("model.tap.use_average", true);
  dyn.tap.velocity_from_delta =
      kv.get("model.tap.velocity_input", "delta") == "delta";
  dyn.tap.hidden_divisor = kv.get_int("model.tap.hidden_divisor", 4);
  dyn.tap.first_kernel = kv.get_int("model.tap.first_kernel", 3);
  dyn.tap.second_kernel = kv.get_int("model.tap.second_kernel", 1);
  if (dyn.variant == LayerVariant::kStatic) return dyn;

  const int64_t k = kv.get_int("model.basis_kernels", 4);
  const auto branch_tuples =
      parse_dilation_spec(kv.get("model.dilations", "(1)"));
  const std::string default_context =
      dyn.variant == LayerVariant::kTfd ? "tap" : "average";
  dyn.context = context_from_string(
      kv.get("model.context_pooling", default_context));

  Fraction branch_prop;
  if (dyn.variant == LayerVariant::kFdy || dyn.variant == LayerVariant::kDfd ||
      dyn.variant == LayerVariant::kTfd) {
    TAPSED_CHECK(branch_tuples.size() == 1,
                 "config: " + to_string(dyn.variant) + " takes one dilation tuple");
    branch_prop = channel_multiplier;  // all-dynamic
    dyn.static_proportion = {0, 1};
  } else {
    branch_prop =
        fraction_from_string(kv.require("model.branch_proportion"));
    if (kv.has("model.static_proportion")) {
      dyn.static_proportion =
          fraction_from_string(kv.get("model.static_proportion", "0"));
    } else {
      // Remainder after the dynamic branches.
      const int64_t den = channel_multiplier.den * branch_prop.den;
      const int64_t num =
          channel_multiplier.num * branch_prop.den -
          static_cast<int64_t>(branch_tuples.size()) * branch_prop.num *
              channel_multiplier.den;
      TAPSED_CHECK(num >= 0, "config: dynamic branches exceed layer width");
      dyn.static_proportion = {num, den};
    }
  }
  for (const auto& tuple : branch_tuples) {
    DynBranchConfig bc;
    bc.basis_kernels = k;
    bc.dilations = dilation_tuple_expand(tuple, k);
    bc.proportion = branch_prop;
    dyn.branches.push_back(bc);
  }
  return dyn;
}

RunConfig run_config_from(const KeyValues& kv) {
  RunConfig cfg;
  cfg.seed = static_cast<uint64_t>(kv.get_int("seed", 1));
  cfg.stft_centering = kv.get("audio.stft_centering", "center-reflect");

  ModelConfig& m = cfg.model;
  m.classes = kv.get_int("model.classes", 10);
  m.n_mels = kv.get_int("model.n_mels", 128);
  m.stage_channels = kv.get_int_list("model.stage_channels", {32, 64, 128, 256});
  m.channel_multiplier =
      fraction_from_string(kv.get("model.channel_multiplier", "1/1"));
  m.gru_hidden = kv.get_int("model.gru_hidden", 256);
  m.gru_layers = kv.get_int("model.gru_layers", 2);
  m.dropout = kv.get_double("model.dropout", 0.5);
  m.activation = activation_from_string(kv.get("model.activation", "glu"));
  const auto pool_time = kv.get_int_list("model.pool_time", {2, 2, 1, 1, 1, 1, 1});
  const auto pool_freq = kv.get_int_list("model.pool_freq", {2, 2, 2, 2, 2, 2, 2});
  TAPSED_CHECK(pool_time.size() == pool_freq.size(),
               "config: pool_time/pool_freq length mismatch");
  m.pools.clear();
  for (size_t i = 0; i < pool_time.size(); ++i)
    m.pools.push_back({pool_time[i], pool_freq[i]});
  m.dyn = dyn_config_from(kv, m.channel_multiplier);
  validate(m);

  TrainingConfig& t = cfg.training;
  t.epochs = kv.get_int("training.epochs", t.epochs);
  t.batch_strong = kv.get_int("training.batch_strong", t.batch_strong);
  t.batch_weak = kv.get_int("training.batch_weak", t.batch_weak);
  t.batch_unlabeled = kv.get_int("training.batch_unlabeled", t.batch_unlabeled);
  t.lr = kv.get_double("training.lr", t.lr);
  t.adam_beta1 = kv.get_double("training.adam_beta1", t.adam_beta1);
  t.adam_beta2 = kv.get_double("training.adam_beta2", t.adam_beta2);
  t.adam_eps = kv.get_double("training.adam_eps", t.adam_eps);
  t.weak_loss_weight = kv.get_double("training.weak_loss_weight", t.weak_loss_weight);
  t.consistency_max = kv.get_double("training.consistency_max", t.consistency_max);
  t.consistency_ramp_epochs =
      kv.get_int("training.consistency_ramp_epochs", t.consistency_ramp_epochs);
  t.ema_decay = kv.get_double("training.ema_decay", t.ema_decay);
  t.consistency_detach_teacher =
      kv.get("training.consistency_stop_gradient", "teacher") == "teacher";
  t.mixup_alpha = kv.get_double("training.mixup_alpha", t.mixup_alpha);
  t.time_mask_max_frames =
      kv.get_int("training.time_mask_max_frames", t.time_mask_max_frames);
  t.frameshift_max = kv.get_int("training.frameshift_max", t.frameshift_max);
  t.filter_bands_min = kv.get_int("training.filter_bands_min", t.filter_bands_min);
  t.filter_bands_max = kv.get_int("training.filter_bands_max", t.filter_bands_max);
  t.filter_gain_db = kv.get_double("training.filter_gain_db", t.filter_gain_db);
  t.precision = kv.get("training.precision", t.precision);
  TAPSED_CHECK(t.precision == "f32" || t.precision == "f64",
               "config: training.precision must be f32 or f64");

  EvalSettings& e = cfg.eval;
  e.psds.dtc = kv.get_double("eval.dtc", e.psds.dtc);
  e.psds.gtc = kv.get_double("eval.gtc", e.psds.gtc);
  e.psds.alpha_st = kv.get_double("eval.alpha_st", e.psds.alpha_st);
  e.psds.alpha_ct = kv.get_double("eval.alpha_ct", e.psds.alpha_ct);
  e.psds.e_max = kv.get_double("eval.emax_per_hour", e.psds.e_max);
  e.psds.thresholds = kv.get_int("eval.thresholds", e.psds.thresholds);
  e.median_length = kv.get_int("eval.median_filter", e.median_length);
  e.weak_mask_mode = kv.get("eval.weak_mask", "min") == "gate"
                         ? eval::WeakMaskMode::kGate
                         : eval::WeakMaskMode::kMin;
  e.decision_threshold =
      kv.get_double("eval.decision_threshold", e.decision_threshold);

  audio::FrontendConfig& a = cfg.audio;
  a.sample_rate = kv.get_int("audio.sample_rate", a.sample_rate);
  a.clip_samples = kv.get_int("audio.clip_samples", a.clip_samples);
  a.fft_size = kv.get_int("audio.fft", a.fft_size);
  a.hop = kv.get_int("audio.hop", a.hop);
  a.n_mels = kv.get_int("audio.n_mels", a.n_mels);
  a.fmin = kv.get_double("audio.fmin", a.fmin);
  a.fmax = kv.get_double("audio.fmax", a.fmax);
  a.log_floor = kv.get_double("audio.log_floor", a.log_floor);
  TAPSED_CHECK(a.n_mels == m.n_mels,
               "config: audio.n_mels must match model.n_mels");

  SynthSpec& s = cfg.synth;
  s.clips_strong = kv.get_int("synth.clips_strong", s.clips_strong);
  s.clips_weak = kv.get_int("synth.clips_weak", s.clips_weak);
  s.clips_unlabeled = kv.get_int("synth.clips_unlabeled", s.clips_unlabeled);
  s.clips_val = kv.get_int("synth.clips_val", s.clips_val);
  s.events_min = kv.get_int("synth.events_min", s.events_min);
  s.events_max = kv.get_int("synth.events_max", s.events_max);
  s.polyphony = kv.get_int("synth.polyphony", s.polyphony);
  s.snr_db_min = kv.get_double("synth.snr_db_min", s.snr_db_min);
  s.snr_db_max = kv.get_double("synth.snr_db_max", s.snr_db_max);
  return cfg;
}

KeyValues run_config_to(const RunConfig& cfg) {
  KeyValues kv;
  kv.set_int("seed", static_cast<int64_t>(cfg.seed));
  kv.set("audio.stft_centering", cfg.stft_centering);

  const ModelConfig& m = cfg.model;
  kv.set_int("model.classes", m.classes);
  kv.set_int("model.n_mels", m.n_mels);
  {
    std::string s;
    for (size_t i = 0; i < m.stage_channels.size(); ++i)
      s += (i ? "," : "") + std::to_string(m.stage_channels[i]);
    kv.set("model.stage_channels", s);
  }
  kv.set("model.channel_multiplier", m.channel_multiplier.str());
  kv.set_int("model.gru_hidden", m.gru_hidden);
  kv.set_int("model.gru_layers", m.gru_layers);
  kv.set_double("model.dropout", m.dropout);
  kv.set("model.activation", to_string(m.activation));
  {
    std::string pt, pf;
    for (size_t i = 0; i < m.pools.size(); ++i) {
      pt += (i ? "," : "") + std::to_string(m.pools[i].first);
      pf += (i ? "," : "") + std::to_string(m.pools[i].second);
    }
    kv.set("model.pool_time", pt);
    kv.set("model.pool_freq", pf);
  }
  kv.set("model.variant", to_string(m.dyn.variant));
  if (m.dyn.variant != LayerVariant::kStatic) {
    kv.set("model.context_pooling", to_string(m.dyn.context));
    kv.set_int("model.basis_kernels", m.dyn.branches[0].basis_kernels);
    kv.set_double("model.attention_temperature", m.dyn.attention_temperature);
    kv.set_int("model.attention_hidden_divisor", m.dyn.attention_hidden_divisor);
    kv.set("model.static_proportion", m.dyn.static_proportion.str());
    kv.set("model.branch_proportion", m.dyn.branches[0].proportion.str());
    std::vector<std::vector<int64_t>> tuples;
    for (const auto& b : m.dyn.branches) tuples.push_back(b.dilations);
    kv.set("model.dilations", format_dilation_spec(tuples));
    kv.set_bool("model.tap.use_time_attention", m.dyn.tap.use_time_attention);
    kv.set_bool("model.tap.use_velocity_attention",
                m.dyn.tap.use_velocity_attention);
    kv.set_bool("model.tap.use_average", m.dyn.tap.use_average);
    kv.set("model.tap.velocity_input",
           m.dyn.tap.velocity_from_delta ? "delta" : "raw");
    kv.set_int("model.tap.hidden_divisor", m.dyn.tap.hidden_divisor);
    kv.set_int("model.tap.first_kernel", m.dyn.tap.first_kernel);
    kv.set_int("model.tap.second_kernel", m.dyn.tap.second_kernel);
  }

  const TrainingConfig& t = cfg.training;
  kv.set_int("training.epochs", t.epochs);
  kv.set_int("training.batch_strong", t.batch_strong);
  kv.set_int("training.batch_weak", t.batch_weak);
  kv.set_int("training.batch_unlabeled", t.batch_unlabeled);
  kv.set_double("training.lr", t.lr);
  kv.set_double("training.adam_beta1", t.adam_beta1);
  kv.set_double("training.adam_beta2", t.adam_beta2);
  kv.set_double("training.adam_eps", t.adam_eps);
  kv.set_double("training.weak_loss_weight", t.weak_loss_weight);
  kv.set_double("training.consistency_max", t.consistency_max);
  kv.set_int("training.consistency_ramp_epochs", t.consistency_ramp_epochs);
  kv.set_double("training.ema_decay", t.ema_decay);
  kv.set("training.consistency_stop_gradient",
         t.consistency_detach_teacher ? "teacher" : "as_written");
  kv.set_double("training.mixup_alpha", t.mixup_alpha);
  kv.set_int("training.time_mask_max_frames", t.time_mask_max_frames);
  kv.set_int("training.frameshift_max", t.frameshift_max);
  kv.set_int("training.filter_bands_min", t.filter_bands_min);
  kv.set_int("training.filter_bands_max", t.filter_bands_max);
  kv.set_double("training.filter_gain_db", t.filter_gain_db);
  kv.set("training.precision", t.precision);

  const EvalSettings& e = cfg.eval;
  kv.set_double("eval.dtc", e.psds.dtc);
  kv.set_double("eval.gtc", e.psds.gtc);
  kv.set_double("eval.alpha_st", e.psds.alpha_st);
  kv.set_double("eval.alpha_ct", e.psds.alpha_ct);
  kv.set_double("eval.emax_per_hour", e.psds.e_max);
  kv.set_int("eval.thresholds", e.psds.thresholds);
  kv.set_int("eval.median_filter", e.median_length);
  kv.set("eval.weak_mask",
         e.weak_mask_mode == eval::WeakMaskMode::kGate ? "gate" : "min");
  kv.set_double("eval.decision_threshold", e.decision_threshold);

  const audio::FrontendConfig& a = cfg.audio;
  kv.set_int("audio.sample_rate", a.sample_rate);
  kv.set_int("audio.clip_samples", a.clip_samples);
  kv.set_int("audio.fft", a.fft_size);
  kv.set_int("audio.hop", a.hop);
  kv.set_int("audio.n_mels", a.n_mels);
  kv.set_double("audio.fmin", a.fmin);
  kv.set_double("audio.fmax", a.fmax);
  kv.set_double("audio.log_floor", a.log_floor);

  const SynthSpec& s = cfg.synth;
  kv.set_int("synth.clips_strong", s.clips_strong);
  kv.set_int("synth.clips_weak", s.clips_weak);
  kv.set_int("synth.clips_unlabeled", s.clips_unlabeled);
  kv.set_int("synth.clips_val", s.clips_val);
  kv.set_int("synth.events_min", s.events_min);
  kv.set_int("synth.events_max", s.events_max);
  kv.set_int("synth.polyphony", s.polyphony);
  kv.set_double("synth.snr_db_min", s.snr_db_min);
  kv.set_double("synth.snr_db_max", s.snr_db_max);
  return kv;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from(KeyValues::parse_file(path));
}

}  // namespace tapsed
