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

#include "tapsed/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "tapsed/rng.hpp"

namespace tapsed::synth {

namespace fs = std::filesystem;

const std::vector<std::string>& class_names() {
  static const std::vector<std::string> names = {
      "click_train",  "chirp_burst", "noise_burst", "plosive_pulse",
      "struck_decay", "steady_tone", "band_noise",  "mains_hum",
      "am_tone",      "broadband_wash"};
  return names;
}

bool is_transient_class(int cls) { return cls >= 0 && cls < 5; }

int class_id(const std::string& name) {
  const auto& names = class_names();
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

// Attack/release ramp inside the annotated interval so the waveform support
// matches the ground truth exactly.
double envelope(int64_t i, int64_t n, int64_t ramp) {
  if (i < 0 || i >= n) return 0.0;
  double e = 1.0;
  if (i < ramp) e = static_cast<double>(i + 1) / ramp;
  const int64_t tail = n - 1 - i;
  if (tail < ramp) e = std::min(e, static_cast<double>(tail + 1) / ramp);
  return e;
}

void render_event(std::vector<double>& out, int cls, int64_t start, int64_t n,
                  double amp, int64_t sr, SeqRng& rng) {
  const int64_t ramp = std::min<int64_t>(n / 4, sr / 100);  // <= 10 ms
  const double base_f = 180.0 + rng.uniform() * 1800.0;
  const double phase = rng.uniform() * 2.0 * M_PI;
  switch (cls) {
    case 0: {  // click_train: impulse bursts every ~30-60 ms
      const int64_t period = sr * 3 / 100 + static_cast<int64_t>(rng.below(sr * 3 / 100));
      const int64_t click = sr / 400;
      auto render_click = [&](int64_t at) {
        for (int64_t ph = 0; ph < click && at + ph < n; ++ph) {
          const double d = std::exp(-8.0 * ph / click);
          out[start + at + ph] += amp * envelope(at + ph, n, ramp) * d *
                                  ((ph & 1) ? -1.0 : 1.0);
        }
      };
      for (int64_t at = 0; at < n; at += period) render_click(at);
      // Anchor the train's tail on the annotated offset.
      render_click(std::max<int64_t>(0, n - click));
      break;
    }
    case 1: {  // chirp_burst: fast rising sweep
      const double f1 = base_f * (3.0 + 2.0 * rng.uniform());
      for (int64_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(i) / n;
        const double f = base_f + (f1 - base_f) * u;
        out[start + i] += amp * envelope(i, n, ramp) *
                          std::sin(phase + 2.0 * M_PI * f * i / sr);
      }
      break;
    }
    case 2: {  // noise_burst
      for (int64_t i = 0; i < n; ++i)
        out[start + i] += amp * envelope(i, n, ramp) * rng.uniform(-1.0, 1.0);
      break;
    }
    case 3: {  // plosive_pulse: sharp attack, fast decay noise+tone
      // Decay floor ~0.05 keeps the tail detectable at the annotated offset.
      for (int64_t i = 0; i < n; ++i) {
        const double d = std::exp(-3.0 * i / n);
        out[start + i] += amp * envelope(i, n, ramp) * d *
                          (0.6 * rng.uniform(-1.0, 1.0) +
                           0.4 * std::sin(phase + 2.0 * M_PI * base_f * i / sr));
      }
      break;
    }
    case 4: {  // struck_decay: damped harmonic strike
      for (int64_t i = 0; i < n; ++i) {
        const double d = std::exp(-4.0 * i / n);
        double s = 0.0;
        for (int h = 1; h <= 3; ++h)
          s += std::sin(phase + 2.0 * M_PI * base_f * h * i / sr) / h;
        out[start + i] += amp * envelope(i, n, ramp) * d * s * 0.6;
      }
      break;
    }
    case 5: {  // steady_tone
      for (int64_t i = 0; i < n; ++i)
        out[start + i] += amp * envelope(i, n, ramp) *
                          std::sin(phase + 2.0 * M_PI * base_f * i / sr);
      break;
    }
    case 6: {  // band_noise: noise through a 2-pole resonator
      double y1 = 0.0, y2 = 0.0;
      const double w = 2.0 * M_PI * base_f / sr;
      const double r = 0.97;
      const double a1 = 2.0 * r * std::cos(w), a2 = -r * r;
      for (int64_t i = 0; i < n; ++i) {
        const double y = rng.uniform(-1.0, 1.0) + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        out[start + i] += amp * envelope(i, n, ramp) * y * 0.12;
      }
      break;
    }
    case 7: {  // mains_hum: low tone + odd harmonics
      const double f0 = 60.0 + rng.uniform() * 60.0;
      for (int64_t i = 0; i < n; ++i) {
        double s = std::sin(phase + 2.0 * M_PI * f0 * i / sr) +
                   0.5 * std::sin(3.0 * (phase + 2.0 * M_PI * f0 * i / sr)) +
                   0.25 * std::sin(5.0 * (phase + 2.0 * M_PI * f0 * i / sr));
        out[start + i] += amp * envelope(i, n, ramp) * s * 0.5;
      }
      break;
    }
    case 8: {  // am_tone: slow amplitude modulation
      const double fm = 1.0 + 3.0 * rng.uniform();
      for (int64_t i = 0; i < n; ++i) {
        const double m = 0.6 + 0.4 * std::sin(2.0 * M_PI * fm * i / sr);
        out[start + i] += amp * envelope(i, n, ramp) * m *
                          std::sin(phase + 2.0 * M_PI * base_f * i / sr);
      }
      break;
    }
    default: {  // broadband_wash: slowly varying wideband noise
      double smooth = 0.0;
      for (int64_t i = 0; i < n; ++i) {
        smooth = 0.995 * smooth + 0.005 * rng.uniform(0.5, 1.0);
        out[start + i] += amp * envelope(i, n, ramp) * smooth *
                          rng.uniform(-1.0, 1.0);
      }
      break;
    }
  }
}

}  // namespace

GeneratedClip generate_clip(const SynthSpec& spec, uint64_t seed,
                            const std::string& split, int64_t index,
                            int64_t sample_rate, int64_t clip_samples) {
  SeqRng rng(seed, "synth." + split, static_cast<uint64_t>(index));
  GeneratedClip clip;
  clip.id = split + "_" + std::to_string(index) + ".wav";
  clip.wave.sample_rate = sample_rate;
  clip.wave.samples.assign(clip_samples, 0.0);

  const double clip_seconds =
      static_cast<double>(clip_samples) / static_cast<double>(sample_rate);
  const int64_t n_events =
      spec.events_min +
      static_cast<int64_t>(rng.below(spec.events_max - spec.events_min + 1));

  // Background noise level from the clip SNR draw (events peak near 0.5).
  const double snr_db = rng.uniform(spec.snr_db_min, spec.snr_db_max);
  const double noise_amp = 0.5 * std::pow(10.0, -snr_db / 20.0);

  for (int64_t e = 0; e < n_events; ++e) {
    const int cls = static_cast<int>(rng.below(kNumClasses));
    const double dur = is_transient_class(cls) ? rng.uniform(0.10, 0.6)
                                               : rng.uniform(1.5, 4.0);
    const int64_t n = static_cast<int64_t>(dur * sample_rate);
    // Place while capping instantaneous polyphony; a handful of attempts,
    // else skip the event.
    auto active_at = [&](double instant) {
      int count = 0;
      for (const auto& ev : clip.events)
        if (ev.onset <= instant && instant < ev.offset) ++count;
      return count;
    };
    int64_t start = -1;
    for (int tries = 0; tries < 16; ++tries) {
      const int64_t cand =
          static_cast<int64_t>(rng.below(clip_samples - n));
      const double a = static_cast<double>(cand) / sample_rate;
      const double b = a + dur;
      int peak = 1 + active_at(a);
      for (const auto& ev : clip.events)
        if (ev.onset > a && ev.onset < b)
          peak = std::max(peak, 1 + active_at(ev.onset));
      if (peak <= spec.polyphony) {
        start = cand;
        break;
      }
    }
    if (start < 0) continue;
    const double amp = rng.uniform(0.3, 0.6);
    render_event(clip.wave.samples, cls, start, n, amp, sample_rate, rng);
    eval::EventInterval ev;
    ev.clip = clip.id;
    ev.cls = cls;
    ev.onset = static_cast<double>(start) / sample_rate;
    ev.offset = std::min(clip_seconds,
                         static_cast<double>(start + n) / sample_rate);
    clip.events.push_back(ev);
  }
  if (noise_amp > 0.0)
    for (auto& s : clip.wave.samples) s += noise_amp * rng.uniform(-1.0, 1.0);
  // Keep headroom; 16-bit quantization happens at write time.
  for (auto& s : clip.wave.samples) s = std::clamp(s, -1.0, 1.0);
  std::sort(clip.events.begin(), clip.events.end(),
            [](const eval::EventInterval& a, const eval::EventInterval& b) {
              return a.onset < b.onset;
            });
  return clip;
}

SynthOutput synthesize_dataset(const SynthSpec& spec, uint64_t seed,
                               const std::string& out_dir, int64_t sample_rate,
                               int64_t clip_samples) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw std::runtime_error("synth: cannot create " + out_dir + ": " +
                             ec.message());
  const auto& names = class_names();
  SynthOutput paths;
  paths.strong_manifest = out_dir + "/strong.tsv";
  paths.weak_manifest = out_dir + "/weak.tsv";
  paths.unlabeled_manifest = out_dir + "/unlabeled.tsv";
  paths.val_ground_truth = out_dir + "/val.tsv";
  paths.val_manifest = out_dir + "/val_clips.tsv";

  auto render_split = [&](const std::string& split, int64_t count,
                          std::ofstream& manifest, bool strong_rows,
                          bool weak_rows) {
    fs::create_directories(out_dir + "/" + split);
    for (int64_t i = 0; i < count; ++i) {
      GeneratedClip clip =
          generate_clip(spec, seed, split, i, sample_rate, clip_samples);
      const std::string rel = split + "/" + clip.id;
      audio::write_wav(out_dir + "/" + rel, clip.wave);
      if (strong_rows) {
        for (const auto& ev : clip.events)
          manifest << rel << "\t" << ev.onset << "\t" << ev.offset << "\t"
                   << names[ev.cls] << "\n";
      } else if (weak_rows) {
        std::vector<bool> present(names.size(), false);
        for (const auto& ev : clip.events) present[ev.cls] = true;
        std::string tags;
        for (size_t c = 0; c < names.size(); ++c)
          if (present[c]) tags += (tags.empty() ? "" : ",") + names[c];
        manifest << rel << "\t" << tags << "\n";
      } else {
        manifest << rel << "\n";
      }
    }
  };

  {
    std::ofstream m(paths.strong_manifest);
    render_split("strong", spec.clips_strong, m, true, false);
  }
  {
    std::ofstream m(paths.weak_manifest);
    render_split("weak", spec.clips_weak, m, false, true);
  }
  {
    std::ofstream m(paths.unlabeled_manifest);
    render_split("unlabeled", spec.clips_unlabeled, m, false, false);
  }
  {
    std::ofstream gt(paths.val_ground_truth);
    render_split("val", spec.clips_val, gt, true, false);
    std::ofstream m(paths.val_manifest);
    for (int64_t i = 0; i < spec.clips_val; ++i)
      m << "val/val_" << i << ".wav\n";
  }
  return paths;
}

}  // namespace tapsed::synth
