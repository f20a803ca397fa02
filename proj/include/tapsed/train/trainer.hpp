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

// Mean-teacher training loop. Batches are composed of strong / weak /
// unlabeled quotas; shared geometric augmentations (frameshift, mixup, time
// mask) produce one view whose features are then filtered independently for
// the student and the teacher. The teacher never receives gradients; its
// parameters and stat buffers track the student by EMA after every step.
// All randomness is drawn from counter streams keyed by (seed, purpose,
// epoch, step), so a run is a pure function of (config, data).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "tapsed/checkpoint.hpp"
#include "tapsed/config.hpp"
#include "tapsed/eval/psds.hpp"
#include "tapsed/model.hpp"
#include "tapsed/rng.hpp"
#include "tapsed/synth.hpp"
#include "tapsed/train/augment.hpp"
#include "tapsed/train/dataset.hpp"
#include "tapsed/train/loss.hpp"

namespace tapsed::train {

template <class T>
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(SedModel<T>& model) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    model.visit_params([&](Parameter<T>& p) {
      if (!p.trainable) return;
      auto& slot = slots_[p.name];
      auto& value = p.tensor.data();
      auto& grad = p.tensor.grad();
      if (slot.m.size() != value.size()) {
        slot.m.assign(value.size(), 0.0);
        slot.v.assign(value.size(), 0.0);
      }
      for (size_t i = 0; i < value.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * g;
        slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * g * g;
        const double mhat = slot.m[i] / bc1;
        const double vhat = slot.v[i] / bc2;
        value[i] = static_cast<T>(static_cast<double>(value[i]) -
                                  lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    });
  }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::map<std::string, Slot> slots_;
};

template <class T>
void copy_parameters(SedModel<T>& dst, SedModel<T>& src) {
  std::map<std::string, Tensor<T>*> params;
  src.visit_params([&](Parameter<T>& p) { params[p.name] = &p.tensor; });
  dst.visit_params([&](Parameter<T>& p) {
    auto it = params.find(p.name);
    TAPSED_CHECK(it != params.end(), "copy: missing parameter " + p.name);
    p.tensor.data() = it->second->data();
  });
  std::map<std::string, std::vector<double>*> bufs;
  src.visit_buffers([&](const StatBuffer& b) { bufs[b.name] = b.values; });
  dst.visit_buffers([&](const StatBuffer& b) { *b.values = *bufs.at(b.name); });
}

// ---------------------------------------------------------------------------
// Batch assembly
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> features_to_tensor(const std::vector<FeatureClip>& clips) {
  TAPSED_CHECK(!clips.empty(), "batch: no clips");
  const int64_t b = static_cast<int64_t>(clips.size());
  const int64_t mels = clips[0].n_mels, frames = clips[0].frames;
  Tensor<T> out = Tensor<T>::zeros({b, 1, mels, frames});
  for (int64_t i = 0; i < b; ++i) {
    TAPSED_CHECK(clips[i].n_mels == mels && clips[i].frames == frames,
                 "batch: inconsistent feature shapes");
    for (size_t j = 0; j < clips[i].feat.size(); ++j)
      out.data()[i * mels * frames + j] = static_cast<T>(clips[i].feat[j]);
  }
  return out;
}

struct EpochLog {
  int64_t epoch = 0;
  double loss = 0.0;
  double strong = 0.0;
  double weak = 0.0;
  double consistency = 0.0;
  double val_psds1 = 0.0;
};

inline std::string epoch_log_line(const EpochLog& e) {
  std::ostringstream os;
  os.precision(10);
  os << e.epoch << "\t" << e.loss << "\t" << e.strong << "\t" << e.weak << "\t"
     << e.consistency << "\t" << e.val_psds1;
  return os.str();
}

// ---------------------------------------------------------------------------
// Inference helpers (shared with the eval CLI)
// ---------------------------------------------------------------------------

struct ClipPrediction {
  std::string id;
  std::vector<double> strong;  // [classes x frames_out]
  std::vector<double> weak;    // [classes]
  int64_t frames_out = 0;
};

template <class T>
ClipPrediction predict_clip(SedModel<T>& model, const FeatureClip& clip) {
  std::vector<FeatureClip> one{clip};
  Tensor<T> feats = features_to_tensor<T>(one);
  Predictions<T> preds = model.forward(nullptr, feats, /*training=*/false);
  ClipPrediction out;
  out.id = clip.id;
  const int64_t classes = preds.strong.extent(1);
  out.frames_out = preds.strong.extent(2);
  out.strong.resize(classes * out.frames_out);
  for (size_t i = 0; i < out.strong.size(); ++i)
    out.strong[i] = static_cast<double>(preds.strong.data()[i]);
  out.weak.resize(classes);
  for (int64_t c = 0; c < classes; ++c)
    out.weak[c] = static_cast<double>(preds.weak.data()[c]);
  return out;
}

// Runs post-processing at every configured threshold and scores PSDS.
template <class T>
double validation_psds(SedModel<T>& model, const Dataset& val,
                       const RunConfig& cfg, eval::PsdsReport* report = nullptr,
                       std::vector<ClipPrediction>* predictions = nullptr) {
  const double frame_seconds =
      static_cast<double>(cfg.audio.hop) * cfg.model.time_pool_total() /
      static_cast<double>(cfg.audio.sample_rate);
  const double clip_seconds = static_cast<double>(cfg.audio.clip_samples) /
                              static_cast<double>(cfg.audio.sample_rate);
  const auto thresholds = cfg.eval.psds.threshold_values();
  std::vector<eval::EventList> per_op(thresholds.size());
  for (const auto& clip : val.clips) {
    ClipPrediction pred = predict_clip(model, clip);
    for (size_t ti = 0; ti < thresholds.size(); ++ti) {
      eval::EventList evs = eval::detect_events(
          pred.strong, cfg.model.classes, pred.frames_out, pred.weak, clip.id,
          thresholds[ti], frame_seconds, clip_seconds, cfg.eval.median_length,
          cfg.eval.weak_mask_mode);
      per_op[ti].insert(per_op[ti].end(), evs.begin(), evs.end());
    }
    if (predictions) predictions->push_back(std::move(pred));
  }
  const double hours = static_cast<double>(val.clips.size()) * clip_seconds / 3600.0;
  return eval::psds(per_op, val.ground_truth,
                    static_cast<int>(cfg.model.classes), cfg.eval.psds,
                    hours, report);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainData {
  Dataset strong;
  Dataset weak;
  Dataset unlabeled;
  Dataset val;
};

inline TrainData load_train_data(const RunConfig& cfg,
                                 const std::string& data_dir) {
  TrainData data;
  const auto& names = synth::class_names();
  data.strong = load_strong_dataset(data_dir, data_dir + "/strong.tsv",
                                    cfg.audio, names);
  data.weak =
      load_weak_dataset(data_dir, data_dir + "/weak.tsv", cfg.audio, names);
  data.unlabeled = load_unlabeled_dataset(
      data_dir, data_dir + "/unlabeled.tsv", cfg.audio);
  data.val = load_strong_dataset(data_dir, data_dir + "/val.tsv", cfg.audio,
                                 names);
  return data;
}

template <class T>
struct TrainOutcome {
  std::vector<EpochLog> log;
  double final_val_psds1 = 0.0;
};

template <class T>
TrainOutcome<T> train_loop(const RunConfig& cfg, const TrainData& data,
                           const std::string& out_dir, int64_t epochs) {
  namespace fs = std::filesystem;
  const TrainingConfig& tc = cfg.training;
  TAPSED_CHECK(!data.strong.clips.empty() && !data.weak.clips.empty() &&
                   !data.unlabeled.clips.empty(),
               "train: all of strong/weak/unlabeled must be non-empty");
  fs::create_directories(out_dir);

  SedModel<T> student(cfg.model);
  student.init(cfg.seed);
  SedModel<T> teacher(cfg.model);
  copy_parameters(teacher, student);
  teacher.set_dropout_seed(cfg.seed ^ 0x9e3779b9u);

  Adam<T> optimizer(tc.lr, tc.adam_beta1, tc.adam_beta2, tc.adam_eps);
  const int64_t steps_per_epoch = std::max<int64_t>(
      1, static_cast<int64_t>(data.strong.clips.size()) / tc.batch_strong);
  const int64_t time_pool = cfg.model.time_pool_total();

  std::ofstream log_file(out_dir + "/train_log.tsv");
  if (!log_file)
    throw std::runtime_error("train: cannot write log in " + out_dir);

  auto pick = [](const Dataset& ds, uint64_t seed, const char* name,
                 int64_t epoch, int64_t step, int64_t count) {
    // Epoch-seeded shuffled order, consumed step by step, wrapping.
    const int64_t n = static_cast<int64_t>(ds.clips.size());
    std::vector<int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    SeqRng rng(seed, std::string("order.") + name,
               static_cast<uint64_t>(epoch));
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(static_cast<uint64_t>(i + 1))]);
    std::vector<FeatureClip> out;
    for (int64_t i = 0; i < count; ++i)
      out.push_back(ds.clips[order[(step * count + i) % n]]);
    return out;
  };

  TrainOutcome<T> outcome;
  uint64_t global_step = 0;
  for (int64_t epoch = 0; epoch < epochs; ++epoch) {
    const double w_c = consistency_ramp(epoch, tc.consistency_max,
                                        tc.consistency_ramp_epochs);
    EpochLog elog;
    elog.epoch = epoch;
    for (int64_t step = 0; step < steps_per_epoch; ++step, ++global_step) {
      std::vector<FeatureClip> strong =
          pick(data.strong, cfg.seed, "strong", epoch, step, tc.batch_strong);
      std::vector<FeatureClip> weak =
          pick(data.weak, cfg.seed, "weak", epoch, step, tc.batch_weak);
      std::vector<FeatureClip> unlabeled = pick(
          data.unlabeled, cfg.seed, "unlabeled", epoch, step, tc.batch_unlabeled);

      // Shared geometric augmentations (labels move with features).
      SeqRng aug(cfg.seed, "aug", global_step);
      for (auto* subset : {&strong, &weak, &unlabeled})
        for (auto& clip : *subset) {
          frameshift_random(clip, tc.frameshift_max, aug);
          time_mask_random(clip, tc.time_mask_max_frames, aug);
        }
      mixup(strong, tc.mixup_alpha, aug);
      mixup(weak, tc.mixup_alpha, aug);

      std::vector<FeatureClip> batch;
      batch.insert(batch.end(), strong.begin(), strong.end());
      batch.insert(batch.end(), weak.begin(), weak.end());
      batch.insert(batch.end(), unlabeled.begin(), unlabeled.end());

      // Independent filtering per model view.
      std::vector<FeatureClip> student_view = batch;
      std::vector<FeatureClip> teacher_view = batch;
      SeqRng fa_student(cfg.seed, "filteraug.student", global_step);
      SeqRng fa_teacher(cfg.seed, "filteraug.teacher", global_step);
      for (auto& clip : student_view)
        filter_augment(clip, tc.filter_bands_min, tc.filter_bands_max,
                       tc.filter_gain_db, fa_student);
      for (auto& clip : teacher_view)
        filter_augment(clip, tc.filter_bands_min, tc.filter_bands_max,
                       tc.filter_gain_db, fa_teacher);

      // Labels for the loss.
      const int64_t frames = strong[0].frames;
      const int64_t out_frames = frames / time_pool;
      Tensor<T> strong_labels =
          Tensor<T>::zeros({tc.batch_strong, cfg.model.classes, out_frames});
      for (int64_t i = 0; i < tc.batch_strong; ++i) {
        const auto pooled = pool_labels(strong[i].strong, cfg.model.classes,
                                        frames, time_pool);
        for (size_t j = 0; j < pooled.size(); ++j)
          strong_labels.data()[i * cfg.model.classes * out_frames + j] =
              static_cast<T>(pooled[j]);
      }
      Tensor<T> weak_labels =
          Tensor<T>::zeros({tc.batch_weak, cfg.model.classes});
      for (int64_t i = 0; i < tc.batch_weak; ++i)
        for (int64_t c = 0; c < cfg.model.classes; ++c)
          weak_labels.data()[i * cfg.model.classes + c] =
              static_cast<T>(weak[i].weak[c]);

      Tensor<T> student_feats = features_to_tensor<T>(student_view);
      Tensor<T> teacher_feats = features_to_tensor<T>(teacher_view);

      // Teacher forward: train-mode statistics, no tape, no stat updates.
      Predictions<T> teacher_preds = teacher.forward(
          nullptr, teacher_feats, /*training=*/true, global_step,
          /*update_stats=*/false);

      Tape<T> tape;
      Predictions<T> student_preds = student.forward(
          &tape, student_feats, /*training=*/true, global_step,
          /*update_stats=*/true);

      student.zero_grads();
      LossBreakdown<T> loss = total_loss(
          &tape, student_preds, teacher_preds, strong_labels, weak_labels,
          tc.batch_strong, tc.batch_weak, tc.weak_loss_weight, w_c,
          tc.consistency_detach_teacher);
      tape.backward(loss.total);
      optimizer.step(student);
      ema_update(teacher, student, tc.ema_decay);
      ema_update_buffers(teacher, student, tc.ema_decay);

      elog.loss += static_cast<double>(loss.total.item());
      elog.strong += loss.strong;
      elog.weak += loss.weak;
      elog.consistency += loss.consistency;
    }
    elog.loss /= steps_per_epoch;
    elog.strong /= steps_per_epoch;
    elog.weak /= steps_per_epoch;
    elog.consistency /= steps_per_epoch;
    if (!data.val.clips.empty())
      elog.val_psds1 = validation_psds(student, data.val, cfg);
    log_file << epoch_log_line(elog) << "\n";
    log_file.flush();
    outcome.log.push_back(elog);
    outcome.final_val_psds1 = elog.val_psds1;
  }

  const KeyValues kv = run_config_to(cfg);
  save_checkpoint(out_dir + "/model.ckpt", student, kv.serialize());
  return outcome;
}

}  // namespace tapsed::train
