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

// Command-line front end.
//
//   tapsed synth     --config cfg --out dir [--seed S]
//   tapsed params    --config cfg [--expect M --tol pct] [--breakdown]
//   tapsed gradcheck [--module name] [--seeds N]
//   tapsed train     --config cfg --data dir --out dir [--epochs N --seed S]
//   tapsed eval      --checkpoint f --data dir [--out dir] [--psds1]
//                    [--classwise-f1] [--runs glob --anova]
//
// Exit codes: 0 success, 1 check failure, 2 usage error, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>

#include <CLI11.hpp>
#include <json.hpp>

#include "tapsed/checkpoint.hpp"
#include "tapsed/config.hpp"
#include "tapsed/gradcheck_suites.hpp"
#include "tapsed/model.hpp"
#include "tapsed/eval/stats.hpp"
#include "tapsed/synth.hpp"
#include "tapsed/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tapsed;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsageError = 2;
constexpr int kIoError = 3;

// Groups parameter counts by the leading name component.
std::map<std::string, int64_t> param_breakdown(SedModel<double>& model) {
  std::map<std::string, int64_t> groups;
  model.visit_params([&](Parameter<double>& p) {
    const auto dot = p.name.find('.');
    groups[p.name.substr(0, dot)] += p.tensor.numel();
  });
  return groups;
}

int cmd_params(const std::string& config_path, double expect, double tol_pct,
               bool breakdown) {
  const RunConfig cfg = load_run_config(config_path);
  SedModel<double> model(cfg.model);
  const int64_t count = model.count_trainable();
  const double millions = params_millions(count);
  std::printf("parameters: %ld (%.3f M)\n", static_cast<long>(count), millions);
  if (breakdown) {
    for (const auto& [group, n] : param_breakdown(model))
      std::printf("  %-8s %12ld (%.3f M)\n", group.c_str(),
                  static_cast<long>(n), params_millions(n));
  }
  if (expect > 0.0) {
    const double err_pct = 100.0 * std::abs(millions - expect) / expect;
    const bool ok = err_pct <= tol_pct;
    std::printf("expected %.3f M +- %.1f%%: %s (deviation %.2f%%)\n", expect,
                tol_pct, ok ? "ok" : "FAILED", err_pct);
    if (!ok) return kCheckFailed;
  }
  return kOk;
}

int cmd_gradcheck(const std::string& module, int seeds) {
  const auto results = run_gradcheck_suites(module, seeds);
  bool all_ok = true;
  for (const auto& r : results) {
    std::printf("%-18s max rel err %.3e (tol %.0e, %d seeds): %s\n",
                r.name.c_str(), r.max_rel_err, r.tolerance, r.seeds,
                r.pass() ? "ok" : "FAILED");
    all_ok &= r.pass();
  }
  return all_ok ? kOk : kCheckFailed;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              int64_t seed_override) {
  RunConfig cfg = load_run_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  const auto out = synth::synthesize_dataset(cfg.synth, cfg.seed, out_dir,
                                             cfg.audio.sample_rate,
                                             cfg.audio.clip_samples);
  std::printf("wrote %s\n", out.strong_manifest.c_str());
  std::printf("wrote %s\n", out.weak_manifest.c_str());
  std::printf("wrote %s\n", out.unlabeled_manifest.c_str());
  std::printf("wrote %s\n", out.val_ground_truth.c_str());
  return kOk;
}

template <class T>
int run_training(RunConfig cfg, const std::string& data_dir,
                 const std::string& out_dir, int64_t epochs) {
  const auto data = train::load_train_data(cfg, data_dir);
  const auto outcome = train::train_loop<T>(cfg, data, out_dir, epochs);
  for (const auto& e : outcome.log)
    std::printf("epoch %ld  loss %.6f  strong %.6f  weak %.6f  cons %.6f  "
                "val_psds1 %.4f\n",
                static_cast<long>(e.epoch), e.loss, e.strong, e.weak,
                e.consistency, e.val_psds1);
  std::printf("checkpoint: %s/model.ckpt\n", out_dir.c_str());
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, int64_t epochs,
              int64_t seed_override) {
  RunConfig cfg = load_run_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  if (epochs <= 0) epochs = cfg.training.epochs;
  if (cfg.training.precision == "f64")
    return run_training<double>(cfg, data_dir, out_dir, epochs);
  return run_training<float>(cfg, data_dir, out_dir, epochs);
}

std::vector<std::string> expand_glob(const std::string& pattern) {
  const fs::path p(pattern);
  const fs::path dir = p.parent_path().empty() ? "." : p.parent_path();
  // Translate a shell-style '*' pattern into a regex.
  std::string rx;
  for (char c : p.filename().string()) {
    if (c == '*')
      rx += ".*";
    else if (std::string("\\^$.|?+()[]{}").find(c) != std::string::npos)
      rx += std::string("\\") + c;
    else
      rx += c;
  }
  std::vector<std::string> out;
  if (!fs::exists(dir)) return out;
  const std::regex re(rx);
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() &&
        std::regex_match(entry.path().filename().string(), re))
      out.push_back(entry.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

int run_anova(const std::string& runs_glob) {
  const auto files = expand_glob(runs_glob);
  if (files.size() < 2) {
    std::fprintf(stderr, "anova: need >= 2 run reports, glob matched %zu\n",
                 files.size());
    return kUsageError;
  }
  // model name -> class -> samples over runs
  std::map<std::string, std::vector<std::vector<double>>> by_model;
  const auto& names = synth::class_names();
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("anova: cannot open " + file);
    json j;
    in >> j;
    const std::string model = j.value("model", "unknown");
    auto& rows = by_model[model];
    if (rows.empty()) rows.resize(names.size());
    for (size_t c = 0; c < names.size(); ++c)
      rows[c].push_back(j["classwise_f1"][names[c]].get<double>());
  }
  if (by_model.size() < 2) {
    std::fprintf(stderr, "anova: reports cover a single model '%s'\n",
                 by_model.begin()->first.c_str());
    return kUsageError;
  }
  std::vector<std::string> model_names;
  for (const auto& [m, _] : by_model) model_names.push_back(m);
  std::printf("%-16s %-10s %-8s %s\n", "class", "anova_F", "p", "ordering");
  for (size_t c = 0; c < names.size(); ++c) {
    std::vector<std::vector<double>> groups;
    for (const auto& m : model_names) groups.push_back(by_model[m][c]);
    const auto anova = eval::anova_oneway(groups);
    const auto tukey = eval::tukey_hsd(groups);
    std::printf("%-16s %-10.4f %-8.4f %s\n", names[c].c_str(), anova.f,
                anova.p, eval::tukey_ordering(tukey, model_names).c_str());
  }
  return kOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             std::string out_dir, bool want_psds, bool want_f1,
             const std::string& runs_glob, bool anova) {
  if (anova && !runs_glob.empty()) return run_anova(runs_glob);
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const RunConfig cfg = run_config_from(KeyValues::parse_string(ck.config_text));
  SedModel<double> model(cfg.model);
  restore_model(model, ck);

  const auto& names = synth::class_names();
  train::Dataset val = train::load_strong_dataset(data_dir, data_dir + "/val.tsv",
                                                  cfg.audio, names);
  if (out_dir.empty()) out_dir = fs::path(ckpt_path).parent_path().string();
  if (out_dir.empty()) out_dir = ".";
  fs::create_directories(out_dir);

  eval::PsdsReport report;
  std::vector<train::ClipPrediction> preds;
  const double psds1 = train::validation_psds(model, val, cfg, &report, &preds);

  // Detections at the single decision threshold for F1 + prediction dump.
  const double frame_seconds =
      static_cast<double>(cfg.audio.hop) * cfg.model.time_pool_total() /
      static_cast<double>(cfg.audio.sample_rate);
  const double clip_seconds = static_cast<double>(cfg.audio.clip_samples) /
                              static_cast<double>(cfg.audio.sample_rate);
  eval::EventList detections;
  for (const auto& p : preds) {
    auto evs = eval::detect_events(p.strong, cfg.model.classes, p.frames_out,
                                   p.weak, p.id, cfg.eval.decision_threshold,
                                   frame_seconds, clip_seconds,
                                   cfg.eval.median_length,
                                   cfg.eval.weak_mask_mode);
    detections.insert(detections.end(), evs.begin(), evs.end());
  }
  const auto f1 = eval::classwise_f1(detections, val.ground_truth,
                                     static_cast<int>(cfg.model.classes),
                                     cfg.eval.psds.dtc, cfg.eval.psds.gtc);

  // Text report.
  {
    std::ofstream txt(out_dir + "/eval_report.txt");
    txt << "model = " << to_string(cfg.model.dyn.variant) << "\n";
    txt << "seed = " << cfg.seed << "\n";
    if (want_psds) txt << "psds1 = " << psds1 << "\n";
    if (want_f1) {
      double macro = 0.0;
      for (size_t c = 0; c < names.size(); ++c) {
        txt << "f1." << names[c] << " = " << f1.f1[c] << "\n";
        macro += f1.f1[c];
      }
      txt << "f1.macro = " << macro / names.size() << "\n";
    }
    for (int c : report.excluded_classes)
      txt << "excluded_class = " << names[c] << "\n";
  }
  // Machine-readable report.
  {
    json j;
    j["model"] = to_string(cfg.model.dyn.variant);
    j["seed"] = cfg.seed;
    j["psds1"] = psds1;
    json jf1;
    for (size_t c = 0; c < names.size(); ++c) jf1[names[c]] = f1.f1[c];
    j["classwise_f1"] = jf1;
    j["params_millions"] = params_millions(model.count_trainable());
    json jex = json::array();
    for (int c : report.excluded_classes) jex.push_back(names[c]);
    j["excluded_classes"] = jex;
    std::ofstream(out_dir + "/eval_report.json") << j.dump(2) << "\n";
  }
  train::write_predictions_tsv(out_dir + "/predictions.tsv", detections, names);

  if (want_psds) std::printf("psds1 %.6f\n", psds1);
  if (want_f1)
    for (size_t c = 0; c < names.size(); ++c)
      std::printf("f1 %-16s %.4f\n", names[c].c_str(), f1.f1[c]);
  std::printf("report: %s/eval_report.json\n", out_dir.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frequency-dynamic SED toolkit"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, ckpt_path, module, runs_glob;
  double expect = -1.0, tol = 1.0;
  bool breakdown = false, want_psds = false, want_f1 = false, anova = false;
  int seeds = 20;
  int64_t epochs = -1, seed = -1;

  auto* p_params = app.add_subcommand("params", "count model parameters");
  p_params->add_option("--config", config_path)->required();
  p_params->add_option("--expect", expect, "expected count in millions");
  p_params->add_option("--tol", tol, "tolerance percent");
  p_params->add_flag("--breakdown", breakdown);

  auto* p_grad = app.add_subcommand("gradcheck", "finite-difference checks");
  p_grad->add_option("--module", module);
  p_grad->add_option("--seeds", seeds);

  auto* p_synth = app.add_subcommand("synth", "generate synthetic dataset");
  p_synth->add_option("--config", config_path)->required();
  p_synth->add_option("--spec", config_path, "alias for --config");
  p_synth->add_option("--out", out_dir)->required();
  p_synth->add_option("--seed", seed);

  auto* p_train = app.add_subcommand("train", "train a model");
  p_train->add_option("--config", config_path)->required();
  p_train->add_option("--data", data_dir)->required();
  p_train->add_option("--out", out_dir)->required();
  p_train->add_option("--epochs", epochs);
  p_train->add_option("--seed", seed);

  auto* p_eval = app.add_subcommand("eval", "score a checkpoint");
  p_eval->add_option("--checkpoint", ckpt_path);
  p_eval->add_option("--data", data_dir);
  p_eval->add_option("--out", out_dir);
  p_eval->add_flag("--psds1", want_psds);
  p_eval->add_flag("--classwise-f1", want_f1);
  p_eval->add_option("--runs", runs_glob);
  p_eval->add_flag("--anova", anova);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsageError;
  }

  try {
    if (p_params->parsed()) return cmd_params(config_path, expect, tol, breakdown);
    if (p_grad->parsed()) return cmd_gradcheck(module, seeds);
    if (p_synth->parsed()) return cmd_synth(config_path, out_dir, seed);
    if (p_train->parsed()) {
      if (!want_psds && !want_f1) want_psds = true;
      return cmd_train(config_path, data_dir, out_dir, epochs, seed);
    }
    if (p_eval->parsed()) {
      if (!anova && (ckpt_path.empty() || data_dir.empty())) {
        std::fprintf(stderr, "eval: --checkpoint and --data are required\n");
        return kUsageError;
      }
      if (!want_psds && !want_f1) want_psds = true;
      return cmd_eval(ckpt_path, data_dir, out_dir, want_psds, want_f1,
                      runs_glob, anova);
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIoError;
  }
  return kUsageError;
}
