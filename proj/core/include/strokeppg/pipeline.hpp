#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "strokeppg/labeling.hpp"
#include "strokeppg/resnet1d.hpp"
#include "strokeppg/synthppg.hpp"

namespace strokeppg {

// Everything a full run needs, loadable from one JSON file. Paths are
// resolved relative to the config file's directory when relative.
struct PipelineConfig {
  std::filesystem::path data_dir = "cohort";
  std::filesystem::path out_dir = "out";

  double target_fs = 125.0;
  double band_lo = 0.5, band_hi = 12.0;
  double baseline_window_s = 3600.0;
  int cv_window = 30;

  LabelParams label;
  int L = 30;
  int train_stride = 30;
  int eval_stride = 5;

  double d_min = 0.05;
  double r_max = 0.80;
  TrainConfig train;
  int n_explain = 8;

  CohortParams synth;
  std::vector<double> windows_min;  // warning-window sweep; empty -> {label.T_w}

  std::vector<double> sweep() const {
    return windows_min.empty() ? std::vector<double>{label.T_w} : windows_min;
  }
  std::filesystem::path window_dir(double T_w) const;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void save_pipeline_config(const std::filesystem::path& path, const PipelineConfig& cfg);

// FNV-1a 64-bit content hashes keep stage manifests deterministic without
// any wall-clock fields.
uint64_t fnv1a64(const void* data, size_t n);
uint64_t file_hash(const std::filesystem::path& path);
uint64_t config_hash(const PipelineConfig& cfg);

std::map<std::string, double> load_onset_csv(const std::filesystem::path& path);

// Stages. Each writes its artifacts plus <stage>_manifest.json under the
// output directory; `log` (optional) receives one-line progress notes.
void run_synth(const PipelineConfig& cfg, std::ostream* log = nullptr);
void run_parse_notes(const PipelineConfig& cfg, std::ostream* log = nullptr);
void run_extract(const PipelineConfig& cfg, std::ostream* log = nullptr);
void run_label(const PipelineConfig& cfg, double T_w, std::ostream* log = nullptr);
void run_select(const PipelineConfig& cfg, double T_w, std::ostream* log = nullptr);
void run_train(const PipelineConfig& cfg, double T_w, std::ostream* log = nullptr);
void run_eval(const PipelineConfig& cfg, double T_w, std::ostream* log = nullptr);
void run_attribute(const PipelineConfig& cfg, double T_w, std::ostream* log = nullptr);
void run_report(const PipelineConfig& cfg, std::ostream* log = nullptr);

// synth (when the cohort is absent) -> parse-notes -> extract, then
// label/select/train/eval/attribute per warning-window length, then report.
void run_all(const PipelineConfig& cfg, std::ostream* log = nullptr);

}  // namespace strokeppg
