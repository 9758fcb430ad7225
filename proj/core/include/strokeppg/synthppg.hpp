#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "strokeppg/evaluation.hpp"
#include "strokeppg/ingest.hpp"

namespace strokeppg {

// Two-Gaussian pulse: systolic bump + diastolic hump on a flat baseline.
// Centers and widths are fractions of the pulse interval.
struct BeatModel {
  double a1 = 1.0, mu1 = 0.25, sigma1 = 0.08;
  double a2 = 0.4, mu2 = 0.60, sigma2 = 0.14;
  double baseline = 0.1;
  double T_pi = 1.0;  // seconds

  bool valid() const {
    return 0.0 < mu1 && mu1 < mu2 && mu2 < 1.0 && a1 > a2 && a2 >= 0.0 &&
           sigma1 > 0.0 && sigma2 > 0.0 && T_pi > 0.0;
  }
};

// Linear pre-onset drift in generator parameters (fractional change per
// hour), plus measurement noise and heart-rate jitter.
struct DriftSpec {
  double delta_Tsp_per_h = 0.0;   // fractional drift of mu1
  double delta_Asp_per_h = 0.0;   // fractional drift of a1
  double noise_sd_frac = 0.0;     // white noise sd as fraction of a1
  double hr_jitter_sd = 0.0;      // per-beat T_pi jitter (fraction)
  double drift_window_s = 6.0 * 3600.0;
};

struct BeatTruth {
  double onset_t = 0.0;  // seconds from record start (analytic minimum)
  double sp_t = 0.0;     // analytic systolic peak time
  double T_sp = 0.0;     // peak delay from beat start: mu1 * T_pi
  double A_sp = 0.0;     // drifted systolic amplitude
  double T_pi = 0.0;
};

struct SynthRecord {
  Waveform wave;
  std::vector<BeatTruth> truth;
};

SynthRecord synth_record(const BeatModel& model, double duration_s, double fs,
                         const DriftSpec& drift, std::optional<double> onset_at_s,
                         uint64_t seed);

struct CohortParams {
  int n_pos = 20, n_neg = 20;
  double fs = 125.0;
  double pre_onset_s = 540.0 * 60.0;  // record length before onset
  double tail_s = 60.0;
  DriftSpec drift;  // applied to positives only
  uint64_t seed = 1;
  bool write_notes = true;
  double base_epoch = 1551657600.0;  // 2019-03-04T00:00:00Z
};

struct CohortManifest {
  std::map<std::string, double> onsets;  // patient -> epoch s (positives)
  std::map<std::string, Strata> strata;
  std::map<std::string, std::string> waveform_files;
  uint64_t seed = 0;
};

// Writes one waveform CSV per patient plus manifest.json (onsets, strata,
// generator params) and, for positives, a notes.jsonl exercising the
// note parser.
CohortManifest synth_cohort(const std::filesystem::path& outdir, const CohortParams& p);

void save_cohort_manifest(const std::filesystem::path& path, const CohortManifest& m);
CohortManifest load_cohort_manifest(const std::filesystem::path& path);

}  // namespace strokeppg
