#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "strokeppg/biomarkers.hpp"

namespace strokeppg {

// All times in minutes relative to stroke onset (t = 0), negative before.
struct LabelParams {
  double T_w = 360.0;          // warning-window length
  double delta_pre = 15.0;     // buffer half-width
  double delta_0 = 15.0;       // lead-time blind spot
  double horizon_start = 480;  // earliest labeled time

  bool valid() const {
    return T_w - delta_pre > delta_0 && T_w + delta_pre < horizon_start;
  }
};

enum class LabelOutcome {
  Warning,
  Normal,
  DroppedBuffer,
  DroppedLeadTime,
  DroppedOutOfRange,
};

LabelOutcome assign_label(double t_min, const LabelParams& p);

struct LabeledWindow {
  std::string patient_id;
  double t_center = 0.0;        // minutes relative to onset
  int label = 0;                // 1 = Warning, 0 = Normal
  std::vector<double> features; // F x L row-major: features[f*L + t]
};

struct LabeledDataset {
  int L = 0;                    // timesteps per window (1-minute grid)
  int F = kNumFeatures;
  std::vector<std::string> feature_names;
  LabelParams params;
  std::vector<LabeledWindow> windows;
};

// Aggregates the beat matrix onto a 1-minute median grid and cuts
// L-minute windows with the given stride. A window is emitted only if all
// its timesteps fall in the same Warning/Normal zone, it stays within one
// source segment, and has <= 20% gap cells (remaining gaps forward-filled,
// leading gaps set to the per-feature window mean).
std::vector<LabeledWindow> window_dataset(const FeatureMatrix& m, double onset_epoch_s,
                                          const LabelParams& p, int L, int stride);

// Control records have no onset: every window is Normal, with t_center in
// minutes from the start of the record. Gap/source rules still apply.
std::vector<LabeledWindow> window_dataset_control(const FeatureMatrix& m,
                                                  const LabelParams& p, int L,
                                                  int stride);

void save_labeled_dataset(const std::filesystem::path& csv_path, const LabeledDataset& d);
LabeledDataset load_labeled_dataset(const std::filesystem::path& csv_path);

}  // namespace strokeppg
