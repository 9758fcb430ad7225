#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "strokeppg/labeling.hpp"

namespace strokeppg {

struct CorrelatedPair {
  int f1 = 0, f2 = 0;
  double r = 0.0;
};

struct FeatureDecision {
  std::string name;
  double cohens_d = 0.0;
  bool kept = true;
  std::string dropped_reason;  // "", "LowEffect", or "Redundant(<name>)"
};

struct SelectionReport {
  std::vector<FeatureDecision> decisions;
  std::vector<CorrelatedPair> pearson_pairs;  // |r| > r_max
  std::vector<int> kept;                      // indices into feature columns
};

// Standardized mean difference (b relative to a) with pooled Bessel-corrected
// variance. Zero-variance cases: equal means -> 0, else signed infinity.
double cohens_d(const std::vector<double>& a, const std::vector<double>& b);

// Product-moment correlation; zero variance on either side -> 0 sentinel.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

// Stage 1 drops |d| <= d_min; stage 2 walks |r| > r_max pairs in descending
// |r| and drops the member with the smaller |d| (tie: later column).
// Effect sizes use per-window feature means, Normal vs Warning.
SelectionReport select_features(const LabeledDataset& dataset, double d_min = 0.05,
                                double r_max = 0.80);

void save_selection_report(const std::filesystem::path& path, const SelectionReport& r);

}  // namespace strokeppg
