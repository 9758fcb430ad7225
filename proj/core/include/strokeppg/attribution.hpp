#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "strokeppg/resnet1d.hpp"

namespace strokeppg {

struct AttributionResult {
  std::vector<double> phi;
  double base_value = 0.0;  // score with every feature at the background mean
  double fx = 0.0;          // score at the explained instance
};

// Exact Shapley values by full coalition enumeration (2^F score calls,
// memoized). Feature "absence" replaces the coordinate with the background
// mean. Guarded at F <= 20.
AttributionResult exact_shapley(const std::function<double(const std::vector<double>&)>& score_fn,
                                const std::vector<double>& x,
                                const std::vector<std::vector<double>>& background);

// Model wrapper: explains the positive-class logit of a trained checkpoint
// for one window. Masking a feature replaces its whole column across time
// with the background per-feature mean.
AttributionResult explain_window(const ModelCheckpoint& ckpt,
                                 const std::vector<double>& window_features,  // F_kept x L
                                 const std::vector<double>& background_mean); // F_kept

struct AttributionSummary {
  std::vector<std::string> feature_names;
  std::vector<double> mean_abs_phi;
  std::vector<double> mean_phi;
  std::vector<int> ranking;  // feature indices, descending mean |phi|
  // Waterfall for one chosen instance: (feature, phi) in descending |phi|.
  std::vector<std::pair<std::string, double>> waterfall;
  double waterfall_base = 0.0, waterfall_fx = 0.0;
};

AttributionSummary attribution_summary(const std::vector<AttributionResult>& results,
                                       const std::vector<std::string>& feature_names,
                                       size_t waterfall_instance = 0);

void save_attribution_report(const std::filesystem::path& path,
                             const AttributionSummary& summary,
                             const std::vector<AttributionResult>& results);

}  // namespace strokeppg
