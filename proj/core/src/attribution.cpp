#include "strokeppg/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace strokeppg {

namespace {

// phi from a full table of coalition values; weights s!(F-1-s)!/F! computed
// as 1 / (F * C(F-1, s)) from Pascal's row.
AttributionResult shapley_from_table(int F, const std::vector<double>& value) {
  std::vector<double> binom(F, 1.0);
  for (int s = 1; s < F; ++s)
    binom[s] = binom[s - 1] * static_cast<double>(F - s) / static_cast<double>(s);
  std::vector<double> w(F);
  for (int s = 0; s < F; ++s) w[s] = 1.0 / (static_cast<double>(F) * binom[s]);

  AttributionResult r;
  r.phi.assign(F, 0.0);
  r.base_value = value.front();
  r.fx = value.back();
  for (int i = 0; i < F; ++i) {
    size_t bit = size_t{1} << i;
    for (size_t mask = 0; mask < value.size(); ++mask) {
      if (mask & bit) continue;
      int s = std::popcount(mask);
      r.phi[i] += w[s] * (value[mask | bit] - value[mask]);
    }
  }
  return r;
}

}  // namespace

AttributionResult exact_shapley(const std::function<double(const std::vector<double>&)>& score_fn,
                                const std::vector<double>& x,
                                const std::vector<std::vector<double>>& background) {
  int F = static_cast<int>(x.size());
  if (F > 20)
    throw std::invalid_argument(
        "exact_shapley: F > 20 would need 2^F evaluations; subset the features first");
  if (background.empty()) throw std::invalid_argument("exact_shapley: empty background");

  std::vector<double> bg_mean(F, 0.0);
  for (const auto& row : background) {
    if (static_cast<int>(row.size()) != F)
      throw std::invalid_argument("exact_shapley: background dimension mismatch");
    for (int f = 0; f < F; ++f) bg_mean[f] += row[f];
  }
  for (double& v : bg_mean) v /= static_cast<double>(background.size());

  size_t n_sets = size_t{1} << F;
  std::vector<double> value(n_sets);
  std::vector<double> point(F);
  for (size_t mask = 0; mask < n_sets; ++mask) {
    for (int f = 0; f < F; ++f)
      point[f] = (mask >> f) & 1 ? x[f] : bg_mean[f];
    value[mask] = score_fn(point);
  }
  return shapley_from_table(F, value);
}

AttributionResult explain_window(const ModelCheckpoint& ckpt,
                                 const std::vector<double>& window_features,
                                 const std::vector<double>& background_mean) {
  Network net(ckpt.arch);
  int F = ckpt.arch.in_channels;
  int L = ckpt.arch.input_len;
  if (static_cast<int>(window_features.size()) != F * L)
    throw std::invalid_argument("explain_window: window shape mismatch");
  if (static_cast<int>(background_mean.size()) != F)
    throw std::invalid_argument("explain_window: background shape mismatch");
  if (F > 20)
    throw std::invalid_argument("explain_window: F > 20; subset the features first");

  // Coalitions act on whole feature columns: an absent feature is the
  // background mean at every timestep. Score = positive-class logit.
  std::vector<double> stats = ckpt.running_stats;
  size_t n_sets = size_t{1} << F;
  std::vector<double> value(n_sets);
  std::vector<double> input(static_cast<size_t>(F) * L);
  for (size_t mask = 0; mask < n_sets; ++mask) {
    for (int f = 0; f < F; ++f) {
      bool present = (mask >> f) & 1;
      for (int t = 0; t < L; ++t)
        input[static_cast<size_t>(f) * L + t] =
            present ? window_features[static_cast<size_t>(f) * L + t] : background_mean[f];
    }
    auto logits = net.forward(ckpt.params, stats, input, 1, false);
    value[mask] = logits[1];
  }
  return shapley_from_table(F, value);
}

AttributionSummary attribution_summary(const std::vector<AttributionResult>& results,
                                       const std::vector<std::string>& feature_names,
                                       size_t waterfall_instance) {
  if (results.empty()) throw std::invalid_argument("attribution_summary: no results");
  size_t F = results.front().phi.size();
  AttributionSummary s;
  s.feature_names = feature_names;
  s.mean_abs_phi.assign(F, 0.0);
  s.mean_phi.assign(F, 0.0);
  for (const auto& r : results)
    for (size_t f = 0; f < F; ++f) {
      s.mean_abs_phi[f] += std::abs(r.phi[f]);
      s.mean_phi[f] += r.phi[f];
    }
  for (size_t f = 0; f < F; ++f) {
    s.mean_abs_phi[f] /= static_cast<double>(results.size());
    s.mean_phi[f] /= static_cast<double>(results.size());
  }
  s.ranking.resize(F);
  std::iota(s.ranking.begin(), s.ranking.end(), 0);
  std::stable_sort(s.ranking.begin(), s.ranking.end(),
                   [&](int a, int b) { return s.mean_abs_phi[a] > s.mean_abs_phi[b]; });

  const auto& inst = results.at(waterfall_instance);
  std::vector<int> order(F);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(inst.phi[a]) > std::abs(inst.phi[b]);
  });
  for (int f : order)
    s.waterfall.push_back({f < static_cast<int>(feature_names.size())
                               ? feature_names[f]
                               : "f" + std::to_string(f),
                           inst.phi[f]});
  s.waterfall_base = inst.base_value;
  s.waterfall_fx = inst.fx;
  return s;
}

void save_attribution_report(const std::filesystem::path& path,
                             const AttributionSummary& summary,
                             const std::vector<AttributionResult>& results) {
  nlohmann::json j;
  for (size_t f = 0; f < summary.mean_abs_phi.size(); ++f)
    j["features"].push_back({{"name", f < summary.feature_names.size()
                                          ? summary.feature_names[f]
                                          : "f" + std::to_string(f)},
                             {"mean_abs_phi", summary.mean_abs_phi[f]},
                             {"mean_phi", summary.mean_phi[f]}});
  j["ranking"] = summary.ranking;
  for (const auto& [name, phi] : summary.waterfall)
    j["waterfall"].push_back({{"feature", name}, {"phi", phi}});
  j["waterfall_base"] = summary.waterfall_base;
  j["waterfall_fx"] = summary.waterfall_fx;
  for (const auto& r : results)
    j["instances"].push_back(
        {{"phi", r.phi}, {"base_value", r.base_value}, {"fx", r.fx}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_attribution_report: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace strokeppg
