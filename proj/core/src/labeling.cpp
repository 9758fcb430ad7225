#include "strokeppg/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace strokeppg {

LabelOutcome assign_label(double t, const LabelParams& p) {
  if (t > 0.0 || t < -p.horizon_start) return LabelOutcome::DroppedOutOfRange;
  if (t > -p.delta_0) return LabelOutcome::DroppedLeadTime;          // (-d0, 0]
  if (t >= -(p.T_w - p.delta_pre)) return LabelOutcome::Warning;     // [-(Tw-dp), -d0]
  if (t >= -(p.T_w + p.delta_pre)) return LabelOutcome::DroppedBuffer;
  return LabelOutcome::Normal;                                       // [-horizon, -(Tw+dp))
}

namespace {

double median(std::vector<double>& v) {
  size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lo + hi);
}

}  // namespace

namespace {

std::vector<LabeledWindow> window_impl(const FeatureMatrix& m, double anchor_epoch_s,
                                       bool labeled, const LabelParams& p, int L,
                                       int stride) {
  if (!p.valid()) throw std::invalid_argument("window_dataset: invalid LabelParams");
  if (L < 1 || stride < 1) throw std::invalid_argument("window_dataset: bad L/stride");
  std::vector<LabeledWindow> out;
  if (m.rows.empty()) return out;

  // 1-minute grid keyed by floor(minutes relative to the anchor).
  long k_min = std::numeric_limits<long>::max(), k_max = std::numeric_limits<long>::min();
  for (const auto& r : m.rows) {
    long k = static_cast<long>(std::floor((r.timestamp - anchor_epoch_s) / 60.0));
    k_min = std::min(k_min, k);
    k_max = std::max(k_max, k);
  }
  long n_min = k_max - k_min + 1;
  if (n_min < L) return out;

  std::vector<std::array<std::vector<double>, kNumFeatures>> bins(n_min);
  std::vector<std::set<std::string>> sources(n_min);
  for (const auto& r : m.rows) {
    long k = static_cast<long>(std::floor((r.timestamp - anchor_epoch_s) / 60.0)) - k_min;
    sources[k].insert(r.source_id);
    for (int f = 0; f < kNumFeatures; ++f)
      if (r.values[f]) bins[k][f].push_back(*r.values[f]);
  }
  std::vector<std::array<std::optional<double>, kNumFeatures>> grid(n_min);
  for (long k = 0; k < n_min; ++k)
    for (int f = 0; f < kNumFeatures; ++f)
      if (!bins[k][f].empty()) grid[k][f] = median(bins[k][f]);

  for (long start = 0; start + L <= n_min; start += stride) {
    // Whole-window same-zone rule over minute centers. Records without an
    // onset (controls) are Normal throughout.
    LabelOutcome zone = labeled
                            ? assign_label(static_cast<double>(k_min + start) + 0.5, p)
                            : LabelOutcome::Normal;
    if (zone != LabelOutcome::Warning && zone != LabelOutcome::Normal) continue;
    bool ok = true;
    std::set<std::string> srcs;
    for (long j = 0; j < L && ok; ++j) {
      double tc = static_cast<double>(k_min + start + j) + 0.5;
      if (labeled && assign_label(tc, p) != zone) ok = false;
      srcs.insert(sources[start + j].begin(), sources[start + j].end());
    }
    if (!ok || srcs.size() > 1) continue;

    long gaps = 0;
    for (long j = 0; j < L; ++j)
      for (int f = 0; f < kNumFeatures; ++f)
        if (!grid[start + j][f]) ++gaps;
    if (static_cast<double>(gaps) > 0.2 * static_cast<double>(L) * kNumFeatures) continue;

    LabeledWindow w;
    w.patient_id = m.patient_id;
    w.t_center = static_cast<double>(k_min + start) + static_cast<double>(L) / 2.0;
    w.label = zone == LabelOutcome::Warning ? 1 : 0;
    w.features.assign(static_cast<size_t>(kNumFeatures) * L, 0.0);
    for (int f = 0; f < kNumFeatures; ++f) {
      double mean = 0.0;
      int n = 0;
      for (long j = 0; j < L; ++j)
        if (grid[start + j][f]) {
          mean += *grid[start + j][f];
          ++n;
        }
      mean = n > 0 ? mean / n : 0.0;
      double last = mean;  // leading gaps take the window mean
      for (long j = 0; j < L; ++j) {
        if (grid[start + j][f]) last = *grid[start + j][f];
        w.features[static_cast<size_t>(f) * L + j] = last;
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

std::vector<LabeledWindow> window_dataset(const FeatureMatrix& m, double onset_epoch_s,
                                          const LabelParams& p, int L, int stride) {
  return window_impl(m, onset_epoch_s, true, p, L, stride);
}

std::vector<LabeledWindow> window_dataset_control(const FeatureMatrix& m,
                                                  const LabelParams& p, int L,
                                                  int stride) {
  double anchor = m.rows.empty() ? 0.0 : m.rows.front().timestamp;
  return window_impl(m, anchor, false, p, L, stride);
}

void save_labeled_dataset(const std::filesystem::path& csv_path, const LabeledDataset& d) {
  std::FILE* f = std::fopen(csv_path.string().c_str(), "w");
  if (!f) throw std::runtime_error("save_labeled_dataset: cannot open " + csv_path.string());
  std::fprintf(f, "# L=%d F=%d Tw=%.10g dpre=%.10g d0=%.10g horizon=%.10g columns=%s\n",
               d.L, d.F, d.params.T_w, d.params.delta_pre, d.params.delta_0,
               d.params.horizon_start, kColumnOrderVersion);
  for (const auto& w : d.windows) {
    std::fprintf(f, "%s,%.6f,%d", w.patient_id.c_str(), w.t_center, w.label);
    for (double v : w.features) std::fprintf(f, ",%.12g", v);
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

LabeledDataset load_labeled_dataset(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("load_labeled_dataset: cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#')
    throw std::runtime_error("load_labeled_dataset: missing header in " + csv_path.string());
  LabeledDataset d;
  {
    std::istringstream hs(line.substr(1));
    std::string tok;
    while (hs >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "L") d.L = std::stoi(val);
      else if (key == "F") d.F = std::stoi(val);
      else if (key == "Tw") d.params.T_w = std::stod(val);
      else if (key == "dpre") d.params.delta_pre = std::stod(val);
      else if (key == "d0") d.params.delta_0 = std::stod(val);
      else if (key == "horizon") d.params.horizon_start = std::stod(val);
    }
  }
  d.feature_names.assign(kFeatureNames.begin(), kFeatureNames.end());
  size_t expect = static_cast<size_t>(d.L) * d.F;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LabeledWindow w;
    std::istringstream ls(line);
    std::string tok;
    std::getline(ls, tok, ',');
    w.patient_id = tok;
    std::getline(ls, tok, ',');
    w.t_center = std::stod(tok);
    std::getline(ls, tok, ',');
    w.label = std::stoi(tok);
    w.features.reserve(expect);
    while (std::getline(ls, tok, ',')) w.features.push_back(std::stod(tok));
    if (w.features.size() != expect)
      throw std::runtime_error("load_labeled_dataset: wrong cell count in row");
    d.windows.push_back(std::move(w));
  }
  return d;
}

}  // namespace strokeppg
