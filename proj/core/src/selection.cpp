#include "strokeppg/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace strokeppg {

double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("cohens_d: need at least 2 samples per group");
  auto mean = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
  };
  auto var = [&](const std::vector<double>& v, double m) {
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  };
  double ma = mean(a), mb = mean(b);
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double sp = std::sqrt(((na - 1.0) * var(a, ma) + (nb - 1.0) * var(b, mb)) / (na + nb - 2.0));
  if (sp == 0.0) {
    if (mb == ma) return 0.0;
    return mb > ma ? std::numeric_limits<double>::infinity()
                   : -std::numeric_limits<double>::infinity();
  }
  return (mb - ma) / sp;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("pearson: need equal lengths >= 2");
  double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;  // undefined -> no pruning signal
  return sab / std::sqrt(saa * sbb);
}

SelectionReport select_features(const LabeledDataset& dataset, double d_min, double r_max) {
  int F = dataset.F;
  int L = dataset.L;
  // Per-window feature means.
  std::vector<std::vector<double>> win_means(dataset.windows.size(), std::vector<double>(F));
  std::vector<std::vector<double>> normal(F), warning(F), all(F);
  for (size_t w = 0; w < dataset.windows.size(); ++w) {
    for (int f = 0; f < F; ++f) {
      double m = 0.0;
      for (int t = 0; t < L; ++t)
        m += dataset.windows[w].features[static_cast<size_t>(f) * L + t];
      m /= L;
      win_means[w][f] = m;
      all[f].push_back(m);
      (dataset.windows[w].label == 1 ? warning[f] : normal[f]).push_back(m);
    }
  }
  bool has_both = !normal[0].empty() && !warning[0].empty();
  if (!has_both)
    throw std::runtime_error("select_features: dataset must contain both classes");

  SelectionReport rep;
  rep.decisions.resize(F);
  for (int f = 0; f < F; ++f) {
    rep.decisions[f].name = f < static_cast<int>(dataset.feature_names.size())
                                ? dataset.feature_names[f]
                                : "f" + std::to_string(f);
    rep.decisions[f].cohens_d = cohens_d(normal[f], warning[f]);
    if (std::abs(rep.decisions[f].cohens_d) <= d_min) {
      rep.decisions[f].kept = false;
      rep.decisions[f].dropped_reason = "LowEffect";
    }
  }

  for (int i = 0; i < F; ++i)
    for (int j = i + 1; j < F; ++j) {
      double r = pearson(all[i], all[j]);
      if (std::abs(r) > r_max) rep.pearson_pairs.push_back({i, j, r});
    }
  std::stable_sort(rep.pearson_pairs.begin(), rep.pearson_pairs.end(),
                   [](const CorrelatedPair& x, const CorrelatedPair& y) {
                     return std::abs(x.r) > std::abs(y.r);
                   });

  for (const auto& pr : rep.pearson_pairs) {
    auto& d1 = rep.decisions[pr.f1];
    auto& d2 = rep.decisions[pr.f2];
    if (!d1.kept || !d2.kept) continue;
    double e1 = std::abs(d1.cohens_d), e2 = std::abs(d2.cohens_d);
    // Victim: smaller |d|; tie drops the later column in canonical order.
    auto& victim = e1 < e2 ? d1 : (e2 < e1 ? d2 : d2);
    auto& keeper = &victim == &d1 ? d2 : d1;
    victim.kept = false;
    victim.dropped_reason = "Redundant(" + keeper.name + ")";
  }

  for (int f = 0; f < F; ++f)
    if (rep.decisions[f].kept) rep.kept.push_back(f);
  if (rep.kept.empty()) throw std::runtime_error("select_features: empty selection");
  return rep;
}

void save_selection_report(const std::filesystem::path& path, const SelectionReport& r) {
  nlohmann::json j;
  j["kept"] = r.kept;
  for (const auto& d : r.decisions) {
    j["features"].push_back({{"name", d.name},
                             {"cohens_d", d.cohens_d},
                             {"kept", d.kept},
                             {"dropped_reason", d.dropped_reason}});
  }
  for (const auto& p : r.pearson_pairs)
    j["pearson_pairs"].push_back({{"f1", p.f1}, {"f2", p.f2}, {"r", p.r}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_selection_report: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace strokeppg
