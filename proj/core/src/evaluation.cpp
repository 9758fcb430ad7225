#include "strokeppg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "strokeppg/prng.hpp"

namespace strokeppg {

MetricReport confusion_metrics(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size() || preds.empty())
    throw std::invalid_argument("confusion_metrics: need equal non-empty inputs");
  MetricReport r;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] == 1)
      preds[i] == 1 ? ++r.tp : ++r.fn;
    else
      preds[i] == 1 ? ++r.fp : ++r.tn;
  }
  r.n = static_cast<long>(preds.size());
  r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.n);
  r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
  r.recall = (r.tp + r.fn) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
  double p = r.precision, q = r.recall;
  r.f1 = (p + q) > 0.0 ? 2.0 * p * q / (p + q) : 0.0;
  r.f2 = (4.0 * p + q) > 0.0 ? 5.0 * p * q / (4.0 * p + q) : 0.0;
  return r;
}

std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("roc_auc: need equal non-empty inputs");
  size_t n = scores.size();
  long n_pos = std::count(labels.begin(), labels.end(), 1);
  long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Tie-averaged ranks (1-based).
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  for (size_t k = 0; k < n; ++k)
    if (labels[k] == 1) rank_sum_pos += rank[k];
  double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

double class_f1(const std::vector<int>& preds, const std::vector<int>& labels, int cls) {
  long tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    bool p = preds[i] == cls, l = labels[i] == cls;
    if (p && l) ++tp;
    else if (p) ++fp;
    else if (l) ++fn;
  }
  double prec = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  double rec = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  return (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
}

}  // namespace

double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size() || preds.empty())
    throw std::invalid_argument("macro_f1: need equal non-empty inputs");
  return 0.5 * (class_f1(preds, labels, 0) + class_f1(preds, labels, 1));
}

namespace {

double pooled_f1_for_patients(const std::vector<std::string>& sample,
                              const std::map<std::string, std::vector<size_t>>& by_patient,
                              const std::vector<int>& preds, const std::vector<int>& labels) {
  long tp = 0, fp = 0, fn = 0;
  for (const auto& pid : sample) {
    for (size_t i : by_patient.at(pid)) {
      if (preds[i] == 1 && labels[i] == 1) ++tp;
      else if (preds[i] == 1) ++fp;
      else if (labels[i] == 1) ++fn;
    }
  }
  double p = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  double r = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

SubgroupReport subgroup_report(const std::vector<int>& preds,
                               const std::vector<double>& scores,
                               const std::vector<int>& labels,
                               const std::vector<std::string>& patients,
                               const std::map<std::string, Strata>& strata,
                               uint64_t seed, int bootstrap_resamples) {
  if (preds.size() != labels.size() || preds.size() != patients.size())
    throw std::invalid_argument("subgroup_report: length mismatch");
  for (const auto& pid : patients)
    if (!strata.count(pid))
      throw std::invalid_argument("subgroup_report: missing strata for patient " + pid);

  SubgroupReport rep;
  std::map<std::string, std::vector<size_t>> by_patient;
  for (size_t i = 0; i < patients.size(); ++i) by_patient[patients[i]].push_back(i);

  struct Dim {
    std::string name;
    std::function<std::string(const Strata&)> key;
  };
  std::vector<Dim> dims = {
      {"age", [](const Strata& s) { return s.age_group; }},
      {"sex", [](const Strata& s) { return s.sex; }},
      {"race", [](const Strata& s) { return s.race; }},
      {"risk", [](const Strata& s) { return s.risk_tier(); }},
  };

  uint64_t boot_stream = 0;
  for (const auto& dim : dims) {
    // Patients per group, window indices per group.
    std::map<std::string, std::vector<std::string>> group_patients;
    std::map<std::string, std::vector<size_t>> group_idx;
    for (const auto& [pid, idxs] : by_patient) {
      std::string g = dim.key(strata.at(pid));
      group_patients[g].push_back(pid);
      group_idx[g].insert(group_idx[g].end(), idxs.begin(), idxs.end());
    }
    for (const auto& [g, idxs] : group_idx) {
      if (idxs.empty()) {
        rep.notes.push_back(dim.name + "/" + g + ": empty subgroup omitted");
        continue;
      }
      std::vector<int> p, l;
      std::vector<double> s;
      for (size_t i : idxs) {
        p.push_back(preds[i]);
        l.push_back(labels[i]);
        s.push_back(scores[i]);
      }
      SubgroupRow row;
      row.dimension = dim.name;
      row.group = g;
      row.metrics = confusion_metrics(p, l);
      row.metrics.auc = roc_auc(s, l);
      row.n_patients = static_cast<long>(group_patients[g].size());
      rep.rows.push_back(std::move(row));
    }

    // Pairwise F1-difference bootstrap over patients.
    std::vector<std::string> groups;
    for (const auto& [g, _] : group_patients) groups.push_back(g);
    for (size_t a = 0; a < groups.size(); ++a)
      for (size_t b = a + 1; b < groups.size(); ++b) {
        const auto& pa = group_patients[groups[a]];
        const auto& pb = group_patients[groups[b]];
        if (pa.empty() || pb.empty()) continue;
        double d0 = pooled_f1_for_patients(pa, by_patient, preds, labels) -
                    pooled_f1_for_patients(pb, by_patient, preds, labels);
        Prng rng = Prng::derive(seed, 0xB007 + boot_stream++);
        int flips = 0;
        for (int r = 0; r < bootstrap_resamples; ++r) {
          std::vector<std::string> sa(pa.size()), sb(pb.size());
          for (auto& x : sa) x = pa[rng.next_below(pa.size())];
          for (auto& x : sb) x = pb[rng.next_below(pb.size())];
          double d = pooled_f1_for_patients(sa, by_patient, preds, labels) -
                     pooled_f1_for_patients(sb, by_patient, preds, labels);
          if ((d0 >= 0.0 && d <= 0.0) || (d0 <= 0.0 && d >= 0.0)) ++flips;
        }
        SubgroupComparison c;
        c.dimension = dim.name;
        c.group_a = groups[a];
        c.group_b = groups[b];
        c.f1_diff = d0;
        c.p_value = std::min(1.0, 2.0 * static_cast<double>(flips) / bootstrap_resamples);
        rep.comparisons.push_back(std::move(c));
      }
  }
  return rep;
}

}  // namespace strokeppg
