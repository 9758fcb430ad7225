#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace strokeppg {

struct MetricReport {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0, recall = 0.0, precision = 0.0, f1 = 0.0, f2 = 0.0;
  std::optional<double> auc;  // absent when only one class present
  long n = 0;
};

MetricReport confusion_metrics(const std::vector<int>& preds, const std::vector<int>& labels);

// Mann-Whitney AUC with tie-averaged ranks; nullopt on a single class.
std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Unweighted mean of per-class F1 over classes {0, 1}.
double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels);

// Comorbidity flags in a fixed order: HTN, DM, HLD, CKD, IHD.
struct Strata {
  std::string age_group;  // "<65" / ">=65"
  std::string sex;
  std::string race;
  std::array<bool, 5> flags{};
  int comorbidity_count() const {
    int c = 0;
    for (bool f : flags) c += f ? 1 : 0;
    return c;
  }
  // 0 -> Low, 1-2 -> Medium, >=3 -> High
  std::string risk_tier() const {
    int c = comorbidity_count();
    return c == 0 ? "Low" : (c <= 2 ? "Medium" : "High");
  }
};

struct SubgroupRow {
  std::string dimension;  // age / sex / race / risk
  std::string group;
  MetricReport metrics;
  long n_patients = 0;
};

struct SubgroupComparison {
  std::string dimension, group_a, group_b;
  double f1_diff = 0.0;
  double p_value = 1.0;  // seeded patient-level bootstrap
};

struct SubgroupReport {
  std::vector<SubgroupRow> rows;
  std::vector<SubgroupComparison> comparisons;
  std::vector<std::string> notes;  // e.g. omitted empty subgroups
};

SubgroupReport subgroup_report(const std::vector<int>& preds,
                               const std::vector<double>& scores,
                               const std::vector<int>& labels,
                               const std::vector<std::string>& patients,
                               const std::map<std::string, Strata>& strata,
                               uint64_t seed, int bootstrap_resamples = 1000);

}  // namespace strokeppg
