#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "strokeppg/kinematics.hpp"

namespace strokeppg {

// Per-beat absolute bases. Gap-marked values stay absent all the way
// through the matrix; nothing is interpolated at beat level.
enum BaseFeature : int {
  kTsp = 0,   // time onset -> systolic peak (s)
  kSI,        // pulse amplitude / systolic time
  kAoff,      // offset amplitude relative to onset
  kRsysdia,   // T_sys / T_dia
  kTuTpi,     // (u - on)/fs normalized by T_pi
  kTbTpi,     // (b - on)/fs normalized by T_pi
  kTv,        // (v - sp)/fs
  kTuTaTpi,   // (u - a)/fs normalized by T_pi
  kAsp,       // ppg[sp]
  kAon,       // ppg[on]
  kTc,        // (c - on)/fs
  kDSI,       // (ppg[dn]-ppg[on]) / (ppg[sp]-ppg[on])
  kTpi,       // pulse interval (s)
  kPA,        // pulse amplitude ppg[sp]-ppg[on]
  kNumBaseFeatures
};

struct BeatFeatureVector {
  double timestamp = 0.0;  // epoch s of beat onset
  std::string source_id;
  std::array<std::optional<double>, kNumBaseFeatures> base{};
};

// The 17 selected indicator columns, fixed order, versioned.
constexpr int kNumFeatures = 17;
extern const std::array<const char*, kNumFeatures> kFeatureNames;
extern const char* kColumnOrderVersion;

struct FeatureRow {
  double timestamp = 0.0;
  std::string source_id;
  std::array<std::optional<double>, kNumFeatures> values{};
};

struct FeatureMatrix {
  std::string patient_id;
  std::vector<FeatureRow> rows;
};

struct BaselineStats {
  std::array<double, kNumBaseFeatures> mu{};
  std::array<int, kNumBaseFeatures> n{};
  bool valid(int feature) const { return n[feature] >= 30; }
};

BeatFeatureVector beat_features(const FiducialSet& f, const DerivativeStack& d);

// Mean of each base feature over beats whose timestamp falls in the first
// baseline_window_s seconds of the record, ignoring gaps.
BaselineStats baseline_stats(const std::vector<BeatFeatureVector>& beats,
                             double baseline_window_s);

// Eq-style relative deviation from the subject baseline. Gap (nullopt)
// when the baseline magnitude is below eps.
std::optional<double> relative_displacement(double x, double mu_base, double eps = 1e-9);

// Trailing coefficient of variation over the last window_beats non-gap
// values (Bessel-corrected sd / mean). Gap during warm-up or when the
// mean is ~0.
std::vector<std::optional<double>> rolling_cv(
    const std::vector<std::optional<double>>& series, int window_beats);

FeatureMatrix build_feature_matrix(const std::string& patient_id,
                                   const std::vector<BeatFeatureVector>& beats,
                                   const BaselineStats& baselines,
                                   int cv_window = 30);

void save_feature_matrix(const std::filesystem::path& csv_path, const FeatureMatrix& m);
FeatureMatrix load_feature_matrix(const std::filesystem::path& csv_path,
                                  const std::string& patient_id);

}  // namespace strokeppg
