#include "strokeppg/biomarkers.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace strokeppg {

const std::array<const char*, kNumFeatures> kFeatureNames = {
    "T_sp",     "SI",       "A_off",    "R_sysdia", "T_u_Tpi",  "T_b_Tpi",
    "T_v",      "T_u_TaTpi", "CV_Tpi",  "CV_PA",    "T_sp_Rel", "A_sp_Rel",
    "SI_Rel",   "DSI_Rel",  "T_c_Rel",  "A_off_Rel", "A_on_Rel"};

const char* kColumnOrderVersion = "fm-v1";

BeatFeatureVector beat_features(const FiducialSet& f, const DerivativeStack& d) {
  BeatFeatureVector bf;
  bf.timestamp = d.t0 + static_cast<double>(f.on) / d.fs;
  double fs = d.fs;
  const auto& ppg = d.ppg;

  double T_pi = static_cast<double>(f.off - f.on) / fs;
  double A = ppg[f.sp] - ppg[f.on];

  bf.base[kTsp] = static_cast<double>(f.sp - f.on) / fs;
  bf.base[kTpi] = T_pi;
  bf.base[kPA] = A;
  bf.base[kAsp] = ppg[f.sp];
  bf.base[kAon] = ppg[f.on];
  bf.base[kAoff] = ppg[f.off - 1] - ppg[f.on];
  bf.base[kTuTpi] = (static_cast<double>(f.u - f.on) / fs) / T_pi;
  bf.base[kTuTaTpi] = (static_cast<double>(f.u - f.a) / fs) / T_pi;
  if (f.b) bf.base[kTbTpi] = (static_cast<double>(*f.b - f.on) / fs) / T_pi;
  if (f.v) bf.base[kTv] = static_cast<double>(*f.v - f.sp) / fs;
  if (f.c) bf.base[kTc] = static_cast<double>(*f.c - f.on) / fs;
  if (f.dn) {
    double T_sys = static_cast<double>(*f.dn - f.on) / fs;
    double T_dia = static_cast<double>(f.off - *f.dn) / fs;
    if (T_dia > 0.0) bf.base[kRsysdia] = T_sys / T_dia;
    if (T_sys > 0.0) bf.base[kSI] = A / T_sys;
    if (A != 0.0) bf.base[kDSI] = (ppg[*f.dn] - ppg[f.on]) / A;
  }
  return bf;
}

BaselineStats baseline_stats(const std::vector<BeatFeatureVector>& beats,
                             double baseline_window_s) {
  BaselineStats s{};
  if (beats.empty()) return s;
  double t_end = beats.front().timestamp + baseline_window_s;
  for (const auto& b : beats) {
    if (b.timestamp > t_end) break;
    for (int k = 0; k < kNumBaseFeatures; ++k) {
      if (b.base[k]) {
        s.mu[k] += *b.base[k];
        s.n[k] += 1;
      }
    }
  }
  for (int k = 0; k < kNumBaseFeatures; ++k)
    if (s.n[k] > 0) s.mu[k] /= static_cast<double>(s.n[k]);
  return s;
}

std::optional<double> relative_displacement(double x, double mu_base, double eps) {
  if (std::abs(mu_base) < eps) return std::nullopt;
  return (x - mu_base) / std::abs(mu_base);
}

std::vector<std::optional<double>> rolling_cv(
    const std::vector<std::optional<double>>& series, int window_beats) {
  if (window_beats < 2) throw std::invalid_argument("rolling_cv: window_beats must be >= 2");
  size_t n = series.size();
  std::vector<std::optional<double>> out(n);
  std::vector<double> recent;  // non-gap values seen so far
  for (size_t i = 0; i < n; ++i) {
    if (series[i]) recent.push_back(*series[i]);
    if (!series[i]) continue;  // CV defined only where the base is present
    if (recent.size() < static_cast<size_t>(window_beats)) continue;
    size_t begin = recent.size() - static_cast<size_t>(window_beats);
    double mean = 0.0;
    for (size_t j = begin; j < recent.size(); ++j) mean += recent[j];
    mean /= window_beats;
    if (std::abs(mean) < 1e-9) continue;
    double ss = 0.0;
    for (size_t j = begin; j < recent.size(); ++j)
      ss += (recent[j] - mean) * (recent[j] - mean);
    double sd = std::sqrt(ss / (window_beats - 1));
    out[i] = sd / mean;
  }
  return out;
}

FeatureMatrix build_feature_matrix(const std::string& patient_id,
                                   const std::vector<BeatFeatureVector>& beats,
                                   const BaselineStats& baselines, int cv_window) {
  FeatureMatrix m;
  m.patient_id = patient_id;
  m.rows.resize(beats.size());

  std::vector<std::optional<double>> tpi(beats.size()), pa(beats.size());
  for (size_t i = 0; i < beats.size(); ++i) {
    tpi[i] = beats[i].base[kTpi];
    pa[i] = beats[i].base[kPA];
  }
  auto cv_tpi = rolling_cv(tpi, cv_window);
  auto cv_pa = rolling_cv(pa, cv_window);

  auto rel = [&](const BeatFeatureVector& b, int base) -> std::optional<double> {
    if (!b.base[base] || !baselines.valid(base)) return std::nullopt;
    return relative_displacement(*b.base[base], baselines.mu[base]);
  };

  for (size_t i = 0; i < beats.size(); ++i) {
    const auto& b = beats[i];
    FeatureRow& r = m.rows[i];
    r.timestamp = b.timestamp;
    r.source_id = b.source_id;
    r.values[0] = b.base[kTsp];
    r.values[1] = b.base[kSI];
    r.values[2] = b.base[kAoff];
    r.values[3] = b.base[kRsysdia];
    r.values[4] = b.base[kTuTpi];
    r.values[5] = b.base[kTbTpi];
    r.values[6] = b.base[kTv];
    r.values[7] = b.base[kTuTaTpi];
    r.values[8] = cv_tpi[i];
    r.values[9] = cv_pa[i];
    r.values[10] = rel(b, kTsp);
    r.values[11] = rel(b, kAsp);
    r.values[12] = rel(b, kSI);
    r.values[13] = rel(b, kDSI);
    r.values[14] = rel(b, kTc);
    r.values[15] = rel(b, kAoff);
    r.values[16] = rel(b, kAon);
  }
  return m;
}

void save_feature_matrix(const std::filesystem::path& csv_path, const FeatureMatrix& m) {
  std::FILE* f = std::fopen(csv_path.string().c_str(), "w");
  if (!f) throw std::runtime_error("save_feature_matrix: cannot open " + csv_path.string());
  std::fprintf(f, "timestamp,source_id");
  for (const char* name : kFeatureNames) std::fprintf(f, ",%s", name);
  std::fprintf(f, "\n");
  for (const auto& r : m.rows) {
    std::fprintf(f, "%.6f,%s", r.timestamp, r.source_id.c_str());
    for (const auto& v : r.values) {
      if (v)
        std::fprintf(f, ",%.12g", *v);
      else
        std::fprintf(f, ",");
    }
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& csv_path,
                                  const std::string& patient_id) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("load_feature_matrix: cannot open " + csv_path.string());
  std::string line;
  std::getline(in, line);  // header
  FeatureMatrix m;
  m.patient_id = patient_id;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FeatureRow r;
    size_t pos = 0;
    int field = 0;
    while (pos <= line.size()) {
      size_t comma = line.find(',', pos);
      std::string_view tok(line.data() + pos,
                           (comma == std::string::npos ? line.size() : comma) - pos);
      if (field == 0) {
        r.timestamp = std::stod(std::string(tok));
      } else if (field == 1) {
        r.source_id = std::string(tok);
      } else if (field - 2 < kNumFeatures) {
        if (!tok.empty()) {
          double v;
          auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
          (void)p;
          if (ec == std::errc{}) r.values[field - 2] = v;
        }
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
      ++field;
    }
    m.rows.push_back(std::move(r));
  }
  return m;
}

}  // namespace strokeppg
