#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <vector>

#include "strokeppg/labeling.hpp"
#include "strokeppg/prng.hpp"

using namespace strokeppg;

namespace {

// Brute-force zone oracle straight from the interval definitions.
LabelOutcome zone_oracle(double t, const LabelParams& p) {
  if (t >= -(p.T_w - p.delta_pre) && t <= -p.delta_0) return LabelOutcome::Warning;
  bool in_buffer = t >= -(p.T_w + p.delta_pre) && t < -(p.T_w - p.delta_pre);
  bool in_blind = t > -p.delta_0 && t <= 0.0;
  if (in_buffer) return LabelOutcome::DroppedBuffer;
  if (in_blind) return LabelOutcome::DroppedLeadTime;
  if (t >= -p.horizon_start && t < -(p.T_w + p.delta_pre)) return LabelOutcome::Normal;
  return LabelOutcome::DroppedOutOfRange;
}

FeatureMatrix constant_matrix(double t_first, int minutes, double beat_period_s = 1.0,
                              const std::string& src = "f0") {
  FeatureMatrix m;
  m.patient_id = "P";
  int beats = static_cast<int>(minutes * 60.0 / beat_period_s);
  for (int i = 0; i < beats; ++i) {
    FeatureRow r;
    r.timestamp = t_first + i * beat_period_s;
    r.source_id = src;
    for (int f = 0; f < kNumFeatures; ++f) r.values[f] = 1.0 + 0.01 * f;
    m.rows.push_back(r);
  }
  return m;
}

}  // namespace

TEST_CASE("zone assignment worked examples, default geometry") {
  LabelParams p;  // T_w=360, delta_pre=15, delta_0=15, horizon 480
  CHECK(assign_label(-30.0, p) == LabelOutcome::Warning);
  CHECK(assign_label(-345.0, p) == LabelOutcome::Warning);
  CHECK(assign_label(-10.0, p) == LabelOutcome::DroppedLeadTime);
  CHECK(assign_label(-360.0, p) == LabelOutcome::DroppedBuffer);
  CHECK(assign_label(-375.0, p) == LabelOutcome::DroppedBuffer);
  CHECK(assign_label(-376.0, p) == LabelOutcome::Normal);
  CHECK(assign_label(-480.0, p) == LabelOutcome::Normal);
  CHECK(assign_label(-481.0, p) == LabelOutcome::DroppedOutOfRange);
  CHECK(assign_label(5.0, p) == LabelOutcome::DroppedOutOfRange);
  CHECK(assign_label(0.0, p) == LabelOutcome::DroppedLeadTime);
}

TEST_CASE("assign_label matches the interval oracle on random times") {
  Prng g(101);
  for (double T_w : {240.0, 300.0, 360.0}) {
    LabelParams p;
    p.T_w = T_w;
    REQUIRE(p.valid());
    for (int i = 0; i < 10000; ++i) {
      double t = g.uniform(-520.0, 20.0);
      CHECK(assign_label(t, p) == zone_oracle(t, p));
    }
    // Exact boundary points too.
    for (double t : {0.0, -p.delta_0, -(p.T_w - p.delta_pre), -(p.T_w + p.delta_pre),
                     -p.horizon_start})
      CHECK(assign_label(t, p) == zone_oracle(t, p));
  }
}

TEST_CASE("zone measures add up to the labeled horizon") {
  // |Warning| + |Normal| + |buffer| + |blind| = horizon span
  LabelParams p;
  double warning = (p.T_w - p.delta_pre) - p.delta_0;
  double normal = p.horizon_start - (p.T_w + p.delta_pre);
  double buffer = 2.0 * p.delta_pre;
  double blind = p.delta_0;
  CHECK(warning + normal + buffer + blind == doctest::Approx(p.horizon_start));
}

TEST_CASE("invalid geometry is rejected") {
  LabelParams p;
  p.T_w = 20.0;  // T_w - delta_pre <= delta_0
  CHECK_FALSE(p.valid());
  FeatureMatrix m = constant_matrix(0.0, 60);
  CHECK_THROWS_AS(window_dataset(m, 10000.0, p, 30, 30), std::invalid_argument);
}

TEST_CASE("windows never touch the lead-time blind spot") {
  LabelParams p;
  double onset = 100000.0;
  FeatureMatrix m = constant_matrix(onset - 490.0 * 60.0, 500);
  for (int stride : {1, 5, 30}) {
    auto ws = window_dataset(m, onset, p, 30, stride);
    REQUIRE(!ws.empty());
    for (const auto& w : ws) {
      double t_end_min = w.t_center + 15.0;  // L/2
      CHECK(t_end_min <= -p.delta_0 + 1e-9);
      // Every minute of the window sits in the window's own zone.
      for (double j = w.t_center - 14.5; j <= w.t_center + 14.5; j += 1.0) {
        LabelOutcome z = zone_oracle(j, p);
        CHECK(z == (w.label == 1 ? LabelOutcome::Warning : LabelOutcome::Normal));
      }
    }
  }
}

TEST_CASE("windows spanning two source segments are dropped") {
  LabelParams p;
  double onset = 100000.0;
  FeatureMatrix a = constant_matrix(onset - 300.0 * 60.0, 100, 1.0, "f0");
  FeatureMatrix b = constant_matrix(onset - 200.0 * 60.0, 100, 1.0, "f1");
  FeatureMatrix joined = a;
  joined.rows.insert(joined.rows.end(), b.rows.begin(), b.rows.end());
  auto ws = window_dataset(joined, onset, p, 30, 1);
  for (const auto& w : ws) {
    // No window may straddle the f0/f1 boundary at -200 min.
    bool crosses = w.t_center - 15.0 < -200.0 && w.t_center + 15.0 > -200.0;
    CHECK_FALSE(crosses);
  }
}

TEST_CASE("windows with more than 20% gap cells are dropped, small gaps filled") {
  LabelParams p;
  double onset = 100000.0;

  FeatureMatrix sparse = constant_matrix(onset - 320.0 * 60.0, 30);
  // Empty 10 of 30 minutes for every feature (33% > 20%).
  auto is_gapped = [&](const FeatureRow& r) {
    double minute = (r.timestamp - (onset - 320.0 * 60.0)) / 60.0;
    return minute >= 10.0 && minute < 20.0;
  };
  for (auto& r : sparse.rows)
    if (is_gapped(r))
      for (auto& v : r.values) v.reset();
  CHECK(window_dataset(sparse, onset, p, 30, 30).empty());

  // 5 of 30 minutes empty (17%) -> kept, gaps forward-filled.
  FeatureMatrix ok = constant_matrix(onset - 320.0 * 60.0, 30);
  for (auto& r : ok.rows) {
    double minute = (r.timestamp - (onset - 320.0 * 60.0)) / 60.0;
    if (minute >= 10.0 && minute < 15.0)
      for (auto& v : r.values) v.reset();
  }
  auto ws = window_dataset(ok, onset, p, 30, 30);
  REQUIRE(ws.size() == 1);
  for (double v : ws[0].features) CHECK(std::isfinite(v));
  CHECK(ws[0].features[0] == doctest::Approx(1.0));
}

TEST_CASE("per-minute aggregation is the median of in-minute beats") {
  LabelParams p;
  double onset = 100000.0;
  FeatureMatrix m;
  m.patient_id = "P";
  // 30 Warning-zone minutes; one outlier beat per minute must not move the median.
  double start = onset - 320.0 * 60.0;
  for (int k = 0; k < 30; ++k)
    for (int i = 0; i < 5; ++i) {
      FeatureRow r;
      r.timestamp = start + k * 60.0 + i * 10.0;
      r.source_id = "f0";
      for (int f = 0; f < kNumFeatures; ++f) r.values[f] = (i == 4) ? 100.0 : 2.0;
      m.rows.push_back(r);
    }
  auto ws = window_dataset(m, onset, p, 30, 30);
  REQUIRE(ws.size() == 1);
  for (double v : ws[0].features) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("control records produce only Normal windows") {
  LabelParams p;
  FeatureMatrix m = constant_matrix(5000.0, 120);
  auto ws = window_dataset_control(m, p, 30, 30);
  CHECK(ws.size() == 4);
  for (const auto& w : ws) CHECK(w.label == 0);
}

TEST_CASE("labeled dataset CSV round-trip") {
  LabelParams p;
  LabeledDataset d;
  d.L = 4;
  d.F = kNumFeatures;
  d.params = p;
  d.feature_names.assign(kFeatureNames.begin(), kFeatureNames.end());
  Prng g(55);
  for (int i = 0; i < 6; ++i) {
    LabeledWindow w;
    w.patient_id = "P" + std::to_string(i % 3);
    w.t_center = -300.0 + i;
    w.label = i % 2;
    for (int j = 0; j < d.F * d.L; ++j) w.features.push_back(g.next_normal());
    d.windows.push_back(w);
  }
  auto path = std::filesystem::temp_directory_path() / "strokeppg_ds_test.csv";
  save_labeled_dataset(path, d);
  LabeledDataset r = load_labeled_dataset(path);
  CHECK(r.L == d.L);
  CHECK(r.F == d.F);
  CHECK(r.params.T_w == doctest::Approx(p.T_w));
  REQUIRE(r.windows.size() == d.windows.size());
  for (size_t i = 0; i < d.windows.size(); ++i) {
    CHECK(r.windows[i].patient_id == d.windows[i].patient_id);
    CHECK(r.windows[i].label == d.windows[i].label);
    for (size_t j = 0; j < d.windows[i].features.size(); ++j)
      CHECK(r.windows[i].features[j] ==
            doctest::Approx(d.windows[i].features[j]).epsilon(1e-10));
  }
}
