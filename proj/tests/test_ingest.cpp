#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "strokeppg/ingest.hpp"

using namespace strokeppg;
namespace fs = std::filesystem;

namespace {

fs::path tmpfile(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "strokeppg_ingest_tests";
  fs::create_directories(dir);
  return dir / name;
}

// Single-bin DFT amplitude at frequency f (Goertzel-style direct sum).
double tone_amplitude(const std::vector<double>& x, double f, double fs) {
  std::complex<double> acc{0.0, 0.0};
  for (size_t n = 0; n < x.size(); ++n) {
    double ph = -2.0 * std::numbers::pi * f * static_cast<double>(n) / fs;
    acc += x[n] * std::complex<double>(std::cos(ph), std::sin(ph));
  }
  return 2.0 * std::abs(acc) / static_cast<double>(x.size());
}

Waveform sine(double f, double fs, double seconds, double amp = 1.0) {
  Waveform w;
  w.fs = fs;
  w.patient_id = "T";
  size_t n = static_cast<size_t>(seconds * fs);
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
  return w;
}

}  // namespace

TEST_CASE("waveform CSV round-trip, amplitude-only format") {
  Waveform w;
  w.fs = 125.0;
  w.t0 = 1000.0;
  w.patient_id = "P42";
  for (int i = 0; i < 500; ++i) w.samples.push_back(std::sin(0.05 * i));
  fs::path p = tmpfile("roundtrip.csv");
  save_waveform_csv(p, w);
  auto segs = load_waveform(p);
  REQUIRE(segs.size() == 1);
  const Waveform& r = segs[0].waveform;
  CHECK(r.fs == doctest::Approx(125.0));
  CHECK(r.t0 == doctest::Approx(1000.0));
  CHECK(r.patient_id == "P42");
  REQUIRE(r.samples.size() == w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i)
    CHECK(r.samples[i] == doctest::Approx(w.samples[i]).epsilon(1e-5));
}

TEST_CASE("two-column format with explicit timestamps") {
  fs::path p = tmpfile("twocol.csv");
  {
    std::ofstream out(p);
    out << "# fs=10 t0=5 patient=PX\n";
    for (int i = 0; i < 50; ++i) out << 5.0 + i * 0.1 << "," << i * 0.01 << "\n";
  }
  auto segs = load_waveform(p);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].waveform.fs == doctest::Approx(10.0));
  CHECK(segs[0].waveform.samples.size() == 50);
  CHECK(segs[0].waveform.samples[7] == doctest::Approx(0.07));
}

TEST_CASE("non-monotone timestamps are rejected") {
  fs::path p = tmpfile("nonmono.csv");
  {
    std::ofstream out(p);
    out << "# fs=10 t0=0 patient=PX\n";
    out << "0.0,1\n0.1,2\n0.05,3\n";
  }
  CHECK_THROWS_WITH_AS(load_waveform(p), doctest::Contains("non-monotone"),
                       std::runtime_error);
}

TEST_CASE("NaN rows split the file into segments") {
  fs::path p = tmpfile("gaps.csv");
  {
    std::ofstream out(p);
    out << "# fs=10 t0=0 patient=PX\n";
    for (int i = 0; i < 30; ++i) out << 0.5 << "\n";
    out << "nan\n";
    for (int i = 0; i < 20; ++i) out << 0.25 << "\n";
  }
  auto segs = load_waveform(p);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].waveform.samples.size() == 30);
  CHECK(segs[1].waveform.samples.size() == 20);
  // Second segment starts after the dropped row.
  CHECK(segs[1].waveform.t0 == doctest::Approx(31.0 / 10.0));
  // Both segments still name the same source file.
  CHECK(segs[0].source_file_id == segs[1].source_file_id);
}

TEST_CASE("bandpass preserves in-band tones") {
  double fs = 125.0;
  for (double f : {1.0, 2.5, 6.0}) {
    Waveform w = sine(f, fs, 30.0);
    Waveform y = bandpass_filter(w, 0.5, 12.0);
    // Measure away from the edges.
    std::vector<double> mid(y.samples.begin() + 500, y.samples.end() - 500);
    double a = tone_amplitude(mid, f, fs);
    CHECK_MESSAGE(a == doctest::Approx(1.0).epsilon(0.03), "f=", f);
  }
}

TEST_CASE("bandpass rejects drift and high-frequency noise") {
  double fs = 125.0;
  for (double f : {0.05, 35.0}) {
    Waveform w = sine(f, fs, 40.0);
    Waveform y = bandpass_filter(w, 0.5, 12.0);
    std::vector<double> mid(y.samples.begin() + 1000, y.samples.end() - 1000);
    double a = tone_amplitude(mid, f, fs);
    CHECK_MESSAGE(a < 0.05, "f=", f);
  }
}

TEST_CASE("forward-backward filtering is zero-phase") {
  double fs = 125.0, f = 1.5;
  Waveform w = sine(f, fs, 30.0);
  Waveform y = bandpass_filter(w, 0.5, 12.0);
  // Peak of the filtered tone must land on the peak of the input tone.
  size_t i0 = 1000, i1 = y.samples.size() - 1000;
  double best_in = 0.0, best_out = 0.0;
  size_t arg_in = 0, arg_out = 0;
  for (size_t i = i0; i < i1; ++i) {
    if (w.samples[i] > best_in) {
      best_in = w.samples[i];
      arg_in = i;
    }
    if (y.samples[i] > best_out) {
      best_out = y.samples[i];
      arg_out = i;
    }
  }
  double period = fs / f;
  double lag = std::fmod(std::abs(static_cast<double>(arg_in) - static_cast<double>(arg_out)),
                         period);
  lag = std::min(lag, period - lag);
  CHECK(lag <= 1.0);
}

TEST_CASE("bandpass rejects segments shorter than the reflection pad") {
  Waveform w = sine(2.0, 125.0, 0.5);
  CHECK_THROWS_AS(bandpass_filter(w, 0.5, 12.0), std::runtime_error);
}

TEST_CASE("sos cascade has unit gain at the geometric band center") {
  double fs = 125.0;
  auto sos = butter_bandpass_sos(4, 0.5, 12.0, fs);
  CHECK(sos.size() == 4);  // order-4 bandpass -> 4 biquads
  double fc = std::sqrt(0.5 * 12.0);
  std::complex<double> z = std::exp(std::complex<double>(
      0.0, 2.0 * std::numbers::pi * fc / fs));
  std::complex<double> h{1.0, 0.0};
  for (const auto& b : sos) {
    std::complex<double> zi = 1.0 / z;
    h *= (b.b0 + b.b1 * zi + b.b2 * zi * zi) / (1.0 + b.a1 * zi + b.a2 * zi * zi);
  }
  CHECK(std::abs(h) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("resample to the same rate returns the input unchanged") {
  Waveform w = sine(2.0, 125.0, 5.0);
  Waveform y = resample(w, 125.0);
  CHECK(y.samples == w.samples);
}

TEST_CASE("resample follows the analytic signal") {
  double fs = 60.0;
  Waveform w = sine(1.0, fs, 10.0);
  Waveform y = resample(w, 125.0);
  size_t expect = static_cast<size_t>((w.samples.size() - 1) * 125.0 / fs) + 1;
  CHECK(y.samples.size() == expect);
  CHECK(y.fs == doctest::Approx(125.0));
  for (size_t i = 10; i + 10 < y.samples.size(); ++i) {
    double t = static_cast<double>(i) / 125.0;
    // Linear interpolation of a 1 Hz tone at 60 Hz is accurate to ~1e-3.
    CHECK(y.samples[i] == doctest::Approx(std::sin(2.0 * std::numbers::pi * t)).epsilon(0.01));
  }
}
