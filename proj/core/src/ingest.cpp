#include "strokeppg/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace strokeppg {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace

std::vector<SourceSegment> load_waveform(const std::filesystem::path& path,
                                         std::optional<double> fs_hint) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_waveform: cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || line.empty() || line[0] != '#')
    throw std::runtime_error("load_waveform: malformed header in " + path.string());

  double fs = fs_hint.value_or(0.0), t0 = 0.0;
  std::string patient;
  {
    std::istringstream hs(line.substr(1));
    std::string tok;
    while (hs >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "fs") fs = std::stod(val);
      else if (key == "t0") t0 = std::stod(val);
      else if (key == "patient") patient = val;
    }
  }

  // Collect (time, amplitude) rows; one-column rows synthesize time from fs.
  std::vector<double> times, amps;
  bool two_col = false;
  size_t row = 0;
  double prev_t = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto comma = line.find(',');
    double t, a;
    if (comma != std::string::npos) {
      two_col = true;
      if (!parse_double(std::string_view(line).substr(0, comma), t))
        throw std::runtime_error("load_waveform: bad timestamp at data row " + std::to_string(row));
      std::string_view av = std::string_view(line).substr(comma + 1);
      if (!parse_double(av, a)) a = std::numeric_limits<double>::quiet_NaN();
      if (t <= prev_t)
        throw std::runtime_error("load_waveform: non-monotone timestamps in " + path.string());
      prev_t = t;
    } else {
      if (fs <= 0.0)
        throw std::runtime_error("load_waveform: no fs in header and no fs_hint for " + path.string());
      t = t0 + static_cast<double>(row) / fs;
      if (!parse_double(line, a)) a = std::numeric_limits<double>::quiet_NaN();
    }
    times.push_back(t);
    amps.push_back(a);
    ++row;
  }
  if (amps.size() < 2)
    throw std::runtime_error("load_waveform: fewer than 2 samples in " + path.string());
  if (two_col && fs <= 0.0) {
    // Median spacing of the explicit time column.
    std::vector<double> dts(times.size() - 1);
    for (size_t i = 0; i + 1 < times.size(); ++i) dts[i] = times[i + 1] - times[i];
    std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
    fs = 1.0 / dts[dts.size() / 2];
  }
  if (two_col) t0 = times.front();

  // Split at non-finite rows; each piece becomes its own segment.
  std::vector<SourceSegment> segments;
  std::string file_id = path.filename().string();
  size_t start = 0;
  auto flush = [&](size_t begin, size_t end) {
    if (end - begin < 2) return;
    Waveform w;
    w.samples.assign(amps.begin() + begin, amps.begin() + end);
    w.fs = fs;
    w.t0 = two_col ? times[begin] : t0 + static_cast<double>(begin) / fs;
    w.patient_id = patient;
    segments.push_back({std::move(w), file_id});
  };
  for (size_t i = 0; i < amps.size(); ++i) {
    if (!std::isfinite(amps[i])) {
      flush(start, i);
      start = i + 1;
    }
  }
  flush(start, amps.size());
  return segments;
}

void save_waveform_csv(const std::filesystem::path& path, const Waveform& w) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw std::runtime_error("save_waveform_csv: cannot open " + path.string());
  std::fprintf(f, "# fs=%.10g t0=%.10f patient=%s\n", w.fs, w.t0, w.patient_id.c_str());
  for (double s : w.samples) std::fprintf(f, "%.6g\n", s);
  std::fclose(f);
}

std::vector<Biquad> butter_bandpass_sos(int order, double lo_hz, double hi_hz, double fs) {
  using cd = std::complex<double>;
  if (!(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs / 2.0))
    throw std::invalid_argument("butter_bandpass_sos: band outside (0, fs/2)");

  // Prewarped analog band edges, lowpass->bandpass pole transform,
  // bilinear map back to z.
  double w1 = 2.0 * fs * std::tan(kPi * lo_hz / fs);
  double w2 = 2.0 * fs * std::tan(kPi * hi_hz / fs);
  double w0sq = w1 * w2;
  double bw = w2 - w1;

  std::vector<Biquad> sos;
  for (int k = 1; k <= order; ++k) {
    // Upper-half-plane prototype poles only; conjugates are implicit.
    double theta = kPi * (2.0 * k + order - 1.0) / (2.0 * order);
    cd p(std::cos(theta), std::sin(theta));
    if (p.imag() < 0.0) continue;
    cd alpha = p * (bw / 2.0);
    cd root = std::sqrt(alpha * alpha - w0sq);
    for (cd q : {alpha + root, alpha - root}) {
      cd zq = (2.0 * fs + q) / (2.0 * fs - q);
      // Zeros at z=+1 and z=-1 (from s=0 and s=inf): numerator 1 - z^-2.
      sos.push_back({1.0, 0.0, -1.0, -2.0 * zq.real(), std::norm(zq)});
    }
  }
  // Real prototype pole (odd order) sits on the negative real axis.
  if (order % 2 == 1) {
    cd p(-1.0, 0.0);
    cd alpha = p * (bw / 2.0);
    cd root = std::sqrt(alpha * alpha - w0sq);
    cd q1 = alpha + root, q2 = alpha - root;
    cd z1 = (2.0 * fs + q1) / (2.0 * fs - q1);
    cd z2 = (2.0 * fs + q2) / (2.0 * fs - q2);
    sos.push_back({1.0, 0.0, -1.0, -(z1 + z2).real(), (z1 * z2).real()});
  }

  // Normalize to unit gain at the geometric center frequency.
  double wc = 2.0 * kPi * std::sqrt(lo_hz * hi_hz) / fs;
  cd z = std::polar(1.0, wc);
  cd zi1 = 1.0 / z, zi2 = 1.0 / (z * z);
  cd h(1.0, 0.0);
  for (const Biquad& s : sos)
    h *= (s.b0 + s.b1 * zi1 + s.b2 * zi2) / (1.0 + s.a1 * zi1 + s.a2 * zi2);
  double g = 1.0 / std::abs(h);
  sos.front().b0 *= g;
  sos.front().b1 *= g;
  sos.front().b2 *= g;
  return sos;
}

namespace {

void sos_filter_inplace(const std::vector<Biquad>& sos, std::vector<double>& x) {
  for (const Biquad& s : sos) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : x) {
      double in = v;
      double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

}  // namespace

Waveform bandpass_filter(const Waveform& w, double lo_hz, double hi_hz) {
  if (!(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < w.fs / 2.0))
    throw std::invalid_argument("bandpass_filter: band outside (0, fs/2)");
  auto sos = butter_bandpass_sos(4, lo_hz, hi_hz, w.fs);

  size_t n = w.samples.size();
  size_t settle = static_cast<size_t>(std::ceil(w.fs / lo_hz));
  size_t pad = std::max(static_cast<size_t>(std::lround(w.fs)), 3 * settle);
  if (n <= pad)
    throw std::runtime_error("bandpass_filter: segment shorter than edge padding (" +
                             std::to_string(pad) + " samples)");

  // Odd reflection around the endpoints, then forward-backward pass.
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (size_t i = pad; i >= 1; --i) ext.push_back(2.0 * w.samples[0] - w.samples[i]);
  ext.insert(ext.end(), w.samples.begin(), w.samples.end());
  for (size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * w.samples[n - 1] - w.samples[n - 1 - i]);

  sos_filter_inplace(sos, ext);
  std::reverse(ext.begin(), ext.end());
  sos_filter_inplace(sos, ext);
  std::reverse(ext.begin(), ext.end());

  Waveform out = w;
  out.samples.assign(ext.begin() + pad, ext.begin() + pad + n);
  return out;
}

Waveform resample(const Waveform& w, double target_fs) {
  if (target_fs <= 0.0) throw std::invalid_argument("resample: target_fs must be > 0");
  if (target_fs == w.fs) return w;
  size_t n = w.samples.size();
  size_t m = static_cast<size_t>(std::floor(static_cast<double>(n - 1) * target_fs / w.fs)) + 1;
  Waveform out = w;
  out.fs = target_fs;
  out.samples.resize(m);
  double step = w.fs / target_fs;  // source samples per output sample
  for (size_t j = 0; j < m; ++j) {
    double p = static_cast<double>(j) * step;
    size_t i = std::min(static_cast<size_t>(p), n - 2);
    double frac = p - static_cast<double>(i);
    out.samples[j] = w.samples[i] * (1.0 - frac) + w.samples[i + 1] * frac;
  }
  return out;
}

}  // namespace strokeppg
