#include "strokeppg/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace strokeppg {

namespace {

// 4-point moving average applied in both alignments and averaged, which
// keeps it zero-phase (effective kernel [1,2,2,2,1]/8).
std::vector<double> smooth4(const std::vector<double>& x) {
  size_t n = x.size();
  std::vector<double> y(n);
  auto at = [&](long i) {
    return x[static_cast<size_t>(std::clamp<long>(i, 0, static_cast<long>(n) - 1))];
  };
  for (long i = 0; i < static_cast<long>(n); ++i)
    y[i] = (at(i - 2) + 2.0 * at(i - 1) + 2.0 * at(i) + 2.0 * at(i + 1) + at(i + 2)) / 8.0;
  return y;
}

std::vector<double> central_diff(const std::vector<double>& x, double fs) {
  size_t n = x.size();
  std::vector<double> y(n);
  for (size_t i = 1; i + 1 < n; ++i) y[i] = (x[i + 1] - x[i - 1]) * fs / 2.0;
  y[0] = (x[1] - x[0]) * fs;
  y[n - 1] = (x[n - 1] - x[n - 2]) * fs;
  return y;
}

// Local max with plateau handling: first index of a run that is >= both
// neighbors and strictly greater than one of them.
bool is_local_max(const std::vector<double>& x, size_t i) {
  return i > 0 && i + 1 < x.size() && x[i] > x[i - 1] && x[i] >= x[i + 1];
}

bool is_local_min(const std::vector<double>& x, size_t i) {
  return i > 0 && i + 1 < x.size() && x[i] < x[i - 1] && x[i] <= x[i + 1];
}

std::optional<size_t> next_local_min(const std::vector<double>& x, size_t from, size_t end) {
  for (size_t i = from; i < end; ++i)
    if (is_local_min(x, i)) return i;
  return std::nullopt;
}

std::optional<size_t> next_local_max(const std::vector<double>& x, size_t from, size_t end) {
  for (size_t i = from; i < end; ++i)
    if (is_local_max(x, i)) return i;
  return std::nullopt;
}

}  // namespace

DerivativeStack derivatives(const Waveform& w) {
  if (w.samples.size() < 5)
    throw std::runtime_error("derivatives: segment too short (need >= 5 samples)");
  DerivativeStack d;
  d.fs = w.fs;
  d.t0 = w.t0;
  d.patient_id = w.patient_id;
  d.ppg = w.samples;
  d.vpg = central_diff(smooth4(d.ppg), w.fs);
  d.apg = central_diff(smooth4(d.vpg), w.fs);
  d.jerk = central_diff(smooth4(d.apg), w.fs);
  return d;
}

std::vector<BeatSpan> detect_beats(const DerivativeStack& d) {
  const auto& x = d.ppg;
  size_t n = x.size();
  if (static_cast<double>(n) < 2.0 * d.fs)
    throw std::runtime_error("detect_beats: need at least 2 s of signal");

  // Rolling 2 s mean/sd via prefix sums.
  size_t half = static_cast<size_t>(d.fs);  // window = 2*half
  std::vector<double> ps(n + 1, 0.0), ps2(n + 1, 0.0);
  for (size_t i = 0; i < n; ++i) {
    ps[i + 1] = ps[i] + x[i];
    ps2[i + 1] = ps2[i] + x[i] * x[i];
  }
  auto threshold = [&](size_t i) {
    size_t lo = i > half ? i - half : 0;
    size_t hi = std::min(n, i + half);
    double m = (ps[hi] - ps[lo]) / static_cast<double>(hi - lo);
    double v = (ps2[hi] - ps2[lo]) / static_cast<double>(hi - lo) - m * m;
    return m + 0.5 * std::sqrt(std::max(v, 0.0));
  };

  size_t refractory = static_cast<size_t>(0.3 * d.fs);
  std::vector<size_t> peaks;
  for (size_t i = 1; i + 1 < n; ++i) {
    if (!is_local_max(x, i) || x[i] <= threshold(i)) continue;
    if (!peaks.empty() && i - peaks.back() < refractory) {
      if (x[i] > x[peaks.back()]) peaks.back() = i;  // keep the taller peak
      continue;
    }
    peaks.push_back(i);
  }
  if (peaks.empty()) throw std::runtime_error("detect_beats: no peaks found");

  // Onset per peak: minimum over (previous peak, peak], scanned backward so
  // flat stretches resolve to the sample nearest the upstroke.
  std::vector<size_t> onsets(peaks.size());
  for (size_t j = 0; j < peaks.size(); ++j) {
    size_t lo = j == 0 ? 0 : peaks[j - 1] + 1;
    size_t best = peaks[j];
    for (size_t i = peaks[j]; i + 1 > lo; --i) {
      if (x[i] < x[best]) best = i;
      if (i == lo) break;
    }
    onsets[j] = best;
  }

  double min_tpi = 60.0 / 220.0, max_tpi = 60.0 / 30.0;
  std::vector<BeatSpan> spans;
  for (size_t j = 0; j + 1 < peaks.size(); ++j) {
    double tpi = static_cast<double>(onsets[j + 1] - onsets[j]) / d.fs;
    if (tpi < min_tpi || tpi > max_tpi) continue;
    spans.push_back({onsets[j], onsets[j + 1]});
  }
  return spans;
}

std::optional<FiducialSet> locate_fiducials(const DerivativeStack& d, const BeatSpan& span) {
  const auto& ppg = d.ppg;
  const auto& vpg = d.vpg;
  const auto& apg = d.apg;
  size_t on = span.onset_idx, off = span.offset_idx;
  if (off <= on + 2 || off > ppg.size()) return std::nullopt;

  FiducialSet f;
  f.on = on;
  f.off = off;

  size_t sp = on;
  for (size_t i = on; i < off; ++i)
    if (ppg[i] > ppg[sp]) sp = i;
  if (sp == on || sp + 1 >= off) return std::nullopt;  // degenerate beat
  f.sp = sp;

  size_t u = on;
  for (size_t i = on; i <= sp; ++i)
    if (vpg[i] > vpg[u]) u = i;
  f.u = u;

  size_t a = on;
  for (size_t i = on; i <= u; ++i)
    if (apg[i] > apg[a]) a = i;
  f.a = a;

  f.b = next_local_min(apg, a + 1, off);
  if (f.b) {
    f.c = next_local_max(apg, *f.b + 1, off);
    if (f.c) {
      f.d = next_local_min(apg, *f.c + 1, off);
      if (f.d) f.e = next_local_max(apg, *f.d + 1, off);
    }
  }

  f.v = next_local_min(vpg, sp + 1, off);
  if (f.v) f.w = next_local_max(vpg, *f.v + 1, off);

  // Dicrotic notch: first PPG local min after the systolic peak whose
  // neighborhood shows a VPG zero-crossing from negative to positive.
  for (size_t i = sp + 1; i + 1 < off; ++i) {
    if (!is_local_min(ppg, i)) continue;
    bool neg = false, pos = false;
    size_t lo = i >= 2 ? i - 2 : 0;
    for (size_t j2 = lo; j2 <= std::min(i + 2, off - 1); ++j2) {
      if (vpg[j2] < 0.0) neg = true;
      if (vpg[j2] >= 0.0 && neg) pos = true;
    }
    if (neg && pos) {
      f.dn = i;
      break;
    }
  }

  return f;
}

}  // namespace strokeppg
