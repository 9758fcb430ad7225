#pragma once

#include <optional>
#include <vector>

#include "strokeppg/ingest.hpp"

namespace strokeppg {

// PPG and its successive derivatives (velocity, acceleration, jerk),
// each computed by central differences on a zero-phase 4-point
// moving-average smoothing of the previous stage.
struct DerivativeStack {
  std::vector<double> ppg, vpg, apg, jerk;
  double fs = 0.0;
  double t0 = 0.0;
  std::string patient_id;
};

// One cardiac cycle: [onset_idx, offset_idx) where offset is the next
// beat's onset. Spans never cross a SourceSegment boundary.
struct BeatSpan {
  size_t onset_idx = 0;
  size_t offset_idx = 0;
};

// Per-beat landmarks. Absent optionals mean the landmark was not found;
// features depending on them are gap-marked downstream, never guessed.
struct FiducialSet {
  size_t on = 0, sp = 0, off = 0;
  std::optional<size_t> dn;           // dicrotic notch
  size_t u = 0;                       // VPG max
  std::optional<size_t> v, w;         // VPG valley / second peak
  size_t a = 0;                       // APG first max
  std::optional<size_t> b, c, d, e;   // APG b-e waves
};

DerivativeStack derivatives(const Waveform& w);

// Adaptive-threshold systolic peak detection (rolling 2 s mean + 0.5 sd,
// 0.3 s refractory), onsets as inter-peak minima, 30-220 bpm rate bounds.
std::vector<BeatSpan> detect_beats(const DerivativeStack& d);

// Returns nullopt for degenerate beats (systolic peak on the span boundary).
std::optional<FiducialSet> locate_fiducials(const DerivativeStack& d, const BeatSpan& span);

}  // namespace strokeppg
