#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace strokeppg {

// Uniformly sampled PPG record. Time of sample i is t0 + i/fs.
struct Waveform {
  std::vector<double> samples;
  double fs = 0.0;          // Hz
  double t0 = 0.0;          // epoch seconds of sample 0
  std::string patient_id;
  std::string channel = "PPG";

  double time_at(size_t i) const { return t0 + static_cast<double>(i) / fs; }
  double duration() const {
    return samples.empty() ? 0.0 : static_cast<double>(samples.size() - 1) / fs;
  }
};

// Contiguous run of finite samples from one source file. Filtering and
// imputation never cross segment boundaries.
struct SourceSegment {
  Waveform waveform;
  std::string source_file_id;
};

// CSV waveform format:
//   # fs=<Hz> t0=<epoch-seconds> patient=<id>
//   <amplitude>            (one per line), or
//   <t>,<amplitude>        (strictly increasing t)
// Non-finite amplitudes split the file into multiple segments.
std::vector<SourceSegment> load_waveform(const std::filesystem::path& path,
                                         std::optional<double> fs_hint = {});

void save_waveform_csv(const std::filesystem::path& path, const Waveform& w);

// Zero-phase Butterworth bandpass (order 4 per pass, forward-backward over
// second-order sections, odd-reflection edge padding).
Waveform bandpass_filter(const Waveform& w, double lo_hz, double hi_hz);

// Linear-interpolation resampling onto a uniform grid starting at t0.
Waveform resample(const Waveform& w, double target_fs);

// One biquad of the cascade, direct form II transposed.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

// Exposed for spectral tests; lo/hi in Hz against sampling rate fs.
std::vector<Biquad> butter_bandpass_sos(int order, double lo_hz, double hi_hz,
                                        double fs);

}  // namespace strokeppg
