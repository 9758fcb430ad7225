#include "strokeppg/synthppg.hpp"

#include <cmath>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "strokeppg/prng.hpp"

namespace strokeppg {

namespace {

struct BeatInstance {
  double start = 0.0;   // seconds from record start
  double a1 = 0.0, mu1 = 0.0, sigma1 = 0.0;
  double a2 = 0.0, mu2 = 0.0, sigma2 = 0.0;
  double T_pi = 0.0;
};

double beat_value(const BeatInstance& b, double t) {
  double tau = t - b.start;
  double g1 = b.a1 * std::exp(-std::pow(tau - b.mu1 * b.T_pi, 2) /
                              (2.0 * std::pow(b.sigma1 * b.T_pi, 2)));
  double g2 = b.a2 * std::exp(-std::pow(tau - b.mu2 * b.T_pi, 2) /
                              (2.0 * std::pow(b.sigma2 * b.T_pi, 2)));
  return g1 + g2;
}

}  // namespace

SynthRecord synth_record(const BeatModel& model, double duration_s, double fs,
                         const DriftSpec& drift, std::optional<double> onset_at_s,
                         uint64_t seed) {
  if (!model.valid()) throw std::invalid_argument("synth_record: invalid BeatModel");
  Prng jitter_rng = Prng::derive(seed, 1);
  Prng noise_rng = Prng::derive(seed, 2);

  // Lay out beats with per-beat HR jitter and pre-onset parameter drift.
  std::vector<BeatInstance> beats;
  double t = 0.0;
  while (t < duration_s) {
    BeatInstance b;
    b.start = t;
    b.T_pi = model.T_pi * (1.0 + drift.hr_jitter_sd * jitter_rng.next_normal());
    b.a1 = model.a1;
    b.mu1 = model.mu1;
    b.sigma1 = model.sigma1;
    b.a2 = model.a2;
    b.mu2 = model.mu2;
    b.sigma2 = model.sigma2;
    if (onset_at_s) {
      double h = (t - (*onset_at_s - drift.drift_window_s)) / 3600.0;
      h = std::clamp(h, 0.0, drift.drift_window_s / 3600.0);
      b.mu1 = model.mu1 * (1.0 + drift.delta_Tsp_per_h * h);
      b.a1 = model.a1 * (1.0 + drift.delta_Asp_per_h * h);
      BeatModel check = model;
      check.mu1 = b.mu1;
      check.a1 = b.a1;
      if (!check.valid())
        throw std::invalid_argument("synth_record: drift violates beat-model invariants");
    }
    beats.push_back(b);
    t += b.T_pi;
  }

  SynthRecord rec;
  rec.wave.fs = fs;
  rec.wave.t0 = 0.0;
  size_t n = static_cast<size_t>(std::floor(duration_s * fs)) + 1;
  rec.wave.samples.assign(n, model.baseline);

  for (const auto& b : beats) {
    long lo = std::max(0L, static_cast<long>(std::floor((b.start - 0.5 * b.T_pi) * fs)));
    long hi = std::min(static_cast<long>(n) - 1,
                       static_cast<long>(std::ceil((b.start + 1.5 * b.T_pi) * fs)));
    for (long i = lo; i <= hi; ++i)
      rec.wave.samples[i] += beat_value(b, static_cast<double>(i) / fs);
  }
  if (drift.noise_sd_frac > 0.0) {
    double sd = drift.noise_sd_frac * model.a1;
    for (double& s : rec.wave.samples) s += sd * noise_rng.next_normal();
  }

  // Ground truth per complete beat: peak time from the drifted Gaussian
  // center, onset as the analytic minimum of the noiseless model around the
  // beat boundary (previous tail vs. current upstroke).
  auto local_model = [&](size_t bi, double tt) {
    double v = model.baseline;
    if (bi > 0) v += beat_value(beats[bi - 1], tt);
    v += beat_value(beats[bi], tt);
    if (bi + 1 < beats.size()) v += beat_value(beats[bi + 1], tt);
    return v;
  };
  for (size_t bi = 0; bi + 1 < beats.size(); ++bi) {
    const auto& b = beats[bi];
    if (b.start + b.T_pi > duration_s) break;
    BeatTruth gt;
    gt.sp_t = b.start + b.mu1 * b.T_pi;
    gt.A_sp = b.a1;
    gt.T_pi = b.T_pi;
    gt.T_sp = b.mu1 * b.T_pi;
    double lo = bi == 0 ? 0.0 : b.start - 0.3 * beats[bi - 1].T_pi;
    double hi = b.start + 0.6 * b.mu1 * b.T_pi;
    double step = 0.1 / fs;
    double best_t = lo, best_v = local_model(bi, lo);
    for (double tt = lo; tt <= hi; tt += step) {
      double v = local_model(bi, tt);
      if (v < best_v) {
        best_v = v;
        best_t = tt;
      }
    }
    gt.onset_t = best_t;
    rec.truth.push_back(gt);
  }
  return rec;
}

namespace {

std::string clock_hhmm(double epoch_s) {
  std::time_t tt = static_cast<std::time_t>(epoch_s);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", tm.tm_hour, tm.tm_min);
  return buf;
}

}  // namespace

CohortManifest synth_cohort(const std::filesystem::path& outdir, const CohortParams& p) {
  if (p.n_pos + p.n_neg < 10)
    throw std::invalid_argument("synth_cohort: need at least 10 patients for CV");
  std::filesystem::create_directories(outdir / "waveforms");

  CohortManifest man;
  man.seed = p.seed;
  std::ofstream notes;
  if (p.write_notes) notes.open(outdir / "notes.jsonl");

  const char* races[] = {"White", "Black", "Asian", "Hispanic", "Other"};
  const double race_cum[] = {0.40, 0.60, 0.75, 0.90, 1.0};

  int total = p.n_pos + p.n_neg;
  for (int idx = 0; idx < total; ++idx) {
    bool positive = idx < p.n_pos;
    char pid[16];
    std::snprintf(pid, sizeof pid, "P%03d", idx);
    Prng rng = Prng::derive(p.seed, 100 + static_cast<uint64_t>(idx));

    BeatModel bm;
    bm.a1 = rng.uniform(0.8, 1.2);
    bm.mu1 = rng.uniform(0.22, 0.30);
    bm.sigma1 = rng.uniform(0.07, 0.10);
    bm.a2 = bm.a1 * rng.uniform(0.30, 0.42);
    bm.mu2 = rng.uniform(0.55, 0.65);
    bm.sigma2 = rng.uniform(0.12, 0.16);
    bm.baseline = rng.uniform(0.0, 0.2);
    bm.T_pi = rng.uniform(0.75, 1.05);

    DriftSpec ds = p.drift;
    if (!positive) {
      ds.delta_Tsp_per_h = 0.0;
      ds.delta_Asp_per_h = 0.0;
    }
    double duration = p.pre_onset_s + p.tail_s;
    std::optional<double> onset_at = positive ? std::optional<double>(p.pre_onset_s)
                                             : std::nullopt;
    SynthRecord rec =
        synth_record(bm, duration, p.fs, ds, onset_at, Prng::mix(p.seed) + idx);
    rec.wave.t0 = p.base_epoch + static_cast<double>(idx) * 86400.0 + 8.0 * 3600.0;
    rec.wave.patient_id = pid;

    std::string fname = std::string(pid) + ".csv";
    save_waveform_csv(outdir / "waveforms" / fname, rec.wave);
    man.waveform_files[pid] = "waveforms/" + fname;

    Strata st;
    st.age_group = rng.next_double() < 0.5 ? "<65" : ">=65";
    st.sex = rng.next_double() < 0.5 ? "F" : "M";
    double r = rng.next_double();
    for (int k = 0; k < 5; ++k)
      if (r <= race_cum[k]) {
        st.race = races[k];
        break;
      }
    for (int k = 0; k < 5; ++k) st.flags[k] = rng.next_double() < 0.25;
    man.strata[pid] = st;

    if (positive) {
      double onset_epoch = rec.wave.t0 + p.pre_onset_s;
      man.onsets[pid] = onset_epoch;
      if (notes.is_open()) {
        double note_time = onset_epoch + 2.0 * 3600.0;
        nlohmann::json note = {
            {"note_id", std::string("N") + (pid + 1)},
            {"patient_id", pid},
            {"note_time", note_time},
            {"text", "Code stroke activated. Patient with acute ischemic stroke, onset at " +
                         clock_hhmm(onset_epoch) + ". Neurology consulted."}};
        notes << note.dump() << "\n";
      }
    } else if (notes.is_open() && idx % 7 == 0) {
      // Occasional non-event note so the parser's guards get exercised.
      nlohmann::json note = {
          {"note_id", std::string("N") + (pid + 1)},
          {"patient_id", pid},
          {"note_time", rec.wave.t0 + 4.0 * 3600.0},
          {"text", "History of CVA in 2010, no acute events today. Routine monitoring."}};
      notes << note.dump() << "\n";
    }
  }

  save_cohort_manifest(outdir / "manifest.json", man);
  return man;
}

void save_cohort_manifest(const std::filesystem::path& path, const CohortManifest& m) {
  nlohmann::json j;
  j["seed"] = m.seed;
  j["onsets"] = m.onsets;
  j["files"] = m.waveform_files;
  for (const auto& [pid, st] : m.strata) {
    j["strata"][pid] = {{"age_group", st.age_group},
                        {"sex", st.sex},
                        {"race", st.race},
                        {"flags", st.flags}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_cohort_manifest: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

CohortManifest load_cohort_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_cohort_manifest: cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  CohortManifest m;
  m.seed = j.value("seed", 0ull);
  if (j.contains("onsets"))
    for (auto& [k, v] : j["onsets"].items()) m.onsets[k] = v.get<double>();
  if (j.contains("files"))
    for (auto& [k, v] : j["files"].items()) m.waveform_files[k] = v.get<std::string>();
  if (j.contains("strata"))
    for (auto& [k, v] : j["strata"].items()) {
      Strata st;
      st.age_group = v.value("age_group", "");
      st.sex = v.value("sex", "");
      st.race = v.value("race", "");
      if (v.contains("flags"))
        for (int i = 0; i < 5; ++i) st.flags[i] = v["flags"][i].get<bool>();
      m.strata[k] = st;
    }
  return m;
}

}  // namespace strokeppg
