#include "strokeppg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "strokeppg/attribution.hpp"
#include "strokeppg/biomarkers.hpp"
#include "strokeppg/evaluation.hpp"
#include "strokeppg/ingest.hpp"
#include "strokeppg/kinematics.hpp"
#include "strokeppg/noteanchor.hpp"
#include "strokeppg/selection.hpp"

namespace strokeppg {

namespace fs = std::filesystem;
using nlohmann::json;

std::filesystem::path PipelineConfig::window_dir(double T_w) const {
  return out_dir / ("Tw" + std::to_string(static_cast<long>(std::llround(T_w))));
}

namespace {

void note(std::ostream* log, const std::string& s) {
  if (log) (*log) << s << "\n";
}

json config_json(const PipelineConfig& c) {
  json j;
  j["data_dir"] = c.data_dir.string();
  j["out_dir"] = c.out_dir.string();
  j["target_fs"] = c.target_fs;
  j["band_lo"] = c.band_lo;
  j["band_hi"] = c.band_hi;
  j["baseline_window_s"] = c.baseline_window_s;
  j["cv_window"] = c.cv_window;
  j["label"] = {{"T_w", c.label.T_w},
                {"delta_pre", c.label.delta_pre},
                {"delta_0", c.label.delta_0},
                {"horizon_start", c.label.horizon_start}};
  j["L"] = c.L;
  j["train_stride"] = c.train_stride;
  j["eval_stride"] = c.eval_stride;
  j["d_min"] = c.d_min;
  j["r_max"] = c.r_max;
  j["train"] = {{"lr", c.train.lr},
                {"weight_decay", c.train.weight_decay},
                {"lambda_pos", c.train.lambda_pos},
                {"batch", c.train.batch},
                {"epochs", c.train.epochs},
                {"folds", c.train.folds},
                {"seed", c.train.seed}};
  j["n_explain"] = c.n_explain;
  j["synth"] = {{"n_pos", c.synth.n_pos},
                {"n_neg", c.synth.n_neg},
                {"fs", c.synth.fs},
                {"pre_onset_min", c.synth.pre_onset_s / 60.0},
                {"tail_s", c.synth.tail_s},
                {"seed", c.synth.seed},
                {"write_notes", c.synth.write_notes},
                {"base_epoch", c.synth.base_epoch},
                {"drift",
                 {{"delta_Tsp_per_h", c.synth.drift.delta_Tsp_per_h},
                  {"delta_Asp_per_h", c.synth.drift.delta_Asp_per_h},
                  {"noise_sd_frac", c.synth.drift.noise_sd_frac},
                  {"hr_jitter_sd", c.synth.drift.hr_jitter_sd},
                  {"drift_window_h", c.synth.drift.drift_window_s / 3600.0}}}};
  j["windows_min"] = c.windows_min;
  return j;
}

std::string hex64(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_stage_manifest(const fs::path& dir, const std::string& stage,
                          const PipelineConfig& cfg, const std::vector<fs::path>& inputs,
                          const std::vector<fs::path>& outputs) {
  json j;
  j["stage"] = stage;
  j["config_hash"] = hex64(config_hash(cfg));
  for (const auto& p : inputs)
    j["inputs"][p.filename().string()] = fs::exists(p) ? hex64(file_hash(p)) : "missing";
  for (const auto& p : outputs)
    j["outputs"][p.filename().string()] = fs::exists(p) ? hex64(file_hash(p)) : "missing";
  std::ofstream out(dir / (stage + "_manifest.json"));
  out << j.dump(2) << "\n";
}

json metrics_json(const MetricReport& m) {
  json j{{"tp", m.tp},        {"fp", m.fp},
         {"tn", m.tn},        {"fn", m.fn},
         {"accuracy", m.accuracy}, {"recall", m.recall},
         {"precision", m.precision}, {"f1", m.f1},
         {"f2", m.f2},        {"n", m.n}};
  if (m.auc) j["auc"] = *m.auc;
  return j;
}

LabelParams label_params_for(const PipelineConfig& cfg, double T_w) {
  LabelParams p = cfg.label;
  p.T_w = T_w;
  if (!p.valid())
    throw std::invalid_argument("pipeline: label geometry invalid for T_w=" +
                                std::to_string(T_w));
  return p;
}

// Patients in deterministic order with their feature-matrix paths.
std::vector<std::pair<std::string, fs::path>> feature_files(const PipelineConfig& cfg) {
  CohortManifest man = load_cohort_manifest(cfg.data_dir / "manifest.json");
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& [pid, file] : man.waveform_files)
    out.push_back({pid, cfg.out_dir / "features" / (pid + ".csv")});
  return out;
}

struct PooledEval {
  std::vector<int> preds, labels;
  std::vector<double> scores;
  std::vector<std::string> patients;
  std::vector<MetricReport> per_fold;
};

PooledEval pool_predictions(const LabeledDataset& eval_ds,
                            const std::vector<ModelCheckpoint>& ckpts,
                            const std::vector<std::vector<std::string>>& val_patients) {
  PooledEval pe;
  for (size_t k = 0; k < ckpts.size(); ++k) {
    std::set<std::string> vp(val_patients[k].begin(), val_patients[k].end());
    std::vector<size_t> idx;
    for (size_t i = 0; i < eval_ds.windows.size(); ++i)
      if (vp.count(eval_ds.windows[i].patient_id)) idx.push_back(i);
    if (idx.empty()) {
      pe.per_fold.push_back({});
      continue;
    }
    Predictions pr = predict(ckpts[k], eval_ds, idx);
    std::vector<int> fold_labels;
    for (size_t j = 0; j < idx.size(); ++j) {
      const auto& w = eval_ds.windows[idx[j]];
      pe.preds.push_back(pr.preds[j]);
      pe.scores.push_back(pr.pos_prob[j]);
      pe.labels.push_back(w.label);
      pe.patients.push_back(w.patient_id);
      fold_labels.push_back(w.label);
    }
    MetricReport fm = confusion_metrics(pr.preds, fold_labels);
    fm.auc = roc_auc(pr.pos_prob, fold_labels);
    pe.per_fold.push_back(fm);
  }
  return pe;
}

}  // namespace

uint64_t fnv1a64(const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 14695981039346656037ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("file_hash: cannot open " + path.string());
  uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (n < static_cast<std::streamsize>(sizeof buf)) break;
  }
  return h;
}

uint64_t config_hash(const PipelineConfig& cfg) {
  // Paths are excluded: moving a run directory must not invalidate its
  // stage manifests.
  json j = config_json(cfg);
  j.erase("data_dir");
  j.erase("out_dir");
  std::string s = j.dump();
  return fnv1a64(s.data(), s.size());
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_pipeline_config: cannot open " + path.string());
  json j = json::parse(in);
  PipelineConfig c;
  c.data_dir = j.value("data_dir", c.data_dir.string());
  c.out_dir = j.value("out_dir", c.out_dir.string());
  c.target_fs = j.value("target_fs", c.target_fs);
  c.band_lo = j.value("band_lo", c.band_lo);
  c.band_hi = j.value("band_hi", c.band_hi);
  c.baseline_window_s = j.value("baseline_window_s", c.baseline_window_s);
  c.cv_window = j.value("cv_window", c.cv_window);
  if (j.contains("label")) {
    const auto& l = j["label"];
    c.label.T_w = l.value("T_w", c.label.T_w);
    c.label.delta_pre = l.value("delta_pre", c.label.delta_pre);
    c.label.delta_0 = l.value("delta_0", c.label.delta_0);
    c.label.horizon_start = l.value("horizon_start", c.label.horizon_start);
  }
  c.L = j.value("L", c.L);
  c.train_stride = j.value("train_stride", c.train_stride);
  c.eval_stride = j.value("eval_stride", c.eval_stride);
  c.d_min = j.value("d_min", c.d_min);
  c.r_max = j.value("r_max", c.r_max);
  if (j.contains("train")) {
    const auto& t = j["train"];
    c.train.lr = t.value("lr", c.train.lr);
    c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
    c.train.lambda_pos = t.value("lambda_pos", c.train.lambda_pos);
    c.train.batch = t.value("batch", c.train.batch);
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.folds = t.value("folds", c.train.folds);
    c.train.seed = t.value("seed", c.train.seed);
  }
  c.n_explain = j.value("n_explain", c.n_explain);
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    c.synth.n_pos = s.value("n_pos", c.synth.n_pos);
    c.synth.n_neg = s.value("n_neg", c.synth.n_neg);
    c.synth.fs = s.value("fs", c.synth.fs);
    c.synth.pre_onset_s = s.value("pre_onset_min", c.synth.pre_onset_s / 60.0) * 60.0;
    c.synth.tail_s = s.value("tail_s", c.synth.tail_s);
    c.synth.seed = s.value("seed", c.synth.seed);
    c.synth.write_notes = s.value("write_notes", c.synth.write_notes);
    c.synth.base_epoch = s.value("base_epoch", c.synth.base_epoch);
    if (s.contains("drift")) {
      const auto& d = s["drift"];
      c.synth.drift.delta_Tsp_per_h = d.value("delta_Tsp_per_h", 0.0);
      c.synth.drift.delta_Asp_per_h = d.value("delta_Asp_per_h", 0.0);
      c.synth.drift.noise_sd_frac = d.value("noise_sd_frac", 0.0);
      c.synth.drift.hr_jitter_sd = d.value("hr_jitter_sd", 0.0);
      c.synth.drift.drift_window_s = d.value("drift_window_h", 6.0) * 3600.0;
    }
  }
  if (j.contains("windows_min"))
    c.windows_min = j["windows_min"].get<std::vector<double>>();

  // Relative paths are taken against the config file's directory.
  fs::path base = path.parent_path();
  if (c.data_dir.is_relative()) c.data_dir = base / c.data_dir;
  if (c.out_dir.is_relative()) c.out_dir = base / c.out_dir;
  return c;
}

void save_pipeline_config(const fs::path& path, const PipelineConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_pipeline_config: cannot open " + path.string());
  out << config_json(cfg).dump(2) << "\n";
}

std::map<std::string, double> load_onset_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_onset_csv: cannot open " + path.string());
  std::map<std::string, double> onsets;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string pid, ts;
    std::getline(ls, pid, ',');
    std::getline(ls, ts, ',');
    onsets[pid] = std::stod(ts);
  }
  return onsets;
}

void run_synth(const PipelineConfig& cfg, std::ostream* log) {
  fs::create_directories(cfg.data_dir);
  fs::create_directories(cfg.out_dir);
  CohortManifest man = synth_cohort(cfg.data_dir, cfg.synth);
  note(log, "synth: " + std::to_string(man.waveform_files.size()) + " records in " +
                cfg.data_dir.string());
  write_stage_manifest(cfg.out_dir, "synth", cfg, {},
                       {cfg.data_dir / "manifest.json", cfg.data_dir / "notes.jsonl"});
}

void run_parse_notes(const PipelineConfig& cfg, std::ostream* log) {
  fs::create_directories(cfg.out_dir);
  fs::path notes_path = cfg.data_dir / "notes.jsonl";
  auto notes = load_notes_jsonl(notes_path);
  fs::path lex_path = cfg.data_dir / "onset_lexicon.txt";
  Lexicon lex = fs::exists(lex_path) ? load_lexicon(lex_path) : default_lexicon();
  CorpusReport rep = parse_corpus(notes, lex);
  fs::path out_csv = cfg.out_dir / "onsets.csv";
  save_onset_csv(out_csv, rep);
  json j{{"n_notes", notes.size()},
         {"n_explicit", rep.n_explicit},
         {"n_proxy", rep.n_proxy},
         {"n_nonevent", rep.n_nonevent},
         {"n_patients", rep.per_patient.size()},
         {"lexicon_version", lex.version}};
  std::ofstream(cfg.out_dir / "parse_notes_summary.json") << j.dump(2) << "\n";
  note(log, "parse-notes: " + std::to_string(rep.per_patient.size()) +
                " patients resolved (" + std::to_string(rep.n_explicit) + " explicit, " +
                std::to_string(rep.n_proxy) + " proxy)");
  write_stage_manifest(cfg.out_dir, "parse_notes", cfg, {notes_path},
                       {out_csv, cfg.out_dir / "parse_notes_summary.json"});
}

void run_extract(const PipelineConfig& cfg, std::ostream* log) {
  CohortManifest man = load_cohort_manifest(cfg.data_dir / "manifest.json");
  fs::path feat_dir = cfg.out_dir / "features";
  fs::create_directories(feat_dir);
  json summary;
  std::vector<fs::path> outputs;
  for (const auto& [pid, file] : man.waveform_files) {
    auto segments = load_waveform(cfg.data_dir / file);
    std::vector<BeatFeatureVector> beats;
    int skipped = 0;
    for (const auto& seg : segments) {
      try {
        Waveform w = resample(seg.waveform, cfg.target_fs);
        w = bandpass_filter(w, cfg.band_lo, cfg.band_hi);
        DerivativeStack d = derivatives(w);
        for (const auto& span : detect_beats(d)) {
          auto fid = locate_fiducials(d, span);
          if (!fid) continue;
          BeatFeatureVector bf = beat_features(*fid, d);
          bf.source_id = seg.source_file_id;
          beats.push_back(std::move(bf));
        }
      } catch (const std::exception&) {
        ++skipped;  // segment too short / no beats: skip, never fabricate
      }
    }
    std::sort(beats.begin(), beats.end(),
              [](const BeatFeatureVector& a, const BeatFeatureVector& b) {
                return a.timestamp < b.timestamp;
              });
    BaselineStats base = baseline_stats(beats, cfg.baseline_window_s);
    FeatureMatrix m = build_feature_matrix(pid, beats, base, cfg.cv_window);
    fs::path out_csv = feat_dir / (pid + ".csv");
    save_feature_matrix(out_csv, m);
    outputs.push_back(out_csv);
    summary["patients"][pid] = {{"beats", beats.size()},
                                {"segments", segments.size()},
                                {"segments_skipped", skipped}};
    note(log, "extract: " + pid + " -> " + std::to_string(beats.size()) + " beats");
  }
  std::ofstream(cfg.out_dir / "extract_summary.json") << summary.dump(2) << "\n";
  outputs.push_back(cfg.out_dir / "extract_summary.json");
  write_stage_manifest(cfg.out_dir, "extract", cfg, {cfg.data_dir / "manifest.json"},
                       outputs);
}

void run_label(const PipelineConfig& cfg, double T_w, std::ostream* log) {
  LabelParams p = label_params_for(cfg, T_w);
  fs::path dir = cfg.window_dir(T_w);
  fs::create_directories(dir);

  std::map<std::string, double> onsets;
  fs::path onset_csv = cfg.out_dir / "onsets.csv";
  if (fs::exists(onset_csv)) {
    onsets = load_onset_csv(onset_csv);
  } else {
    onsets = load_cohort_manifest(cfg.data_dir / "manifest.json").onsets;
  }

  LabeledDataset train_ds, eval_ds;
  train_ds.L = eval_ds.L = cfg.L;
  train_ds.F = eval_ds.F = kNumFeatures;
  train_ds.params = eval_ds.params = p;
  train_ds.feature_names.assign(kFeatureNames.begin(), kFeatureNames.end());
  eval_ds.feature_names = train_ds.feature_names;

  for (const auto& [pid, fpath] : feature_files(cfg)) {
    FeatureMatrix m = load_feature_matrix(fpath, pid);
    auto it = onsets.find(pid);
    auto wt = it != onsets.end()
                  ? window_dataset(m, it->second, p, cfg.L, cfg.train_stride)
                  : window_dataset_control(m, p, cfg.L, cfg.train_stride);
    auto we = it != onsets.end()
                  ? window_dataset(m, it->second, p, cfg.L, cfg.eval_stride)
                  : window_dataset_control(m, p, cfg.L, cfg.eval_stride);
    train_ds.windows.insert(train_ds.windows.end(), wt.begin(), wt.end());
    eval_ds.windows.insert(eval_ds.windows.end(), we.begin(), we.end());
  }
  save_labeled_dataset(dir / "train_ds.csv", train_ds);
  save_labeled_dataset(dir / "eval_ds.csv", eval_ds);
  long pos = 0;
  for (const auto& w : train_ds.windows) pos += w.label;
  note(log, "label Tw=" + std::to_string(static_cast<long>(T_w)) + ": " +
                std::to_string(train_ds.windows.size()) + " train windows (" +
                std::to_string(pos) + " warning), " +
                std::to_string(eval_ds.windows.size()) + " eval windows");
  write_stage_manifest(dir, "label", cfg, {onset_csv},
                       {dir / "train_ds.csv", dir / "eval_ds.csv"});
}

void run_select(const PipelineConfig& cfg, double T_w, std::ostream* log) {
  fs::path dir = cfg.window_dir(T_w);
  LabeledDataset ds = load_labeled_dataset(dir / "train_ds.csv");
  SelectionReport rep = select_features(ds, cfg.d_min, cfg.r_max);
  save_selection_report(dir / "selection.json", rep);
  note(log, "select Tw=" + std::to_string(static_cast<long>(T_w)) + ": kept " +
                std::to_string(rep.kept.size()) + "/" + std::to_string(ds.F) +
                " features");
  write_stage_manifest(dir, "select", cfg, {dir / "train_ds.csv"},
                       {dir / "selection.json"});
}

void run_train(const PipelineConfig& cfg, double T_w, std::ostream* log) {
  fs::path dir = cfg.window_dir(T_w);
  LabeledDataset train_ds = load_labeled_dataset(dir / "train_ds.csv");
  LabeledDataset eval_ds = load_labeled_dataset(dir / "eval_ds.csv");
  CvOptions opt;
  opt.d_min = cfg.d_min;
  opt.r_max = cfg.r_max;
  auto folds = train_cv(train_ds, eval_ds, cfg.train, opt);

  json j;
  j["config_hash"] = hex64(config_hash(cfg));
  double mean_f1 = 0.0;
  std::vector<fs::path> outputs;
  for (size_t k = 0; k < folds.size(); ++k) {
    fs::path ck = dir / ("fold" + std::to_string(k) + ".ckpt");
    save_checkpoint(ck, folds[k].ckpt);
    outputs.push_back(ck);
    std::vector<std::string> kept_names = folds[k].ckpt.feature_names;
    j["folds"].push_back({{"fold", k},
                          {"val_patients", folds[k].val_patients},
                          {"metrics", metrics_json(folds[k].metrics)},
                          {"best_epoch", folds[k].ckpt.best_epoch},
                          {"val_macro_f1", folds[k].ckpt.val_macro_f1},
                          {"kept_features", kept_names}});
    mean_f1 += folds[k].metrics.f1;
    note(log, "train Tw=" + std::to_string(static_cast<long>(T_w)) + " fold " +
                  std::to_string(k) + ": F1=" + std::to_string(folds[k].metrics.f1) +
                  " (epoch " + std::to_string(folds[k].ckpt.best_epoch) + ")");
  }
  mean_f1 /= folds.empty() ? 1.0 : static_cast<double>(folds.size());
  j["mean_f1"] = mean_f1;
  std::ofstream(dir / "cv_metrics.json") << j.dump(2) << "\n";
  outputs.push_back(dir / "cv_metrics.json");
  write_stage_manifest(dir, "train", cfg, {dir / "train_ds.csv", dir / "eval_ds.csv"},
                       outputs);
}

void run_eval(const PipelineConfig& cfg, double T_w, std::ostream* log) {
  fs::path dir = cfg.window_dir(T_w);
  LabeledDataset eval_ds = load_labeled_dataset(dir / "eval_ds.csv");
  json cv = json::parse(std::ifstream(dir / "cv_metrics.json"));

  std::vector<ModelCheckpoint> ckpts;
  std::vector<std::vector<std::string>> val_patients;
  for (const auto& fj : cv["folds"]) {
    size_t k = fj["fold"].get<size_t>();
    ckpts.push_back(load_checkpoint(dir / ("fold" + std::to_string(k) + ".ckpt")));
    val_patients.push_back(fj["val_patients"].get<std::vector<std::string>>());
  }
  PooledEval pe = pool_predictions(eval_ds, ckpts, val_patients);
  MetricReport pooled = confusion_metrics(pe.preds, pe.labels);
  pooled.auc = roc_auc(pe.scores, pe.labels);

  CohortManifest man = load_cohort_manifest(cfg.data_dir / "manifest.json");
  SubgroupReport sub = subgroup_report(pe.preds, pe.scores, pe.labels, pe.patients,
                                       man.strata, cfg.train.seed);

  json j;
  j["T_w"] = T_w;
  j["pooled"] = metrics_json(pooled);
  j["pooled"]["macro_f1"] = macro_f1(pe.preds, pe.labels);
  for (const auto& fm : pe.per_fold) j["per_fold"].push_back(metrics_json(fm));
  for (const auto& row : sub.rows)
    j["subgroups"].push_back({{"dimension", row.dimension},
                              {"group", row.group},
                              {"n_patients", row.n_patients},
                              {"metrics", metrics_json(row.metrics)}});
  for (const auto& cmp : sub.comparisons)
    j["comparisons"].push_back({{"dimension", cmp.dimension},
                                {"group_a", cmp.group_a},
                                {"group_b", cmp.group_b},
                                {"f1_diff", cmp.f1_diff},
                                {"p_value", cmp.p_value}});
  j["subgroup_notes"] = sub.notes;
  std::ofstream(dir / "metrics.json") << j.dump(2) << "\n";
  note(log, "eval Tw=" + std::to_string(static_cast<long>(T_w)) +
                ": pooled F1=" + std::to_string(pooled.f1) + " over " +
                std::to_string(pooled.n) + " windows");
  write_stage_manifest(dir, "eval", cfg, {dir / "eval_ds.csv", dir / "cv_metrics.json"},
                       {dir / "metrics.json"});
}

void run_attribute(const PipelineConfig& cfg, double T_w, std::ostream* log) {
  fs::path dir = cfg.window_dir(T_w);
  LabeledDataset train_ds = load_labeled_dataset(dir / "train_ds.csv");
  LabeledDataset eval_ds = load_labeled_dataset(dir / "eval_ds.csv");
  ModelCheckpoint ckpt = load_checkpoint(dir / "fold0.ckpt");
  json cv = json::parse(std::ifstream(dir / "cv_metrics.json"));
  auto val0 = cv["folds"][0]["val_patients"].get<std::vector<std::string>>();
  std::set<std::string> vp(val0.begin(), val0.end());

  const auto& kept = ckpt.feature_indices;
  int Fk = static_cast<int>(kept.size());
  int L = train_ds.L;

  // Background: per-feature mean over the training Normal windows.
  std::vector<double> bg(Fk, 0.0);
  long n_cells = 0;
  for (const auto& w : train_ds.windows) {
    if (w.label != 0) continue;
    for (int f = 0; f < Fk; ++f)
      for (int t = 0; t < L; ++t)
        bg[f] += w.features[static_cast<size_t>(kept[f]) * L + t];
    n_cells += L;
  }
  if (n_cells == 0)
    throw std::runtime_error("run_attribute: no Normal training windows for background");
  for (double& v : bg) v /= static_cast<double>(n_cells);

  // Explain held-out warning windows first, then fill with normals.
  std::vector<size_t> chosen;
  for (int want_label : {1, 0}) {
    for (size_t i = 0; i < eval_ds.windows.size(); ++i) {
      if (static_cast<int>(chosen.size()) >= cfg.n_explain) break;
      const auto& w = eval_ds.windows[i];
      if (w.label != want_label || !vp.count(w.patient_id)) continue;
      chosen.push_back(i);
    }
  }
  if (chosen.empty()) throw std::runtime_error("run_attribute: no held-out windows");

  std::vector<AttributionResult> results;
  json meta;
  for (size_t i : chosen) {
    const auto& w = eval_ds.windows[i];
    std::vector<double> sub(static_cast<size_t>(Fk) * L);
    for (int f = 0; f < Fk; ++f)
      for (int t = 0; t < L; ++t)
        sub[static_cast<size_t>(f) * L + t] =
            w.features[static_cast<size_t>(kept[f]) * L + t];
    results.push_back(explain_window(ckpt, sub, bg));
    meta.push_back({{"patient", w.patient_id}, {"t_center", w.t_center},
                    {"label", w.label}});
  }
  AttributionSummary summary = attribution_summary(results, ckpt.feature_names);
  save_attribution_report(dir / "attribution.json", summary, results);
  std::ofstream(dir / "attribution_meta.json") << meta.dump(2) << "\n";
  note(log, "attribute Tw=" + std::to_string(static_cast<long>(T_w)) + ": " +
                std::to_string(results.size()) + " windows, top feature " +
                (summary.ranking.empty()
                     ? std::string("n/a")
                     : ckpt.feature_names[summary.ranking.front()]));
  write_stage_manifest(dir, "attribute", cfg,
                       {dir / "fold0.ckpt", dir / "eval_ds.csv"},
                       {dir / "attribution.json", dir / "attribution_meta.json"});
}

void run_report(const PipelineConfig& cfg, std::ostream* log) {
  json rep;
  rep["config"] = config_json(cfg);
  rep["config_hash"] = hex64(config_hash(cfg));
  std::ostringstream md;
  md << "# Early-warning pipeline report\n\n";
  md << "| T_w (min) | F1 | F2 | Recall | Precision | AUC | Windows |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (double T_w : cfg.sweep()) {
    fs::path dir = cfg.window_dir(T_w);
    json entry{{"T_w", T_w}};
    fs::path mp = dir / "metrics.json";
    if (fs::exists(mp)) {
      json m = json::parse(std::ifstream(mp));
      entry["pooled"] = m["pooled"];
      char row[256];
      std::snprintf(row, sizeof row, "| %g | %.4f | %.4f | %.4f | %.4f | %s | %ld |\n",
                    T_w, m["pooled"]["f1"].get<double>(),
                    m["pooled"]["f2"].get<double>(), m["pooled"]["recall"].get<double>(),
                    m["pooled"]["precision"].get<double>(),
                    m["pooled"].contains("auc")
                        ? std::to_string(m["pooled"]["auc"].get<double>()).c_str()
                        : "n/a",
                    m["pooled"]["n"].get<long>());
      md << row;
    }
    fs::path sp = dir / "selection.json";
    if (fs::exists(sp)) entry["selection"] = json::parse(std::ifstream(sp));
    fs::path ap = dir / "attribution.json";
    if (fs::exists(ap)) {
      json a = json::parse(std::ifstream(ap));
      entry["attribution_ranking"] = a["ranking"];
      entry["attribution_features"] = a["features"];
    }
    rep["windows"].push_back(entry);
  }
  std::ofstream(cfg.out_dir / "report.json") << rep.dump(2) << "\n";
  std::ofstream(cfg.out_dir / "report.md") << md.str();
  note(log, "report: " + (cfg.out_dir / "report.json").string());
  write_stage_manifest(cfg.out_dir, "report", cfg, {},
                       {cfg.out_dir / "report.json", cfg.out_dir / "report.md"});
}

void run_all(const PipelineConfig& cfg, std::ostream* log) {
  if (!fs::exists(cfg.data_dir / "manifest.json")) run_synth(cfg, log);
  if (fs::exists(cfg.data_dir / "notes.jsonl")) run_parse_notes(cfg, log);
  run_extract(cfg, log);
  for (double T_w : cfg.sweep()) {
    run_label(cfg, T_w, log);
    run_select(cfg, T_w, log);
    run_train(cfg, T_w, log);
    run_eval(cfg, T_w, log);
    run_attribute(cfg, T_w, log);
  }
  run_report(cfg, log);
}

}  // namespace strokeppg
