#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "strokeppg/pipeline.hpp"

using namespace strokeppg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineConfig tiny_config(const fs::path& root) {
  PipelineConfig cfg;
  cfg.data_dir = root / "cohort";
  cfg.out_dir = root / "out";
  cfg.synth.n_pos = 5;
  cfg.synth.n_neg = 5;
  cfg.synth.pre_onset_s = 3600.0;
  cfg.synth.tail_s = 10.0;
  cfg.synth.drift.delta_Tsp_per_h = 0.05;
  cfg.synth.drift.delta_Asp_per_h = -0.05;
  cfg.synth.drift.drift_window_s = 0.5 * 3600.0;
  cfg.synth.drift.noise_sd_frac = 0.01;
  cfg.synth.seed = 21;
  return cfg;
}

}  // namespace

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ull);
}

TEST_CASE("file_hash depends only on file contents") {
  fs::path dir = fs::temp_directory_path() / "strokeppg_pipe_hash";
  fs::create_directories(dir);
  std::ofstream(dir / "a.txt") << "hello\n";
  std::ofstream(dir / "b.txt") << "hello\n";
  std::ofstream(dir / "c.txt") << "world\n";
  CHECK(file_hash(dir / "a.txt") == file_hash(dir / "b.txt"));
  CHECK(file_hash(dir / "a.txt") != file_hash(dir / "c.txt"));
}

TEST_CASE("pipeline config round-trips through JSON with a stable hash") {
  PipelineConfig cfg;
  cfg.target_fs = 100.0;
  cfg.band_hi = 10.0;
  cfg.L = 24;
  cfg.train.epochs = 7;
  cfg.train.seed = 123;
  cfg.label.T_w = 300.0;
  cfg.windows_min = {240.0, 300.0};
  cfg.synth.n_pos = 6;
  cfg.synth.drift.delta_Tsp_per_h = 0.05;

  fs::path path = fs::temp_directory_path() / "strokeppg_cfg_test.json";
  save_pipeline_config(path, cfg);
  PipelineConfig r = load_pipeline_config(path);

  CHECK(r.target_fs == cfg.target_fs);
  CHECK(r.band_hi == cfg.band_hi);
  CHECK(r.L == cfg.L);
  CHECK(r.train.epochs == cfg.train.epochs);
  CHECK(r.train.seed == cfg.train.seed);
  CHECK(r.label.T_w == cfg.label.T_w);
  CHECK(r.windows_min == cfg.windows_min);
  CHECK(r.synth.n_pos == cfg.synth.n_pos);
  CHECK(r.synth.drift.delta_Tsp_per_h == cfg.synth.drift.delta_Tsp_per_h);
  CHECK(config_hash(r) == config_hash(cfg));

  // Any parameter change must move the hash.
  PipelineConfig tweaked = cfg;
  tweaked.d_min = 0.06;
  CHECK(config_hash(tweaked) != config_hash(cfg));
  tweaked = cfg;
  tweaked.train.lambda_pos += 1.0;
  CHECK(config_hash(tweaked) != config_hash(cfg));
}

TEST_CASE("relative paths resolve against the config file's directory") {
  fs::path dir = fs::temp_directory_path() / "strokeppg_cfg_rel";
  fs::create_directories(dir);
  PipelineConfig cfg;
  cfg.data_dir = "my_cohort";
  cfg.out_dir = "my_out";
  save_pipeline_config(dir / "cfg.json", cfg);
  PipelineConfig r = load_pipeline_config(dir / "cfg.json");
  CHECK(r.data_dir == dir / "my_cohort");
  CHECK(r.out_dir == dir / "my_out");
}

TEST_CASE("sweep defaults to the configured warning window") {
  PipelineConfig cfg;
  cfg.label.T_w = 300.0;
  CHECK(cfg.sweep() == std::vector<double>{300.0});
  cfg.windows_min = {240.0, 360.0};
  CHECK(cfg.sweep() == (std::vector<double>{240.0, 360.0}));
  CHECK(cfg.window_dir(360.0).filename() == "Tw360");
}

TEST_CASE("onset CSV loads patient ids and timestamps") {
  fs::path path = fs::temp_directory_path() / "strokeppg_onsets_test.csv";
  std::ofstream(path) << "patient_id,onset_epoch_s,kind,confidence,span_begin,span_end\n"
                      << "P001,1551682800.000,Explicit,High,10,22\n"
                      << "P002,1551690000.500,Proxy,Low,0,6\n";
  auto onsets = load_onset_csv(path);
  REQUIRE(onsets.size() == 2);
  CHECK(onsets.at("P001") == doctest::Approx(1551682800.0));
  CHECK(onsets.at("P002") == doctest::Approx(1551690000.5));
  CHECK_THROWS_AS(load_onset_csv(path.parent_path() / "nope.csv"), std::runtime_error);
}

TEST_CASE("synth, parse-notes, extract, and label stages are deterministic") {
  fs::path r1 = fs::temp_directory_path() / "strokeppg_pipe_run1";
  fs::path r2 = fs::temp_directory_path() / "strokeppg_pipe_run2";
  fs::remove_all(r1);
  fs::remove_all(r2);
  PipelineConfig c1 = tiny_config(r1);
  PipelineConfig c2 = tiny_config(r2);

  for (const auto& cfg : {c1, c2}) {
    run_synth(cfg);
    run_parse_notes(cfg);
    run_extract(cfg);
    run_label(cfg, cfg.label.T_w);
  }

  // Every artifact the stages wrote must be byte-identical between runs.
  for (const char* rel : {"cohort/manifest.json", "cohort/notes.jsonl", "out/onsets.csv",
                          "out/Tw360/train_ds.csv", "out/Tw360/eval_ds.csv"}) {
    CHECK(slurp(r1 / rel) == slurp(r2 / rel));
  }
  for (const auto& e : fs::directory_iterator(r1 / "out" / "features")) {
    CHECK(slurp(e.path()) ==
          slurp(r2 / "out" / "features" / e.path().filename()));
  }

  // Note-derived onsets agree with the generator manifest to the minute.
  auto onsets = load_onset_csv(c1.out_dir / "onsets.csv");
  auto man = load_cohort_manifest(c1.data_dir / "manifest.json");
  REQUIRE(onsets.size() == man.onsets.size());
  for (const auto& [pid, ts] : man.onsets) {
    REQUIRE(onsets.count(pid));
    CHECK(std::abs(onsets.at(pid) - ts) < 60.0);
  }

  // The labeled sets contain both classes and every patient.
  LabeledDataset train = load_labeled_dataset(c1.window_dir(360.0) / "train_ds.csv");
  int pos = 0;
  std::set<std::string> pids;
  for (const auto& w : train.windows) {
    pos += w.label;
    pids.insert(w.patient_id);
  }
  CHECK(pos > 0);
  CHECK(pos < static_cast<int>(train.windows.size()));
  CHECK(pids.size() == 10);
}
