// ppgwarn: command-line driver for the PPG early-warning pipeline.
//
//   ppgwarn synth        --config cfg.json
//   ppgwarn parse-notes  --config cfg.json
//   ppgwarn extract      --config cfg.json
//   ppgwarn label|select|train|eval|attribute
//                        --config cfg.json [--window MIN]...
//   ppgwarn report       --config cfg.json
//   ppgwarn run-all      --config cfg.json [--window MIN]... [--seed N]
//   ppgwarn init-config  --out cfg.json
//
// Every stage is deterministic for a fixed config; reruns reproduce
// byte-identical artifacts.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "strokeppg/pipeline.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<double> windows;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string data_dir, out_dir;
};

strokeppg::PipelineConfig resolve(const CommonOpts& o) {
  strokeppg::PipelineConfig cfg = strokeppg::load_pipeline_config(o.config_path);
  if (!o.windows.empty()) cfg.windows_min = o.windows;
  if (o.seed_set) {
    cfg.train.seed = o.seed;
    cfg.synth.seed = o.seed;
  }
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  return cfg;
}

void add_common(CLI::App* sub, CommonOpts& o, bool windows = false) {
  sub->add_option("--config", o.config_path, "Pipeline config JSON")->required();
  sub->add_option("--data-dir", o.data_dir, "Override cohort directory");
  sub->add_option("--out", o.out_dir, "Override output directory");
  auto* seed = sub->add_option("--seed", o.seed, "Override training/generator seed");
  seed->each([&o](const std::string&) { o.seed_set = true; });
  if (windows)
    sub->add_option("--window", o.windows,
                    "Warning-window length in minutes (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PPG-based in-hospital stroke early-warning pipeline"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string init_out = "pipeline.json";

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  add_common(synth, o);
  auto* notes = app.add_subcommand("parse-notes", "Resolve onset times from notes");
  add_common(notes, o);
  auto* extract = app.add_subcommand("extract", "Waveforms -> biomarker matrices");
  add_common(extract, o);
  auto* label = app.add_subcommand("label", "Cut and label training windows");
  add_common(label, o, true);
  auto* select = app.add_subcommand("select", "Effect-size + redundancy screen");
  add_common(select, o, true);
  auto* train = app.add_subcommand("train", "Patient-level cross-validated training");
  add_common(train, o, true);
  auto* eval = app.add_subcommand("eval", "Held-out metrics and subgroup report");
  add_common(eval, o, true);
  auto* attrib = app.add_subcommand("attribute", "Exact Shapley attributions");
  add_common(attrib, o, true);
  auto* report = app.add_subcommand("report", "Aggregate per-window results");
  add_common(report, o, true);
  auto* all = app.add_subcommand("run-all", "Full pipeline end to end");
  add_common(all, o, true);
  auto* init = app.add_subcommand("init-config", "Write a default config file");
  init->add_option("--out", init_out, "Where to write the config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (init->parsed()) {
      strokeppg::save_pipeline_config(init_out, strokeppg::PipelineConfig{});
      std::cout << "wrote " << init_out << "\n";
      return 0;
    }
    strokeppg::PipelineConfig cfg = resolve(o);
    std::ostream* log = &std::cout;
    if (synth->parsed()) strokeppg::run_synth(cfg, log);
    if (notes->parsed()) strokeppg::run_parse_notes(cfg, log);
    if (extract->parsed()) strokeppg::run_extract(cfg, log);
    for (double T_w : cfg.sweep()) {
      if (label->parsed()) strokeppg::run_label(cfg, T_w, log);
      if (select->parsed()) strokeppg::run_select(cfg, T_w, log);
      if (train->parsed()) strokeppg::run_train(cfg, T_w, log);
      if (eval->parsed()) strokeppg::run_eval(cfg, T_w, log);
      if (attrib->parsed()) strokeppg::run_attribute(cfg, T_w, log);
    }
    if (report->parsed()) strokeppg::run_report(cfg, log);
    if (all->parsed()) strokeppg::run_all(cfg, log);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
