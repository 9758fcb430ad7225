#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "strokeppg/evaluation.hpp"
#include "strokeppg/labeling.hpp"
#include "strokeppg/selection.hpp"

namespace strokeppg {

// Residual 1-D classifier: stem conv(32,k7) + three residual blocks
// (32,k5), (64,k5,stride 2), (64,k3), global average pool, 2-logit head.
struct ArchSpec {
  int in_channels = 17;
  int input_len = 30;
  int stem_ch = 32;
  int stem_k = 7;
  struct Block {
    int ch;
    int k;
    int stride;  // applied in the block's first conv (and projection)
  };
  std::vector<Block> blocks = {{32, 5, 1}, {64, 5, 2}, {64, 3, 1}};
  int num_classes = 2;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
};

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;  // decoupled; norm scale/shift and biases exempt
  double lambda_pos = 3.0;
  int batch = 64;
  int epochs = 50;
  int folds = 5;
  uint64_t seed = 1;
};

// Named view into the flat parameter vector.
struct ParamEntry {
  std::string name;
  size_t offset = 0;
  size_t size = 0;
  bool decay = true;  // false for biases and norm scale/shift
};

class Network {
 public:
  explicit Network(const ArchSpec& arch);

  const ArchSpec& arch() const { return arch_; }
  size_t param_count() const { return param_count_; }
  size_t stats_count() const { return stats_count_; }
  const std::vector<ParamEntry>& param_table() const { return table_; }
  std::vector<uint8_t> decay_mask() const;

  std::vector<double> init_params(uint64_t seed) const;
  std::vector<double> init_stats() const;  // running mean 0 / var 1

  // input: B x in_channels x input_len, flattened [b][c][t]. Train mode
  // uses batch statistics and updates running_stats in place.
  std::vector<double> forward(const std::vector<double>& params,
                              std::vector<double>& running_stats,
                              const std::vector<double>& input, int B,
                              bool train) const;

  // Weighted cross-entropy of the whole composed model; exact reverse-mode
  // gradient with respect to every parameter when grad != nullptr.
  double loss_and_grad(const std::vector<double>& params,
                       std::vector<double>& running_stats,
                       const std::vector<double>& input,
                       const std::vector<int>& labels, int B, double lambda_pos,
                       std::vector<double>* grad) const;

 private:
  struct Impl;
  ArchSpec arch_;
  std::vector<ParamEntry> table_;
  size_t param_count_ = 0;
  size_t stats_count_ = 0;
};

// Log-sum-exp stabilized weighted cross-entropy (mean over the batch,
// positive class weighted by lambda_pos).
double weighted_ce(const std::vector<double>& logits, const std::vector<int>& labels,
                   double lambda_pos);

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
};

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const TrainConfig& cfg,
               const std::vector<uint8_t>& decay_mask);

// Seeded stratified round-robin split; every patient lands in exactly one
// fold, positive-bearing and negative-only patients balanced separately.
std::vector<std::vector<std::string>> patient_folds(
    const std::vector<std::pair<std::string, bool>>& patients, int k, uint64_t seed);

struct ModelCheckpoint {
  ArchSpec arch;
  std::vector<double> params;
  std::vector<double> running_stats;
  std::vector<int> feature_indices;  // columns kept by selection
  std::vector<std::string> feature_names;
  std::string column_order_version;
  LabelParams label_params;
  uint64_t seed = 0;
  int best_epoch = 0;
  double val_macro_f1 = 0.0;
};

// JSON header line + little-endian 64-bit parameter block.
void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& c);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

struct FoldResult {
  ModelCheckpoint ckpt;
  MetricReport metrics;
  std::vector<std::string> val_patients;
  SelectionReport selection;
};

struct CvOptions {
  double d_min = 0.05;
  double r_max = 0.80;
  bool run_selection = true;
};

// Stratified patient-level k-fold training: per fold, feature selection on
// the training windows only, best-macro-F1 checkpoint retained (earliest
// epoch on ties), metrics from the held-out fold.
std::vector<FoldResult> train_cv(const LabeledDataset& train_ds,
                                 const LabeledDataset& eval_ds,
                                 const TrainConfig& cfg, const CvOptions& opt = {});

// Convenience: eval-mode positive-class probabilities and argmax labels for
// windows of one dataset restricted to the checkpoint's feature manifest.
struct Predictions {
  std::vector<int> preds;
  std::vector<double> pos_prob;
  std::vector<double> pos_logit;
};
Predictions predict(const ModelCheckpoint& ckpt, const LabeledDataset& ds,
                    const std::vector<size_t>& window_idx);

}  // namespace strokeppg
