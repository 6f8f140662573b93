#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nolab/datagen.hpp"
#include "nolab/models.hpp"
#include "nolab/storage.hpp"

namespace nolab::training {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 10.0;  // global gradient norm; 0 disables
  std::string schedule = "cosine";  // cosine | constant
  double divergence_threshold = 1e3;
  std::uint64_t seed = 0;
  DType dtype = DType::f32;
  bool normalize_targets = true;

  void validate() const;
  storage::json to_json() const;
  static TrainConfig from_json(const storage::json& j);
};

struct OptimizerState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t step = 0;
};

/// Mean over the batch of ||pred_i - target_i||_2 / max(||target_i||_2, 1e-12).
/// pred, target: [B, ...]. Differentiable in pred.
Tensor relative_l2(const Tensor& pred, const Tensor& target);
// Per-sample values of the same quantity (no tracking).
std::vector<double> relative_l2_per_sample(const Tensor& pred, const Tensor& target);

/// One bias-corrected Adam update at learning rate `lr`. Throws on a
/// non-finite gradient. Parameters of an f32 model are rounded to float.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, OptimizerState& state,
               const TrainConfig& config, double lr);

double scheduled_lr(const TrainConfig& config, std::uint64_t step, std::uint64_t total_steps);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // sample-weighted mean of the batch losses
  double test_rel_l2 = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  models::ModelState final_state;
  models::ModelState best_state;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

// Normalized inputs and physical targets plus the train-split statistics
// read from the dataset metadata. The model works in normalized units and
// its output is decoded with out_stats before the loss.
struct PreparedData {
  Tensor inputs;   // [n, N, N]
  Tensor targets;  // [n, N, N]
  datagen::NormStats in_stats, out_stats;
};
PreparedData prepare(const storage::DatasetContainer& c, const TrainConfig& config);

/// Model prediction in physical units for already-normalized inputs.
Tensor predict(const models::ModelState& state, const PreparedData& data, std::size_t batch = 16);

// Test relative l2 (physical units) of a model on a dataset split.
double evaluate(const models::ModelState& state, const storage::DatasetContainer& test, const TrainConfig& config);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam with cosine decay over seeded mini-batch permutations, minimizing the
/// batch relative l2 in physical units. epochs = 0 returns the initial state.
TrainResult train(const models::ModelState& initial, const storage::DatasetContainer& train_set,
                  const storage::DatasetContainer& test_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

storage::CsvTable history_table(const std::vector<EpochRecord>& history);
std::string history_digest(const std::vector<EpochRecord>& history);

}  // namespace nolab::training
