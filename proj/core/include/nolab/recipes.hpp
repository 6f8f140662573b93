#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nolab/analysis.hpp"
#include "nolab/datagen.hpp"
#include "nolab/erf.hpp"
#include "nolab/models.hpp"
#include "nolab/storage.hpp"
#include "nolab/training.hpp"

namespace nolab::recipes {

// Desk-scale experiment recipes. Each recipe reads a flat
// JSON config; keys missing from it take the defaults below and unknown keys
// are rejected.
enum class Experiment { table1, wave_erf, ns_erf, spectra, equivariance };

const char* experiment_name(Experiment e);
Experiment parse_experiment(const std::string& name);  // table1, wave-erf, ns-erf, spectra, equivariance

storage::json default_config(Experiment e);
storage::json resolve_config(Experiment e, const storage::json& overrides);

struct Context {
  std::optional<std::filesystem::path> out_dir;  // artifacts are written only when set
  std::function<void(const std::string&)> log;
};

struct Outcome {
  storage::json summary;
  std::vector<std::filesystem::path> artifacts;  // relative to out_dir
};

Outcome run(Experiment e, const storage::json& config, const Context& ctx = {});

// ---------------------------------------------------------------- table1

struct ModelRun {
  std::string model;
  std::uint64_t seed = 0;
  double test_rel_l2 = 0.0;  // final-epoch model on the test split
  analysis::SpectrumBins spectrum;  // error energy summed over test samples
  double low_band = 0.0;            // spectrum bins |k| <= 6
  std::vector<training::EpochRecord> history;
  std::size_t param_count = 0;
  double seconds = 0.0;
};

struct Table1Result {
  storage::json config;
  std::vector<ModelRun> runs;

  const ModelRun& at(const std::string& model, std::uint64_t seed) const;
  std::vector<std::string> models() const;
  std::vector<std::uint64_t> seeds() const;
  double mean(const std::string& model) const;
  double stddev(const std::string& model) const;  // sample standard deviation
  storage::json summary() const;  // errors reported in percent
};

// Trains every (model, seed) pair on one dataset with an identical budget.
Table1Result run_table1(const storage::json& config, const Context& ctx = {});

// Model config for one table1/spectra run.
models::ModelConfig model_config(const storage::json& config, const std::string& model, std::uint64_t seed);
training::TrainConfig train_config(const storage::json& config, std::uint64_t seed);
datagen::DatasetSpec dataset_spec(const storage::json& config);

}  // namespace nolab::recipes
