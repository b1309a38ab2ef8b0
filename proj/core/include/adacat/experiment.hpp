#pragma once

// One training run described by plain values: data source, model shape and
// optimizer settings. Serializes to the JSON config block of a run manifest.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adacat/armodel.hpp"
#include "adacat/datasets.hpp"
#include "adacat/training.hpp"

namespace adacat {

/// Build identifier recorded in manifests (`git describe` at configure time).
std::string_view build_version();

struct ExperimentConfig {
  // data
  std::string data = "synth:mixture1d";  ///< synth:mixture1d | synth:twospirals | csv:<path>
  std::size_t n = 10000;                 ///< synthetic sample count
  double noise = kSpiralNoise;           ///< spiral noise standard deviation
  std::size_t csv_dims = 0;              ///< 0: take the column count of the first row
  bool csv_header = false;
  double validation_fraction = 0.1;

  // model
  std::string mode = "adacat";
  std::size_t bins = 16;
  std::size_t fourier = 0;
  std::vector<std::size_t> hidden{64, 64, 64};

  // objective and optimizer
  std::string smoothing = "uniform";  ///< none | uniform | gaussian
  double lambda = 1e-3;
  std::size_t epochs = 400;
  std::size_t batch_size = 256;
  double lr = 3e-4;
  std::size_t lr_halving = 100;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
};

/// Full dataset for the configured source, before the split.
Dataset load_experiment_data(const ExperimentConfig& cfg);

/// Seeded (train, validation) split. CSV scaling is fitted on the training
/// rows only; validation values outside [0, 1) are clamped and counted.
std::pair<Dataset, Dataset> experiment_splits(const ExperimentConfig& cfg, std::size_t* clamped_validation = nullptr);

/// Fixed-quantile widths come from `train_set`; other modes ignore it.
ModelConfig experiment_model_config(const ExperimentConfig& cfg, const Dataset& train_set);
TrainConfig experiment_train_config(const ExperimentConfig& cfg);

struct ExperimentRun {
  Dataset train_set;
  Dataset validation_set;
  ArDensityModel model;
  TrainReport report;
};

ExperimentRun run_experiment(const ExperimentConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace adacat
