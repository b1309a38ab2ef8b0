#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adacat/armodel.hpp"
#include "adacat/datasets.hpp"
#include "adacat/smoothing.hpp"

namespace adacat {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  ///< decoupled (AdamW-style)
};

struct AdamState {
  explicit AdamState(std::size_t n) : first(n, 0.0), second(n, 0.0) {}
  std::vector<double> first;
  std::vector<double> second;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam step that *increases* the objective whose gradient
/// is `objective_grad` (ascent on log-likelihood, i.e. descent on NLL).
/// Throws std::runtime_error on a non-finite gradient entry, leaving params untouched.
void adam_step(std::span<double> params, std::span<const double> objective_grad, AdamState& state,
               const AdamConfig& config, double lr);

struct TrainConfig {
  std::size_t epochs = 400;
  std::size_t batch_size = 256;
  double lr = 3e-4;
  std::size_t lr_halving_period = 100;  ///< epochs; 0 keeps lr constant
  AdamConfig adam;
  std::optional<SmoothingKernel> smoothing;  ///< none: point log-likelihood objective
  std::uint64_t seed = 0;
  std::size_t threads = 0;  ///< 0: default_thread_count()

  /// Throws std::invalid_argument for lr <= 0, betas outside [0, 1), or batch_size == 0.
  void validate() const;
  double lr_at(std::size_t epoch) const;
};

struct Evaluation {
  double nll_nats = 0.0;         ///< per sample, original units (scaled NLL + sum log range)
  double nll_scaled_nats = 0.0;  ///< per sample, in the unit cube the model lives in
  double bits_per_dim = 0.0;     ///< nll_scaled_nats / (m ln 2)
  double min_bin_width = 1.0;    ///< smallest w_i over all conditionals visited
  std::optional<std::size_t> non_finite_index;  ///< first sample with a non-finite log-density
};

/// Pure function of (model, dataset). A non-finite log-density on any point
/// yields +inf NLL and records the sample index.
Evaluation evaluate(const ArDensityModel& model, const Dataset& dataset);

struct EpochRecord {
  std::size_t epoch = 0;  ///< 0 is the initial model
  std::optional<double> objective_nats;
  double val_nll_nats = 0.0;
  double val_nll_scaled_nats = 0.0;
  double val_bits_per_dim = 0.0;
  double min_bin_width = 1.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;  ///< initial evaluation followed by one record per completed epoch
  bool aborted = false;
  std::string abort_reason;
};

/// One JSON object per line: {epoch, objective_nats, val_nll_nats, val_nll_scaled_nats,
/// val_bits_per_dim, min_bin_width, seconds}.
std::string epoch_to_json(const EpochRecord& record);
std::string report_to_jsonl(const TrainReport& report);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Seeded mini-batch Adam on the mean per-sample log-likelihood (smoothed when
/// config.smoothing is set). Aborts on a non-finite objective or gradient and
/// returns the partial report.
TrainReport train(ArDensityModel& model, const Dataset& train_set, const Dataset& validation_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace adacat
