#pragma once

// Autoregressive density model p(x) = prod_t p(x^t | x^{<t}). Every
// dimension t has its own MLP that maps Fourier features of the prefix
// x^{<t} to the logits of an AdaCat conditional. Dimension 0 has an empty
// prefix; its "network" is a single bias vector.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adacat/distribution.hpp"
#include "adacat/matrix.hpp"
#include "adacat/random.hpp"
#include "adacat/smoothing.hpp"

namespace adacat {

inline constexpr std::size_t kMaxFourierPairs = 32;

struct FourierConfig {
  std::size_t pairs = 0;  ///< b: number of (sin, cos) pairs per input element
};

/// (x, sin(2^0 x), cos(2^0 x), ..., sin(2^{b-1} x), cos(2^{b-1} x))
std::vector<double> fourier_features(double x, std::size_t pairs);
void append_fourier_features(double x, std::size_t pairs, std::vector<double>& out);

enum class HeadKind {
  adacat,             ///< network predicts masses and widths
  uniform,            ///< network predicts masses; widths fixed at 1/k
  adaptive_quantile,  ///< network predicts widths; masses fixed at 1/k
  fixed_quantile,     ///< network predicts masses; widths precomputed per dimension
};

std::string_view to_string(HeadKind kind);
/// Accepts "adacat", "uniform", "adaptive-quantile", "fixed-quantile".
HeadKind parse_head_kind(std::string_view name);

struct HeadMode {
  HeadKind kind = HeadKind::adacat;
  /// One width vector per dimension; present exactly when kind == fixed_quantile.
  std::vector<SimplexVector> fixed_widths;
};

struct ModelConfig {
  std::size_t dims = 1;
  std::size_t bins = 16;
  FourierConfig fourier;
  HeadMode head;
  std::vector<std::size_t> hidden = {64, 64, 64};

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  /// 2k for adacat, k otherwise.
  std::size_t head_outputs() const;
  /// Input width of the network for dimension t: t * (1 + 2b).
  std::size_t input_size(std::size_t t) const;
};

/// Dense layer stored in the model's flat parameter vector; weights are row-major out x in.
struct LayerLayout {
  std::size_t in;
  std::size_t out;
  std::size_t weight_offset;
  std::size_t bias_offset;
};

/// Thrown when an objective evaluates to a non-finite value.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::size_t row, std::size_t dim, double value);
  std::size_t row() const { return row_; }
  std::size_t dim() const { return dim_; }

 private:
  std::size_t row_;
  std::size_t dim_;
};

class ArDensityModel {
 public:
  /// Glorot-uniform hidden weights, zero biases, zero output layer: a fresh
  /// model is the uniform density on [0, 1)^m.
  ArDensityModel(ModelConfig config, std::uint64_t seed);

  /// Model with the given parameters (e.g. from a checkpoint).
  ArDensityModel(ModelConfig config, std::vector<double> parameters);

  const ModelConfig& config() const { return config_; }
  std::size_t dims() const { return config_.dims; }
  std::size_t bins() const { return config_.bins; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::span<const LayerLayout> layers(std::size_t t) const { return layers_[t]; }
  /// Parameter range [begin, end) owned by the network of dimension t.
  std::pair<std::size_t, std::size_t> net_range(std::size_t t) const;

  /// Logits of the conditional for dimension prefix.size().
  LogitVector conditional_logits(std::span<const double> prefix) const;
  AdaCatParams conditional(std::span<const double> prefix) const;

  /// sum_t log p(x^t | x^{<t}); kLogZero never occurs for finite parameters.
  double joint_log_likelihood(std::span<const double> x) const;

  /// Draws dimension by dimension, each conditioned on the values drawn so far.
  std::vector<double> sample(Rng& rng, SampleMode mode) const;

  /// Runs the network of dimension t, returning the raw head outputs and
  /// keeping the activations needed by backward().
  struct Trace {
    std::vector<std::vector<double>> activations;  // input, then post-ReLU hidden layers
    std::vector<std::vector<double>> pre_activations;
    std::vector<double> output;
  };
  void forward(std::size_t t, std::span<const double> prefix, Trace& trace) const;
  /// Accumulates d(objective)/d(parameters) for net t into `gradient`.
  void backward(std::size_t t, const Trace& trace, std::span<const double> d_output,
                std::span<double> gradient) const;

  LogitVector head_logits(std::size_t t, std::span<const double> output) const;
  /// Maps (d_phi, d_psi) onto the raw head outputs for the configured mode.
  std::vector<double> head_output_grad(const SmoothedLossGrad& grad) const;

 private:
  void build_layout();

  ModelConfig config_;
  std::vector<std::vector<LayerLayout>> layers_;
  std::vector<double> params_;
  std::vector<std::vector<double>> fixed_log_widths_;
};

struct ObjectiveResult {
  double value = 0.0;             ///< mean over rows of sum_t per-target log-likelihood (nats)
  std::vector<double> gradient;   ///< d value / d parameters
};

/// Worker count from ADACAT_THREADS, else the hardware concurrency (at least 1).
std::size_t default_thread_count();

/// Mean smoothed (kernel given) or point (no kernel) log-likelihood of the
/// selected rows, with its exact gradient. Rows are processed in fixed
/// chunks and reduced in chunk order, so the result is bitwise identical for
/// any thread count. Throws NonFiniteLoss naming the first offending (row, dim).
ObjectiveResult smoothed_joint_objective(const ArDensityModel& model, const SampleMatrix& data,
                                         std::span<const std::size_t> rows,
                                         const std::optional<SmoothingKernel>& kernel,
                                         std::size_t threads = 0);

/// Convenience overload over all rows.
ObjectiveResult smoothed_joint_objective(const ArDensityModel& model, const SampleMatrix& data,
                                         const std::optional<SmoothingKernel>& kernel,
                                         std::size_t threads = 0);

}  // namespace adacat
