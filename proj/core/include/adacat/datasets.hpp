#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adacat/distribution.hpp"
#include "adacat/matrix.hpp"

namespace adacat {

/// Per-dimension affine map: original = offset + range * scaled.
struct ScaleMeta {
  double offset = 0.0;
  double range = 1.0;

  double scale(double original) const { return (original - offset) / range; }
  double unscale(double scaled) const { return offset + range * scaled; }
  bool operator==(const ScaleMeta&) const = default;
};

/// Samples in [0, 1)^m plus the maps back to original units.
struct Dataset {
  std::string name;
  SampleMatrix samples;
  std::vector<ScaleMeta> scale;
  /// Differential entropy of the generating density in scaled units, when known.
  std::optional<double> true_nll;

  std::size_t size() const { return samples.rows(); }
  std::size_t dims() const { return samples.cols(); }
  /// sum_t log(range_t): add to a scaled-space NLL to express it in original units.
  double log_volume() const;
};

/// Largest double strictly below 1; the value stragglers are clamped to.
inline constexpr double kBelowOne = 1.0 - 0x1.0p-53;

struct MixtureComponent {
  double weight;
  double mean;
  double stddev;
};

/// 1-D Gaussian mixture in original units.
struct MixtureSpec {
  std::vector<MixtureComponent> components;

  /// Throws std::invalid_argument for empty specs, weights that are not a simplex, or stddev <= 0.
  void validate() const;
  double density(double x) const;
  /// Differential entropy in original units by adaptive quadrature.
  double entropy() const;
};

/// Two-scale mixture used by the 1-D experiments: narrow mode at -1, wide mode at +1.
MixtureSpec canonical_mixture();

/// n draws from `spec`, mapped into [0, 1) by a fixed affine map over
/// [min mean - 4 sigma_max, max mean + 4 sigma_max]; stragglers are clamped.
Dataset synth_mixture_1d(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

/// Two-arm Archimedean spiral: angle ~ Unif[0, 3 pi], radius = angle, the
/// second arm rotated by pi, Gaussian noise per coordinate, scaled into [0, 1)^2.
/// Rows come in pairs sharing one angle, one row per arm.
Dataset synth_two_spirals(std::size_t n, double noise_sd, std::uint64_t seed);

/// Default noise of the two-spirals fixture (original units, radius up to 3 pi).
inline constexpr double kSpiralNoise = 0.25;

/// Raw numeric table read from CSV, before scaling.
struct CsvTable {
  SampleMatrix values;
};

/// Comma-separated decimal values; `skip_header` drops the first line.
/// Throws std::runtime_error naming row and column for malformed cells, and
/// for rows whose column count differs from `declared_dims` (0 = infer from the first row).
CsvTable read_csv(const std::filesystem::path& path, std::size_t declared_dims, bool skip_header = false);

/// Min-max map per column with the range inflated by a relative 1e-9 so the
/// column maximum lands strictly below 1. Throws on constant columns.
std::vector<ScaleMeta> fit_min_max(const SampleMatrix& raw);

/// Applies `scale`; values outside [0, 1) are clamped and counted in `clamped`.
Dataset apply_scaling(const SampleMatrix& raw, std::vector<ScaleMeta> scale, std::string name,
                      std::size_t* clamped = nullptr);

/// read_csv + fit_min_max over all rows + apply_scaling.
Dataset load_csv(const std::filesystem::path& path, std::size_t declared_dims, bool skip_header = false);

/// Per-dimension equal-mass bin widths from empirical quantiles, floored at
/// kWidthFloor and renormalized. Throws std::invalid_argument when n < k.
std::vector<SimplexVector> marginal_quantiles(const Dataset& dataset, std::size_t k);

/// Shuffles rows with `seed` and holds out the last `validation_fraction` of them.
std::pair<Dataset, Dataset> split_train_validation(const Dataset& dataset, double validation_fraction,
                                                   std::uint64_t seed);

/// Dataset snapshot as JSON: {name, dims, samples, scale, true_nll}.
std::string dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const std::string& text);

}  // namespace adacat
