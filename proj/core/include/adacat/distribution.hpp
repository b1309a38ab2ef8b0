#pragma once

// The AdaCat distribution: a mixture of k uniform components whose supports
// tile [0, 1) without overlap. Component i covers [c_i, c_i + w_i) and carries
// probability mass h_i, so its density is h_i / w_i.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace adacat {

/// Smallest admissible bin width.
inline constexpr double kWidthFloor = 1e-8;
/// Tolerance on sum-to-one checks for simplex vectors and prefix sums.
inline constexpr double kSimplexTolerance = 1e-9;
/// Returned by log-density and log-mass queries that hit a zero-mass region.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// Non-negative vector summing to one (within kSimplexTolerance).
class SimplexVector {
 public:
  /// Throws std::invalid_argument on empty input, negative or non-finite
  /// entries, or a sum that differs from one by more than kSimplexTolerance.
  explicit SimplexVector(std::vector<double> values);

  static SimplexVector uniform(std::size_t k);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

 private:
  std::vector<double> values_;
};

/// Half-open interval [lo, hi) of the bin that contains a point. `index` is 0-based.
struct BinHit {
  std::size_t index;
  double lo;
  double hi;
};

enum class SampleMode {
  within_bin_uniform,  ///< inverse-CDF draw; uniform inside the selected bin
  midpoint,            ///< select a bin by mass, return its centre
};

/// c_0 = 0, c_{i+1} = c_i + w_i; the final entry is pinned to exactly 1.
/// Equal entries give c_i = i / k exactly.
std::vector<double> prefix_sums(const SimplexVector& widths);

class AdaCatParams {
 public:
  /// Throws std::invalid_argument when the sizes differ or a width is below `width_floor`.
  AdaCatParams(SimplexVector widths, SimplexVector masses, double width_floor = kWidthFloor);

  std::size_t bins() const { return widths_.size(); }
  std::span<const double> widths() const { return widths_.values(); }
  std::span<const double> masses() const { return masses_.values(); }
  /// Bin edges c_0 .. c_k (k + 1 entries).
  std::span<const double> edges() const { return edges_; }
  /// Cumulative masses H_0 .. H_k with H_i = cdf(c_i).
  std::span<const double> cumulative_masses() const { return cumulative_; }

  /// Bin with c_i <= x < c_i + w_i. Throws std::domain_error unless 0 <= x < 1.
  BinHit bin_index(double x) const;

  /// h_i / w_i inside the support, 0 outside [0, 1).
  double pdf(double x) const;

  /// log h_i - log w_i; kLogZero for a zero-mass bin. Throws std::domain_error unless 0 <= x < 1.
  double log_pdf(double x) const;

  /// Piecewise-linear CDF; clamps t <= 0 to 0 and t >= 1 to 1.
  double cdf(double t) const;

  /// Generalized inverse inf{x : cdf(x) >= u}. On a zero-mass plateau this is
  /// the plateau's left edge. Throws std::domain_error unless 0 <= u < 1.
  double icdf(double u) const;

  double sample(double u, SampleMode mode) const;

  /// Probability mass of [a, b) computed bin by bin (no CDF subtraction).
  double interval_mass(double a, double b) const;

  /// log of the mass of [i / levels, (i + 1) / levels); kLogZero when that mass is 0.
  double discrete_log_mass(std::size_t i, std::size_t levels) const;

 private:
  SimplexVector widths_;
  SimplexVector masses_;
  std::vector<double> edges_;
  std::vector<double> cumulative_;
};

/// Equal-width bins (w_i = 1/k): the plain categorical head with uniform noise inside each bin.
AdaCatParams from_uniform_categorical(SimplexVector masses);

/// Equal-mass bins (h_i = 1/k): widths act as the k-quantiles.
AdaCatParams from_quantiles(SimplexVector widths, double width_floor = kWidthFloor);

}  // namespace adacat
