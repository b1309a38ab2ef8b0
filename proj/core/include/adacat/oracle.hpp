#pragma once

// Brute-force references for the closed-form objectives. Nothing here calls
// smoothed_loglik or smoothed_loglik_grad; the only shared pieces are the
// kernel CDF/density and the AdaCatParams density.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adacat/distribution.hpp"
#include "adacat/random.hpp"
#include "adacat/smoothing.hpp"

namespace adacat::oracle {

enum class QuadratureMethod {
  bin_split_exact,   ///< kernel mass of every bin/support intersection times that bin's log-density
  adaptive_simpson,  ///< numeric integral of kernel density x log-density on smooth pieces
};

struct QuadratureConfig {
  QuadratureMethod method = QuadratureMethod::bin_split_exact;
  double abs_tol = 1e-12;
  int max_depth = 50;
};

/// Thrown when adaptive Simpson cannot reach abs_tol within max_depth.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive Simpson on [a, b]; the integrand is sampled only strictly inside
/// (a, b) at the endpoints, so one-sided limits are used at discontinuities.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double abs_tol, int max_depth);

/// Integral of kernel(t | x) log f(t) over [0, 1).
double quad_smoothed_loglik(const AdaCatParams& params, const SmoothingKernel& kernel, double x,
                            const QuadratureConfig& config = {});

/// Central differences, one coordinate at a time.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& objective,
                                     std::span<const double> params, double step);

/// Draw from the truncated, renormalized kernel centred at `center`.
double sample_kernel(const SmoothingKernel& kernel, double center, Rng& rng);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean point log-likelihood over n_draws kernel perturbations of x.
McEstimate mc_smoothed_loglik_estimate(const LogitVector& logits, const SmoothingKernel& kernel, double x,
                                       std::size_t n_draws, std::uint64_t seed);
double mc_smoothed_loglik(const LogitVector& logits, const SmoothingKernel& kernel, double x, std::size_t n_draws,
                          std::uint64_t seed);

/// Gradients are ordered (psi_1, psi_2, phi_1, phi_2) and are gradients of the
/// negative log-likelihood under data ~ Unif[0, 1).
struct BiasDemoPoint {
  std::vector<double> widths;
  std::vector<double> masses;
  std::vector<double> true_grad;             ///< finite differences of the quadrature-evaluated expected NLL
  std::vector<double> mc_expected_grad;      ///< expectation of the per-sample gradient, by quadrature
  std::vector<double> difference;            ///< true_grad - mc_expected_grad
  std::vector<double> symbolic_difference;   ///< -sum_i log(h_i / w_i) grad w_i
  std::vector<double> symbolic_expected;     ///< -(w_1 grad log(h_1/w_1) + w_2 grad log(h_2/w_2))
  double max_error = 0.0;                    ///< max over both symbolic comparisons
};

struct BiasDemoReport {
  BiasDemoPoint symmetric;   ///< w = h = (0.5, 0.5): log-ratio terms vanish
  BiasDemoPoint asymmetric;  ///< w = (0.5, 0.5), h = (0.25, 0.75)
  double tolerance = 1e-6;
  bool tolerance_met = false;

  /// {true_grad, mc_expected_grad, difference, tolerance_met, ...} for the asymmetric point,
  /// with both evaluation points listed under "points".
  std::string to_json() const;
};

/// Two-bin gradient-bias construction for the point objective.
BiasDemoReport gradient_bias_demo();

struct SmoothedDataCheck {
  std::vector<double> analytic;  ///< mean over data of d smoothed_loglik / d (phi, psi)
  std::vector<double> reference; ///< finite differences of E_{smoothed data}[log p] by quadrature
  double max_abs_error = 0.0;
};

/// The smoothed objective averaged over `data` has the same gradient as the
/// expected log-likelihood of the kernel-smoothed data distribution. The
/// analytic side comes from `analytic_grad`, so the check can target any implementation.
SmoothedDataCheck smoothed_data_gradient_check(
    const LogitVector& logits, const SmoothingKernel& kernel, std::span<const double> data, double step,
    const std::function<SmoothedLossGrad(const LogitVector&, const SmoothingKernel&, double)>& analytic_grad);

/// Expected log-likelihood of the smoothed empirical distribution of `data` under `params`.
double smoothed_data_expected_loglik(const AdaCatParams& params, const SmoothingKernel& kernel,
                                     std::span<const double> data, double abs_tol = 1e-13);

}  // namespace adacat::oracle
