#pragma once

// Self-checks behind `adacat verify`: closed-form objectives against the
// brute-force references in oracle.hpp.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "adacat/armodel.hpp"

namespace adacat::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;   ///< worst error observed
  double tolerance = 0.0;
  std::string detail;
};

/// smoothed_loglik vs both quadrature references; error relative to max(1, |reference|).
CheckResult check_quadrature_agreement(std::size_t cases, std::uint64_t seed, double tolerance = 1e-6);

/// Head gradients (smoothed, both kernels, and the point objective) vs central differences.
CheckResult check_head_gradients(std::size_t cases, std::uint64_t seed, double tolerance = 1e-4);

/// Full tiny-model gradient (m = 2, k = 4, one hidden layer of 8) vs central differences.
CheckResult check_model_gradients(HeadKind kind, std::size_t cases, std::uint64_t seed, double tolerance = 1e-4);

/// cdf(1) = 1, discrete masses sum to 1 for K in {2, 10, 256}, kernel CDFs reach 1, quadrature of pdf = 1.
CheckResult check_normalization(std::size_t cases, std::uint64_t seed);

/// Gradient-bias construction: symbolic and quadrature views agree and the bias is non-zero.
CheckResult check_bias_demo(double tolerance = 1e-6);

/// Mean smoothed gradient over a 32-point sample vs finite differences of the
/// smoothed-data expected log-likelihood.
CheckResult check_smoothed_data_gradient(std::uint64_t seed, double tolerance = 1e-3);

/// Small-lambda limit of the smoothed objective equals the point log-density.
CheckResult check_small_lambda_limit(std::size_t cases, std::uint64_t seed, double tolerance = 1e-6);

std::vector<CheckResult> run_all(std::uint64_t seed = 20240601);

/// One row per check: name, PASS/FAIL, measured error, tolerance.
std::string format_table(const std::vector<CheckResult>& results);

}  // namespace adacat::verify
