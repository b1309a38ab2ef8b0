#pragma once

// Target smoothing for AdaCat conditionals.
//
// The smoothed per-target log-likelihood replaces log f(x) with the
// expectation of log f under a narrow kernel centred at x. Because f is
// piecewise constant the expectation reduces to a finite sum over bins of
// (kernel mass inside the bin) x (log h_j - log w_j), which is evaluated and
// differentiated in closed form here.

#include <cstddef>
#include <span>
#include <vector>

#include "adacat/distribution.hpp"

namespace adacat {

enum class KernelKind { uniform, truncated_gaussian };

/// Smoothing density on [0, 1) centred at a target value.
///
/// uniform: Unif[x - lambda/2, x + lambda/2) clipped to [0, 1).
/// truncated_gaussian: N(x, lambda^2) restricted to [0, 1).
/// Both are renormalized after truncation so they integrate to one on [0, 1).
class SmoothingKernel {
 public:
  /// Throws std::invalid_argument unless lambda is finite and positive.
  SmoothingKernel(KernelKind kind, double lambda);

  KernelKind kind() const { return kind_; }
  double lambda() const { return lambda_; }

  /// Interval outside of which the kernel puts no mass (uniform) or is ignored
  /// by the closed-form objective (Gaussian: +-6 lambda), intersected with [0, 1].
  struct Support {
    double lo;
    double hi;
  };
  Support support(double center) const;

  /// Kernel CDF F(t); 0 for t <= 0 and 1 for t >= 1.
  /// Throws std::domain_error unless center is in [0, 1).
  double cdf(double center, double t) const;

  /// Kernel density dF/dt on [0, 1); 0 elsewhere.
  double pdf(double center, double t) const;

 private:
  KernelKind kind_;
  double lambda_;
};

/// Gaussian support half-width in units of lambda used by the closed-form objective.
inline constexpr double kGaussianSupportSigmas = 6.0;

/// Unnormalized log masses (phi) and log widths (psi) of one conditional.
struct LogitVector {
  std::vector<double> phi;
  std::vector<double> psi;

  std::size_t bins() const { return phi.size(); }
};

/// Value of a per-target objective and its gradient with respect to (phi, psi).
struct SmoothedLossGrad {
  double value = 0.0;
  std::vector<double> d_phi;
  std::vector<double> d_psi;
};

/// Max-shifted softmax. Entries below `floor` are raised to it and the result renormalized.
SimplexVector softmax_normalize(std::span<const double> logits, double floor = 0.0);

/// AdaCat parameters of a conditional: w = softmax(psi) floored at `width_floor`, h = softmax(phi).
AdaCatParams params_from_logits(const LogitVector& logits, double width_floor = kWidthFloor);

/// Closed-form smoothed log-likelihood
///   sum_j (F(c_j + w_j) - F(c_j)) (log h_j - log w_j)
/// with F the kernel CDF centred at x.
double smoothed_loglik(const LogitVector& logits, const SmoothingKernel& kernel, double x);

/// smoothed_loglik and its exact gradient, including the movement of the bin
/// edges c_j with psi.
SmoothedLossGrad smoothed_loglik_grad(const LogitVector& logits, const SmoothingKernel& kernel, double x);

/// Point log-likelihood log h_i - log w_i of the bin containing x.
double unsmoothed_loglik(const LogitVector& logits, double x);

/// Point log-likelihood and its gradient with the bin membership of x held fixed.
SmoothedLossGrad unsmoothed_loglik_grad(const LogitVector& logits, double x);

}  // namespace adacat
