#include "adacat/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "adacat/oracle.hpp"

namespace adacat::verify {

namespace {

LogitVector random_logits(Rng& rng, std::size_t k, double phi_scale, double psi_scale) {
  LogitVector l;
  for (std::size_t i = 0; i < k; ++i) {
    l.phi.push_back(phi_scale * rng.normal());
    l.psi.push_back(psi_scale * rng.normal());
  }
  return l;
}

SmoothingKernel random_kernel(Rng& rng, double log10_lo, double log10_hi) {
  const auto kind = rng.uniform() < 0.5 ? KernelKind::uniform : KernelKind::truncated_gaussian;
  return {kind, std::pow(10.0, rng.uniform(log10_lo, log10_hi))};
}

std::vector<double> flatten(const LogitVector& l) {
  std::vector<double> theta(l.phi);
  theta.insert(theta.end(), l.psi.begin(), l.psi.end());
  return theta;
}

LogitVector unflatten(std::span<const double> theta) {
  const auto k = theta.size() / 2;
  return {{theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(k)},
          {theta.begin() + static_cast<std::ptrdiff_t>(k), theta.end()}};
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

CheckResult finish(std::string name, double measured, double tolerance, std::string detail = {}) {
  return {std::move(name), measured <= tolerance, measured, tolerance, std::move(detail)};
}

}  // namespace

CheckResult check_quadrature_agreement(std::size_t cases, std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  double worst = 0.0;
  std::size_t worst_case = 0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t k = 1 + rng.below(24);
    const auto logits = random_logits(rng, k, 1.5, 1.0);
    const auto kernel = random_kernel(rng, -4.0, -0.5);
    const double x = rng.uniform();
    const double analytic = smoothed_loglik(logits, kernel, x);
    const auto params = params_from_logits(logits);
    for (auto method : {oracle::QuadratureMethod::bin_split_exact, oracle::QuadratureMethod::adaptive_simpson}) {
      const double ref = oracle::quad_smoothed_loglik(params, kernel, x, {method, 1e-12, 60});
      const double err = std::abs(analytic - ref) / std::max(1.0, std::abs(ref));
      if (err > worst) {
        worst = err;
        worst_case = c;
      }
    }
  }
  return finish("smoothed objective vs quadrature (" + std::to_string(cases) + " cases)", worst, tolerance,
                "worst case " + std::to_string(worst_case));
}

CheckResult check_head_gradients(std::size_t cases, std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t k = 1 + rng.below(12);
    const auto logits = random_logits(rng, k, 1.0, 0.7);
    const double x = rng.uniform();
    const auto theta = flatten(logits);
    SmoothedLossGrad analytic;
    std::vector<double> numeric;
    if (c % 5 == 4) {
      // Point objective: finite differences are valid while x stays inside its bin.
      analytic = unsmoothed_loglik_grad(logits, x);
      numeric = oracle::finite_diff_grad([&](std::span<const double> th) { return unsmoothed_loglik(unflatten(th), x); },
                                         theta, 1e-5);
    } else {
      const auto kernel = random_kernel(rng, -2.5, -0.5);
      analytic = smoothed_loglik_grad(logits, kernel, x);
      numeric = oracle::finite_diff_grad(
          [&](std::span<const double> th) { return smoothed_loglik(unflatten(th), kernel, x); }, theta, 1e-5);
    }
    const auto flat = flatten({analytic.d_phi, analytic.d_psi});
    for (std::size_t i = 0; i < flat.size(); ++i) worst = std::max(worst, std::abs(flat[i] - numeric[i]));
  }
  return finish("head gradient vs finite differences (" + std::to_string(cases) + " cases)", worst, tolerance);
}

CheckResult check_model_gradients(HeadKind kind, std::size_t cases, std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    ModelConfig cfg;
    cfg.dims = 2;
    cfg.bins = 4;
    cfg.fourier.pairs = 1;
    cfg.hidden = {8};
    cfg.head.kind = kind;
    if (kind == HeadKind::fixed_quantile) {
      for (std::size_t t = 0; t < cfg.dims; ++t)
        cfg.head.fixed_widths.push_back(softmax_normalize(random_logits(rng, cfg.bins, 0.0, 0.5).psi));
    }
    ArDensityModel model(cfg, rng.next());
    for (auto& p : model.parameters()) p = 0.6 * rng.normal();

    SampleMatrix batch(3, cfg.dims);
    for (std::size_t r = 0; r < batch.rows(); ++r)
      for (std::size_t t = 0; t < cfg.dims; ++t) batch(r, t) = rng.uniform();
    std::optional<SmoothingKernel> kernel;
    if (c % 4 != 3) kernel = random_kernel(rng, -2.0, -0.7);

    const auto analytic = smoothed_joint_objective(model, batch, kernel, 1);
    const std::vector<double> theta(model.parameters().begin(), model.parameters().end());
    const auto numeric = oracle::finite_diff_grad(
        [&](std::span<const double> th) {
          ArDensityModel probe(cfg, std::vector<double>(th.begin(), th.end()));
          return smoothed_joint_objective(probe, batch, kernel, 1).value;
        },
        theta, 1e-5);
    for (std::size_t i = 0; i < theta.size(); ++i)
      worst = std::max(worst, std::abs(analytic.gradient[i] - numeric[i]));
  }
  return finish("model gradient, " + std::string(to_string(kind)) + " head (" + std::to_string(cases) + " cases)",
                worst, tolerance);
}

CheckResult check_normalization(std::size_t cases, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t k = 1 + rng.below(40);
    const auto params = params_from_logits(random_logits(rng, k, 2.0, 1.5));
    worst = std::max(worst, std::abs(params.cdf(1.0) - 1.0));
    for (std::size_t levels : {2u, 10u, 256u}) {
      double total = 0.0;
      for (std::size_t i = 0; i < levels; ++i) total += std::exp(params.discrete_log_mass(i, levels));
      worst = std::max(worst, std::abs(total - 1.0));
    }
    const auto edges = params.edges();
    double integral = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      integral += oracle::adaptive_simpson([&](double t) { return params.pdf(t); }, edges[i], edges[i + 1], 1e-14, 30);
    worst = std::max(worst, std::abs(integral - 1.0) * 1e-3);  // quadrature budget is 1e-6
  }
  for (auto kind : {KernelKind::uniform, KernelKind::truncated_gaussian}) {
    for (double lambda : {1e-4, 0.05, 0.5}) {
      const SmoothingKernel kernel(kind, lambda);
      for (double center : {0.0, 0.001, 0.5, 0.999}) worst = std::max(worst, std::abs(kernel.cdf(center, 1.0) - 1.0));
    }
  }
  return finish("normalization (cdf, discrete masses, kernels)", worst, 1e-9);
}

CheckResult check_bias_demo(double tolerance) {
  const auto report = oracle::gradient_bias_demo();
  const double err = std::max(report.asymmetric.max_error, report.symmetric.max_error);
  auto r = finish("point-objective gradient bias demo", err, tolerance,
                  "psi difference " + fmt_double(report.asymmetric.difference[0]) + ", " +
                      fmt_double(report.asymmetric.difference[1]));
  r.passed = r.passed && report.tolerance_met;
  return r;
}

CheckResult check_smoothed_data_gradient(std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  double worst = 0.0;
  for (auto kind : {KernelKind::uniform, KernelKind::truncated_gaussian}) {
    const auto logits = random_logits(rng, 6, 0.8, 0.5);
    const SmoothingKernel kernel(kind, 0.05);
    std::vector<double> data(32);
    for (auto& x : data) x = std::clamp(rng.normal(0.4, 0.15), 0.0, 0.999);
    const auto check = oracle::smoothed_data_gradient_check(logits, kernel, data, 1e-5, smoothed_loglik_grad);
    worst = std::max(worst, check.max_abs_error);
  }
  return finish("smoothed-data gradient property (32 points)", worst, tolerance);
}

CheckResult check_small_lambda_limit(std::size_t cases, std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t k = 1 + rng.below(16);
    const auto logits = random_logits(rng, k, 1.0, 0.5);
    const auto params = params_from_logits(logits);
    const auto edges = params.edges();
    const std::size_t bin = rng.below(k);
    const double x = edges[bin] + params.widths()[bin] * rng.uniform(0.25, 0.75);
    for (auto kind : {KernelKind::uniform, KernelKind::truncated_gaussian}) {
      const double v = smoothed_loglik(logits, SmoothingKernel(kind, 1e-6), x);
      worst = std::max(worst, std::abs(v - params.log_pdf(x)));
    }
  }
  return finish("small-lambda limit equals log-density", worst, tolerance);
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(check_normalization(200, seed));
  out.push_back(check_quadrature_agreement(500, seed + 1));
  out.push_back(check_head_gradients(200, seed + 2));
  std::uint64_t s = seed + 3;
  for (auto kind : {HeadKind::adacat, HeadKind::uniform, HeadKind::adaptive_quantile, HeadKind::fixed_quantile})
    out.push_back(check_model_gradients(kind, 10, s++));
  out.push_back(check_small_lambda_limit(100, seed + 10));
  out.push_back(check_bias_demo());
  out.push_back(check_smoothed_data_gradient(seed + 11));
  return out;
}

std::string format_table(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.name.size());
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %-6s  %-10s  %-10s\n", static_cast<int>(width), "check", "status", "error",
                "tolerance");
  os << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-*s  %-6s  %-10s  %-10s", static_cast<int>(width), r.name.c_str(),
                  r.passed ? "PASS" : "FAIL", fmt_double(r.measured).c_str(), fmt_double(r.tolerance).c_str());
    os << line;
    if (!r.detail.empty()) os << "  " << r.detail;
    os << '\n';
  }
  return os.str();
}

}  // namespace adacat::verify
