#include "adacat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace adacat::oracle {

namespace {

struct SimpsonState {
  const std::function<double(double)>& f;
  int max_depth;
};

double simpson_step(SimpsonState& s, double a, double b, double fa, double fm, double fb, double whole, double tol,
                    int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = s.f(lm);
  const double frm = s.f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol || b - a < 1e-15) return left + right + delta / 15.0;
  if (depth >= s.max_depth) throw QuadratureError("adaptive_simpson: max_depth exceeded");
  return simpson_step(s, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
         simpson_step(s, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
}

// Breakpoints in [0, 1] where kernel(. | x) log f(.) may be non-smooth or sharply peaked.
std::vector<double> breakpoints(const AdaCatParams& params, const SmoothingKernel& kernel,
                                std::span<const double> centers) {
  std::vector<double> pts(params.edges().begin(), params.edges().end());
  for (double x : centers) {
    const double lambda = kernel.lambda();
    if (kernel.kind() == KernelKind::uniform) {
      pts.push_back(x - 0.5 * lambda);
      pts.push_back(x + 0.5 * lambda);
    } else {
      for (double s : {-12.0, -8.0, -6.0, -4.0, -3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0})
        pts.push_back(x + s * lambda);
    }
  }
  for (auto& p : pts) p = std::clamp(p, 0.0, 1.0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

// log-density of the bin that owns the open interval (a, b).
double piece_log_density(const AdaCatParams& params, double a, double b) { return params.log_pdf(0.5 * (a + b)); }

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double abs_tol, int max_depth) {
  if (!(b > a)) return 0.0;
  // Stay strictly inside so that jumps at a and b do not leak in.
  const std::function<double(double)> inner = [&](double t) {
    if (t <= a) t = std::nextafter(a, b);
    if (t >= b) t = std::nextafter(b, a);
    return f(t);
  };
  SimpsonState s{inner, max_depth};
  const double fa = inner(a);
  const double fb = inner(b);
  const double fm = inner(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(s, a, b, fa, fm, fb, whole, abs_tol, 0);
}

double quad_smoothed_loglik(const AdaCatParams& params, const SmoothingKernel& kernel, double x,
                            const QuadratureConfig& config) {
  if (!(config.abs_tol > 0.0)) throw std::invalid_argument("quadrature: abs_tol must be positive");
  const double center[] = {x};
  const auto pts = breakpoints(params, kernel, center);
  const double piece_tol = config.abs_tol / static_cast<double>(pts.size());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i];
    const double b = pts[i + 1];
    if (!(b > a)) continue;
    double mass = 0.0;
    if (config.method == QuadratureMethod::bin_split_exact) {
      mass = kernel.cdf(x, b) - kernel.cdf(x, a);
    } else {
      mass = adaptive_simpson([&](double t) { return kernel.pdf(x, t); }, a, b, piece_tol, config.max_depth);
    }
    if (mass == 0.0) continue;
    total += mass * piece_log_density(params, a, b);
  }
  return total;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& objective,
                                     std::span<const double> params, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  std::vector<double> theta(params.begin(), params.end());
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + step;
    const double up = objective(theta);
    theta[i] = saved - step;
    const double down = objective(theta);
    theta[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double sample_kernel(const SmoothingKernel& kernel, double center, Rng& rng) {
  const double lambda = kernel.lambda();
  if (kernel.kind() == KernelKind::uniform) {
    const double lo = std::max(0.0, center - 0.5 * lambda);
    const double hi = std::min(1.0, center + 0.5 * lambda);
    return std::min(rng.uniform(lo, hi), std::nextafter(hi, lo));
  }
  // Rejection from the untruncated Gaussian; at least half its mass lies in [0, 1).
  for (;;) {
    const double t = rng.normal(center, lambda);
    if (t >= 0.0 && t < 1.0) return t;
  }
}

McEstimate mc_smoothed_loglik_estimate(const LogitVector& logits, const SmoothingKernel& kernel, double x,
                                       std::size_t n_draws, std::uint64_t seed) {
  if (n_draws == 0) throw std::invalid_argument("mc_smoothed_loglik: n_draws must be positive");
  Rng rng(seed);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const double v = unsmoothed_loglik(logits, sample_kernel(kernel, x, rng));
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  const double n = static_cast<double>(n_draws);
  const double var = n_draws > 1 ? m2 / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

double mc_smoothed_loglik(const LogitVector& logits, const SmoothingKernel& kernel, double x, std::size_t n_draws,
                          std::uint64_t seed) {
  return mc_smoothed_loglik_estimate(logits, kernel, x, n_draws, seed).mean;
}

namespace {

// theta = (psi_1, psi_2, phi_1, phi_2)
LogitVector two_bin_logits(std::span<const double> theta) { return {{theta[2], theta[3]}, {theta[0], theta[1]}}; }

// Expected NLL under Unif[0, 1) data, integrated bin piece by bin piece.
double expected_nll_uniform_data(std::span<const double> theta) {
  const auto params = params_from_logits(two_bin_logits(theta));
  const auto edges = params.edges();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double log_density = params.log_pdf(0.5 * (edges[i] + edges[i + 1]));
    total += adaptive_simpson([&](double) { return log_density; }, edges[i], edges[i + 1], 1e-15, 30);
  }
  return -total;
}

BiasDemoPoint bias_point(double h1) {
  const std::vector<double> theta = {0.0, 0.0, std::log(h1), std::log(1.0 - h1)};
  BiasDemoPoint pt;
  const auto params = params_from_logits(two_bin_logits(theta));
  pt.widths.assign(params.widths().begin(), params.widths().end());
  pt.masses.assign(params.masses().begin(), params.masses().end());

  pt.true_grad = finite_diff_grad(expected_nll_uniform_data, theta, 1e-5);

  // E_x[grad of -log p(x)] with the bin membership of x fixed per sample.
  pt.mc_expected_grad.assign(4, 0.0);
  const auto logits = two_bin_logits(theta);
  const auto edges = params.edges();
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
      auto integrand = [&](double x) {
        const auto g = unsmoothed_loglik_grad(logits, x);
        return -(c < 2 ? g.d_psi[c] : g.d_phi[c - 2]);
      };
      pt.mc_expected_grad[c] += adaptive_simpson(integrand, edges[i], edges[i + 1], 1e-15, 30);
    }
  }

  pt.difference.resize(4);
  for (std::size_t c = 0; c < 4; ++c) pt.difference[c] = pt.true_grad[c] - pt.mc_expected_grad[c];

  // grad_psi w_i = w_i (e_i - w); grad_phi w_i = 0.
  const auto& w = pt.widths;
  const auto& h = pt.masses;
  auto grad_w = [&](std::size_t i) {
    std::vector<double> g(4, 0.0);
    for (std::size_t j = 0; j < 2; ++j) g[j] = w[i] * ((i == j ? 1.0 : 0.0) - w[j]);
    return g;
  };
  // grad log(h_i / w_i) = grad log h_i - grad log w_i.
  auto grad_log_ratio = [&](std::size_t i) {
    std::vector<double> g(4, 0.0);
    for (std::size_t j = 0; j < 2; ++j) {
      g[j] = -((i == j ? 1.0 : 0.0) - w[j]);
      g[2 + j] = (i == j ? 1.0 : 0.0) - h[j];
    }
    return g;
  };
  pt.symbolic_difference.assign(4, 0.0);
  pt.symbolic_expected.assign(4, 0.0);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto gw = grad_w(i);
    const auto glr = grad_log_ratio(i);
    const double lr = std::log(h[i] / w[i]);
    for (std::size_t c = 0; c < 4; ++c) {
      pt.symbolic_difference[c] -= lr * gw[c];
      pt.symbolic_expected[c] -= w[i] * glr[c];
    }
  }
  for (std::size_t c = 0; c < 4; ++c) {
    pt.max_error = std::max(pt.max_error, std::abs(pt.difference[c] - pt.symbolic_difference[c]));
    pt.max_error = std::max(pt.max_error, std::abs(pt.mc_expected_grad[c] - pt.symbolic_expected[c]));
  }
  return pt;
}

nlohmann::json point_json(const BiasDemoPoint& p) {
  return {{"widths", p.widths},
          {"masses", p.masses},
          {"true_grad", p.true_grad},
          {"mc_expected_grad", p.mc_expected_grad},
          {"difference", p.difference},
          {"symbolic_difference", p.symbolic_difference},
          {"symbolic_expected_grad", p.symbolic_expected},
          {"max_error", p.max_error}};
}

}  // namespace

BiasDemoReport gradient_bias_demo() {
  BiasDemoReport report;
  report.symmetric = bias_point(0.5);
  report.asymmetric = bias_point(0.25);
  const auto& d = report.asymmetric.difference;
  const bool biased = std::abs(d[0]) > 1e-3 && std::abs(d[1]) > 1e-3;
  report.tolerance_met = biased && report.asymmetric.max_error <= report.tolerance &&
                         report.symmetric.max_error <= report.tolerance;
  return report;
}

std::string BiasDemoReport::to_json() const {
  nlohmann::json j;
  j["true_grad"] = asymmetric.true_grad;
  j["mc_expected_grad"] = asymmetric.mc_expected_grad;
  j["difference"] = asymmetric.difference;
  j["tolerance"] = tolerance;
  j["tolerance_met"] = tolerance_met;
  j["gradient_order"] = {"psi_1", "psi_2", "phi_1", "phi_2"};
  j["points"] = {{"symmetric", point_json(symmetric)}, {"asymmetric", point_json(asymmetric)}};
  return j.dump(2);
}

double smoothed_data_expected_loglik(const AdaCatParams& params, const SmoothingKernel& kernel,
                                     std::span<const double> data, double abs_tol) {
  const auto pts = breakpoints(params, kernel, data);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double a = pts[i];
    const double b = pts[i + 1];
    if (!(b > a)) continue;
    auto smoothed_density = [&](double t) {
      double p = 0.0;
      for (double x : data) p += kernel.pdf(x, t);
      return p * inv_n;
    };
    const double mass = adaptive_simpson(smoothed_density, a, b, abs_tol / static_cast<double>(pts.size()), 60);
    if (mass == 0.0) continue;
    total += mass * piece_log_density(params, a, b);
  }
  return total;
}

SmoothedDataCheck smoothed_data_gradient_check(
    const LogitVector& logits, const SmoothingKernel& kernel, std::span<const double> data, double step,
    const std::function<SmoothedLossGrad(const LogitVector&, const SmoothingKernel&, double)>& analytic_grad) {
  if (data.empty()) throw std::invalid_argument("smoothed_data_gradient_check: empty data");
  const auto k = logits.bins();
  SmoothedDataCheck out;
  out.analytic.assign(2 * k, 0.0);
  for (double x : data) {
    const auto g = analytic_grad(logits, kernel, x);
    for (std::size_t i = 0; i < k; ++i) {
      out.analytic[i] += g.d_phi[i];
      out.analytic[k + i] += g.d_psi[i];
    }
  }
  for (auto& v : out.analytic) v /= static_cast<double>(data.size());

  std::vector<double> theta(logits.phi);
  theta.insert(theta.end(), logits.psi.begin(), logits.psi.end());
  auto objective = [&](std::span<const double> th) {
    LogitVector l{{th.begin(), th.begin() + static_cast<std::ptrdiff_t>(k)},
                  {th.begin() + static_cast<std::ptrdiff_t>(k), th.end()}};
    return smoothed_data_expected_loglik(params_from_logits(l), kernel, data);
  };
  out.reference = finite_diff_grad(objective, theta, step);
  for (std::size_t i = 0; i < 2 * k; ++i)
    out.max_abs_error = std::max(out.max_abs_error, std::abs(out.analytic[i] - out.reference[i]));
  return out;
}

}  // namespace adacat::oracle
