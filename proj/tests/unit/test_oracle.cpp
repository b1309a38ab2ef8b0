#include <cmath>

#include "adacat/oracle.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace adacat;

TEST_CASE("finite differences") {
  const auto g = oracle::finite_diff_grad([](std::span<const double> t) { return t[0] * t[0]; }, test::vec({3.0}), 1e-5);
  CHECK_NEAR(g[0], 6.0, 1e-6);
  for (double step : {1e-2, 1e-5, 0.3}) {
    const auto lin = oracle::finite_diff_grad(
        [](std::span<const double> t) { return 2.0 * t[0] - 0.5 * t[1] + 4.0; }, test::vec({1.0, -7.0}), step);
    CHECK_NEAR(lin[0], 2.0, 1e-9);
    CHECK_NEAR(lin[1], -0.5, 1e-9);
  }
}

TEST_CASE("adaptive simpson") {
  CHECK_NEAR(oracle::adaptive_simpson([](double x) { return std::exp(x); }, 0.0, 1.0, 1e-13, 50), std::exp(1.0) - 1.0,
             1e-11);
  // endpoints are never evaluated, so a jump exactly at an endpoint is harmless
  CHECK_NEAR(oracle::adaptive_simpson([](double x) { return x < 1.0 ? 2.0 : 1e9; }, 0.0, 1.0, 1e-13, 50), 2.0, 1e-12);
  CHECK_THROWS_AS(
      oracle::adaptive_simpson([](double x) { return x < 0.3 ? 0.0 : 1.0; }, 0.0, 1.0, 1e-15, 3), oracle::QuadratureError);
}

TEST_CASE("quadrature references") {
  const auto params = params_from_logits({{0.3, -0.2, 1.0}, {0.1, 0.5, -0.4}});
  const auto e = params.edges();
  const double inside = 0.5 * (e[1] + e[2]);
  const double expected = std::log(params.masses()[1]) - std::log(params.widths()[1]);
  for (auto method : {oracle::QuadratureMethod::bin_split_exact, oracle::QuadratureMethod::adaptive_simpson}) {
    SmoothingKernel narrow(KernelKind::uniform, 0.01);
    CHECK_NEAR(oracle::quad_smoothed_loglik(params, narrow, inside, {method, 1e-12, 60}), expected, 1e-10);
    SmoothingKernel tiny(KernelKind::truncated_gaussian, 1e-7);
    CHECK_NEAR(oracle::quad_smoothed_loglik(params, tiny, inside, {method, 1e-12, 60}), params.log_pdf(inside), 1e-8);
  }

  Rng rng(3);
  for (int c = 0; c < 40; ++c) {
    LogitVector l;
    for (int i = 0; i < 6; ++i) {
      l.phi.push_back(rng.normal());
      l.psi.push_back(rng.normal());
    }
    const auto p = params_from_logits(l);
    SmoothingKernel k(c % 2 ? KernelKind::uniform : KernelKind::truncated_gaussian, rng.uniform(0.001, 0.2));
    const double x = rng.uniform();
    const double a = oracle::quad_smoothed_loglik(p, k, x, {oracle::QuadratureMethod::bin_split_exact, 1e-12, 60});
    const double b = oracle::quad_smoothed_loglik(p, k, x, {oracle::QuadratureMethod::adaptive_simpson, 1e-12, 60});
    CHECK_NEAR(a, b, 10 * 1e-12 * std::max(1.0, std::abs(a)) + 1e-11);
  }
}

TEST_CASE("monte carlo smoothing") {
  LogitVector l{{0.2, -0.5, 0.9, 0.0}, {0.3, -0.1, 0.4, 0.0}};
  SmoothingKernel k(KernelKind::truncated_gaussian, 0.08);
  const double x = 0.37;
  const auto est = oracle::mc_smoothed_loglik_estimate(l, k, x, 1000000, 42);
  CHECK(std::abs(est.mean - smoothed_loglik(l, k, x)) <= 3.0 * est.std_error);
  CHECK(oracle::mc_smoothed_loglik(l, k, x, 1000, 7) == oracle::mc_smoothed_loglik(l, k, x, 1000, 7));

  SmoothingKernel u(KernelKind::uniform, 0.2);
  const auto eu = oracle::mc_smoothed_loglik_estimate(l, u, 0.05, 1000000, 43);
  CHECK(std::abs(eu.mean - smoothed_loglik(l, u, 0.05)) <= 3.0 * eu.std_error);

  const auto p = params_from_logits(l);
  const auto e = p.edges();
  const double inside = 0.5 * (e[1] + e[2]);
  CHECK_NEAR(oracle::mc_smoothed_loglik(l, SmoothingKernel(KernelKind::uniform, 1e-9), inside, 100, 1), p.log_pdf(inside), 1e-14);
}

TEST_CASE("gradient bias demonstration") {
  const auto report = oracle::gradient_bias_demo();
  CHECK(report.tolerance_met);
  // symmetric point: the expected sample gradient in psi is -(w1 grad log(h1/w1) + w2 grad log(h2/w2))
  for (std::size_t i = 0; i < 4; ++i)
    CHECK_NEAR(report.symmetric.mc_expected_grad[i], report.symmetric.symbolic_expected[i], 1e-9);
  // asymmetric point: psi discrepancy of (log 3 / 4) * (1, -1) in NLL-gradient terms
  const auto& d = report.asymmetric.difference;
  CHECK_NEAR(std::abs(d[0]), 0.27465307216702742285, 1e-6);
  CHECK_NEAR(d[0], -d[1], 1e-9);
  CHECK_NEAR(d[2], 0.0, 1e-6);
  CHECK_NEAR(d[3], 0.0, 1e-6);
  const auto j = nlohmann::json::parse(report.to_json());
  for (const char* key : {"true_grad", "mc_expected_grad", "difference", "tolerance_met"}) CHECK(j.contains(key));
}

TEST_CASE("smoothed-data gradient property") {
  LogitVector l{{0.1, 0.7, -0.3, 0.2, 0.0}, {0.4, -0.2, 0.1, 0.3, -0.5}};
  std::vector<double> data;
  Rng rng(9);
  for (int i = 0; i < 32; ++i) data.push_back(std::clamp(rng.normal(0.45, 0.2), 0.0, 0.999));
  for (auto kind : {KernelKind::uniform, KernelKind::truncated_gaussian}) {
    const auto check =
        oracle::smoothed_data_gradient_check(l, SmoothingKernel(kind, 0.04), data, 1e-5, smoothed_loglik_grad);
    CHECK(check.max_abs_error <= 1e-3);
  }
  // the point-objective gradient does not satisfy it
  const auto biased = oracle::smoothed_data_gradient_check(
      l, SmoothingKernel(KernelKind::uniform, 0.04), data, 1e-5,
      [](const LogitVector& lv, const SmoothingKernel&, double x) { return unsmoothed_loglik_grad(lv, x); });
  CHECK(biased.max_abs_error > 1e-2);
}
