// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails. Thresholds are fixed here; fixture constants for the
// training criteria come from seeded pilot runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "adacat/checkpoint.hpp"
#include "adacat/experiment.hpp"
#include "adacat/oracle.hpp"
#include "adacat/verify.hpp"

using namespace adacat;

namespace {

// ---- thresholds ----
constexpr double kQuadratureRelTol = 1e-6;
constexpr double kQuadratureSeconds = 10.0;
constexpr double kGradientAbsTol = 1e-4;
constexpr double kGradientSeconds = 30.0;
constexpr double kDiscreteMassTol = 1e-9;
constexpr double kPdfIntegralTol = 1e-6;
constexpr std::size_t kGridResolution = 200;
constexpr double kCollapsedWidth = 1e-4;    // non-smoothed final min width must fall below this
constexpr double kHealthyWidth = 1e-3;      // smoothed min width must stay above this at every epoch
constexpr double kCollapseSeconds = 300.0;
constexpr double kSpiralMargin = 0.1;
constexpr double kSpiralLow = -1.3;
constexpr double kSpiralHigh = -0.7;
constexpr double kSpiralSeconds = 900.0;
constexpr double kEntropyGap = 0.15;
constexpr double kMixtureMargin = 0.05;
constexpr double kMixtureSeconds = 300.0;
constexpr double kBiasTol = 1e-6;
constexpr double kBiasMinimum = 1e-3;       // the psi discrepancy must be clearly non-zero
constexpr double kSmoothedDataTol = 1e-3;
// fixture constants were chosen on pilot seeds 1-5; acceptance runs on fresh seeds
constexpr std::uint64_t kSeeds[] = {101, 102, 103, 104, 105};

// ---- fixtures ----
ExperimentConfig mixture_fixture(std::uint64_t seed) {
  ExperimentConfig c;
  c.data = "synth:mixture1d";
  c.n = 20000;
  c.bins = 8;
  c.epochs = 400;
  c.batch_size = 256;
  c.lr = 3e-2;
  c.lr_halving = 130;
  c.lambda = 1e-3;
  c.seed = seed;
  return c;
}

ExperimentConfig spiral_fixture(std::uint64_t seed) {
  ExperimentConfig c;
  c.data = "synth:twospirals";
  c.n = 10000;
  c.noise = kSpiralNoise;
  c.bins = 16;
  c.hidden = {64, 64};
  c.fourier = 0;
  c.epochs = 200;
  c.batch_size = 256;
  c.lr = 3e-3;
  c.lr_halving = 67;
  c.smoothing = "uniform";
  c.lambda = 1e-3;
  c.seed = seed;
  return c;
}

// ---- reporting ----
struct Line {
  int id;
  std::string title;
  bool passed;
  std::string detail;
};

std::vector<Line> g_lines;

std::string format_line(const Line& l) {
  char head[32];
  std::snprintf(head, sizeof head, "criterion %2d: %s  ", l.id, l.passed ? "PASS" : "FAIL");
  return head + l.title + " | " + l.detail;
}

void report(int id, std::string title, bool passed, std::string detail) {
  g_lines.push_back({id, std::move(title), passed, std::move(detail)});
  std::fprintf(stderr, "%s\n", format_line(g_lines.back()).c_str());
}

std::string f(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct FinishedRun {
  ExperimentConfig config;
  TrainReport report;
  std::string checkpoint;
  std::optional<double> true_nll;
};

FinishedRun run(const ExperimentConfig& cfg) {
  auto r = run_experiment(cfg);
  std::fprintf(stderr, "  %s mode=%s smoothing=%s seed=%llu: val %.5f, min width %.3g%s\n", cfg.data.c_str(),
               cfg.mode.c_str(), cfg.smoothing.c_str(), static_cast<unsigned long long>(cfg.seed),
               r.report.epochs.back().val_nll_scaled_nats, r.report.epochs.back().min_bin_width,
               r.report.aborted ? " (aborted)" : "");
  return {cfg, r.report, checkpoint_to_json(r.model, r.train_set.scale, cfg.data), r.validation_set.true_nll};
}

// first-seed runs of criteria 5-7, retrained by criterion 10
std::vector<FinishedRun> g_determinism_reference;

double final_nll(const FinishedRun& r) { return r.report.epochs.back().val_nll_scaled_nats; }

// Total variation of a piecewise-constant density over the interior edges.
double density_variation(const AdaCatParams& p) {
  double tv = 0;
  for (std::size_t i = 0; i + 1 < p.bins(); ++i)
    tv += std::abs(p.masses()[i + 1] / p.widths()[i + 1] - p.masses()[i] / p.widths()[i]);
  return tv;
}

// |sum over cell midpoints of density * cell volume - 1| for m = 1 or 2
double grid_sum_error(const ArDensityModel& m, std::size_t resolution) {
  const double r = static_cast<double>(resolution);
  const auto p1 = m.conditional({});
  double sum = 0;
  for (std::size_t i = 0; i < resolution; ++i) {
    const double x1 = (i + 0.5) / r;
    if (m.dims() == 1) {
      sum += p1.pdf(x1) / r;
      continue;
    }
    const auto p2 = m.conditional(std::span<const double>(&x1, 1));
    for (std::size_t j = 0; j < resolution; ++j) sum += p1.pdf(x1) * p2.pdf((j + 0.5) / r) / (r * r);
  }
  return std::abs(sum - 1.0);
}

// ---- criteria ----
void criterion_1() {
  const auto start = std::chrono::steady_clock::now();
  const auto r = verify::check_quadrature_agreement(500, 101, kQuadratureRelTol);
  const double s = seconds_since(start);
  report(1, "closed-form smoothed objective vs both quadrature references (500 cases)",
         r.passed && s < kQuadratureSeconds,
         "max rel err " + f("%.2e", r.measured) + " (tol 1e-6), " + f("%.2f", s) + " s (limit 10 s)");
}

void criterion_2() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<verify::CheckResult> parts;
  parts.push_back(verify::check_head_gradients(200, 202, kGradientAbsTol));
  std::uint64_t seed = 203;
  for (auto kind : {HeadKind::adacat, HeadKind::uniform, HeadKind::adaptive_quantile, HeadKind::fixed_quantile})
    parts.push_back(verify::check_model_gradients(kind, 50, seed++, kGradientAbsTol));
  const double s = seconds_since(start);
  bool ok = s < kGradientSeconds;
  double worst = 0;
  for (const auto& p : parts) {
    ok = ok && p.passed;
    worst = std::max(worst, p.measured);
  }
  report(2, "analytic gradients vs central differences (200 head + 4x50 tiny-model cases)", ok,
         "max abs err " + f("%.2e", worst) + " (tol 1e-4), " + f("%.2f", s) + " s (limit 30 s)");
}

void criterion_3() {
  Rng rng(303);
  double cdf_err = 0, mass_err = 0, pdf_err = 0;
  for (int c = 0; c < 200; ++c) {
    LogitVector l;
    const std::size_t k = 1 + rng.below(40);
    for (std::size_t i = 0; i < k; ++i) {
      l.phi.push_back(2.0 * rng.normal());
      l.psi.push_back(1.5 * rng.normal());
    }
    const auto p = params_from_logits(l);
    cdf_err = std::max(cdf_err, std::abs(p.cdf(1.0) - 1.0));
    for (std::size_t K : {2u, 10u, 256u}) {
      double total = 0;
      for (std::size_t i = 0; i < K; ++i) total += std::exp(p.discrete_log_mass(i, K));
      mass_err = std::max(mass_err, std::abs(total - 1.0));
    }
    const auto e = p.edges();
    double integral = 0;
    for (std::size_t i = 0; i < k; ++i)
      integral += oracle::adaptive_simpson([&](double t) { return p.pdf(t); }, e[i], e[i + 1], 1e-13, 40);
    pdf_err = std::max(pdf_err, std::abs(integral - 1.0));
  }

  // Cell-midpoint Riemann sums of density grids. 2-D grids (trained spiral models and
  // an untrained one) must be within 1/resolution. A 1-D grid of a peaked density can
  // miss by up to TV(p)/resolution, so the trained mixture models are held to that.
  const double res = static_cast<double>(kGridResolution);
  ModelConfig fresh;
  fresh.dims = 2;
  fresh.bins = 16;
  double grid_err = grid_sum_error(ArDensityModel(fresh, 1), kGridResolution);
  double tv_ratio = 0;
  std::size_t grids = 1;
  for (const auto& r : g_determinism_reference) {
    const auto m = checkpoint_from_json(r.checkpoint).model;
    const double err = grid_sum_error(m, kGridResolution);
    ++grids;
    if (m.dims() == 2) {
      grid_err = std::max(grid_err, err);
    } else {
      tv_ratio = std::max(tv_ratio, err / (density_variation(m.conditional({})) / res));
    }
  }
  const bool ok = cdf_err == 0.0 && mass_err <= kDiscreteMassTol && pdf_err <= kPdfIntegralTol && grids == 7 &&
                  grid_err <= 1.0 / res && tv_ratio <= 1.0;
  report(3, "normalization: cdf(1), discrete masses K in {2,10,256}, pdf quadrature, grid sums", ok,
         "cdf err " + f("%.1e", cdf_err) + ", mass err " + f("%.1e", mass_err) + " (tol 1e-9), pdf err " +
             f("%.1e", pdf_err) + " (tol 1e-6), 2-D grid err " + f("%.1e", grid_err) + " (tol 1/" +
             std::to_string(kGridResolution) + "), 1-D grid err / (TV/res) " + f("%.2f", tv_ratio) + " (tol 1), " +
             std::to_string(grids) + " grids");
}

void criterion_4() {
  Rng rng(404);
  bool uniform_exact = true;
  for (int c = 0; c < 20; ++c) {
    ModelConfig mc;
    mc.dims = 3;
    mc.bins = 2 + rng.below(10);
    mc.hidden = {12, 6};
    mc.fourier.pairs = rng.below(3);
    ArDensityModel a(mc, c);
    for (auto& v : a.parameters()) v = rng.normal();
    for (std::size_t t = 0; t < mc.dims; ++t) {
      const auto& last = a.layers(t).back();
      for (std::size_t o = mc.bins; o < 2 * mc.bins; ++o) {
        for (std::size_t i = 0; i < last.in; ++i) a.parameters()[last.weight_offset + o * last.in + i] = 0.0;
        a.parameters()[last.bias_offset + o] = 0.0;
      }
    }
    auto ucfg = mc;
    ucfg.head.kind = HeadKind::uniform;
    ArDensityModel u(ucfg, 0);
    // same network, keeping only the phi rows of each output layer
    for (std::size_t t = 0; t < mc.dims; ++t)
      for (std::size_t l = 0; l < u.layers(t).size(); ++l) {
        const auto& lu = u.layers(t)[l];
        const auto& la = a.layers(t)[l];
        for (std::size_t o = 0; o < lu.out; ++o) {
          for (std::size_t i = 0; i < lu.in; ++i)
            u.parameters()[lu.weight_offset + o * lu.in + i] = a.parameters()[la.weight_offset + o * la.in + i];
          u.parameters()[lu.bias_offset + o] = a.parameters()[la.bias_offset + o];
        }
      }
    for (int s = 0; s < 20; ++s) {
      const double x[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
      uniform_exact = uniform_exact && a.joint_log_likelihood(x) == u.joint_log_likelihood(x);
    }
  }
  bool quantile_exact = true;
  for (int c = 0; c < 200; ++c) {
    const std::size_t k = 1 + rng.below(64);
    std::vector<double> w(k);
    for (auto& v : w) v = rng.uniform(0.01, 1.0);
    const auto p = from_quantiles(softmax_normalize([&] {
      std::vector<double> lw;
      for (double v : w) lw.push_back(std::log(v));
      return lw;
    }()));
    for (std::size_t i = 0; i <= k; ++i)
      quantile_exact = quantile_exact && p.cdf(p.edges()[i]) == static_cast<double>(i) / static_cast<double>(k);
  }
  report(4, "uniform mode == adacat with zeroed width outputs; quantile cdf at edges == i/k", uniform_exact && quantile_exact,
         std::string("uniform reduction ") + (uniform_exact ? "exact" : "NOT exact") + ", quantile edges " +
             (quantile_exact ? "exact" : "NOT exact"));
}

void criterion_5() {
  const auto start = std::chrono::steady_clock::now();
  int good = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    auto smoothed_cfg = mixture_fixture(seed);
    smoothed_cfg.smoothing = "uniform";
    auto point_cfg = smoothed_cfg;
    point_cfg.smoothing = "none";
    const auto sm = run(smoothed_cfg);
    const auto pt = run(point_cfg);
    if (seed == kSeeds[0]) {
      g_determinism_reference.push_back(sm);
      g_determinism_reference.push_back(pt);
    }
    bool ordered = !sm.report.aborted && !pt.report.aborted &&
                   sm.report.epochs.size() == pt.report.epochs.size();
    double sm_min = 1.0;
    for (std::size_t e = 0; ordered && e < sm.report.epochs.size(); ++e) {
      sm_min = std::min(sm_min, sm.report.epochs[e].min_bin_width);
      if (e >= 1) ordered = pt.report.epochs[e].min_bin_width < sm.report.epochs[e].min_bin_width;
    }
    const double pt_final = pt.report.epochs.back().min_bin_width;
    const bool ok = ordered && pt_final < kCollapsedWidth && sm_min > kHealthyWidth && final_nll(sm) < final_nll(pt);
    good += ok;
    detail += "seed " + std::to_string(seed) + ": widths " + f("%.1e", pt_final) + " vs >=" + f("%.1e", sm_min) +
              ", nll " + f("%.3f", final_nll(pt)) + " vs " + f("%.3f", final_nll(sm)) + (ok ? "; " : " [x]; ");
  }
  const double s = seconds_since(start);
  report(5, "bin collapse without smoothing, 5/5 seeds", good == 5 && s < kCollapseSeconds,
         std::to_string(good) + "/5 seeds (" + detail + f("%.0f", s) + " s, limit 300 s)");
}

void criterion_6() {
  const auto start = std::chrono::steady_clock::now();
  int good = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    const auto ada = run(spiral_fixture(seed));
    auto ucfg = spiral_fixture(seed);
    ucfg.mode = "uniform";
    const auto uni = run(ucfg);
    if (seed == kSeeds[0]) {
      g_determinism_reference.push_back(ada);
      g_determinism_reference.push_back(uni);
    }
    const double a = final_nll(ada), u = final_nll(uni);
    const bool ok = a <= u - kSpiralMargin && a >= kSpiralLow && a <= kSpiralHigh;
    good += ok;
    detail += "seed " + std::to_string(seed) + ": " + f("%.3f", a) + " vs " + f("%.3f", u) + (ok ? "; " : " [x]; ");
  }
  const double s = seconds_since(start);
  report(6, "two spirals k=16: adacat <= uniform - 0.1 and in [-1.3, -0.7], 5/5 seeds",
         good == 5 && s < kSpiralSeconds, std::to_string(good) + "/5 seeds (" + detail + f("%.0f", s) + " s, limit 900 s)");
}

void criterion_7() {
  const auto start = std::chrono::steady_clock::now();
  int good = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    auto cfg = mixture_fixture(seed);
    cfg.smoothing = "gaussian";
    const auto ada = run(cfg);
    auto ucfg = cfg;
    ucfg.mode = "uniform";
    const auto uni = run(ucfg);
    if (seed == kSeeds[0]) {
      g_determinism_reference.push_back(ada);
      g_determinism_reference.push_back(uni);
    }
    const double a = final_nll(ada), u = final_nll(uni), h = ada.true_nll.value_or(NAN);
    const bool ok = a <= h + kEntropyGap && a <= u - kMixtureMargin;
    good += ok;
    detail += "seed " + std::to_string(seed) + ": " + f("%.3f", a) + " (entropy " + f("%.3f", h) + ", uniform " +
              f("%.3f", u) + ")" + (ok ? "; " : " [x]; ");
  }
  const double s = seconds_since(start);
  report(7, "two-scale mixture k=8: within 0.15 of entropy and uniform - 0.05, 5/5 seeds",
         good == 5 && s < kMixtureSeconds, std::to_string(good) + "/5 seeds (" + detail + f("%.0f", s) + " s, limit 300 s)");
}

void criterion_8() {
  const auto r = oracle::gradient_bias_demo();
  const auto& d = r.asymmetric.difference;
  const double psi = std::max(std::abs(d[0]), std::abs(d[1]));
  const bool ok = r.tolerance_met && r.asymmetric.max_error <= kBiasTol && psi > kBiasMinimum;
  report(8, "point-objective gradient bias at the asymmetric point", ok,
         "psi discrepancy (" + f("%.6f", d[0]) + ", " + f("%.6f", d[1]) + "), quadrature mismatch " +
             f("%.1e", r.asymmetric.max_error) + " (tol 1e-6)");
}

void criterion_9() {
  const auto r = verify::check_smoothed_data_gradient(909, kSmoothedDataTol);
  report(9, "mean smoothed gradient == gradient of smoothed-data NLL (32 points)", r.passed,
         "max abs err " + f("%.2e", r.measured) + " (tol 1e-3)");
}

void criterion_10() {
  int same = 0;
  std::string detail;
  for (const auto& ref : g_determinism_reference) {
    const auto again = run(ref.config);
    const bool eq = again.checkpoint == ref.checkpoint;
    same += eq;
    detail += ref.config.data.substr(6) + "/" + ref.config.mode + "/" + ref.config.smoothing + (eq ? " identical; " : " DIFFERS; ");
  }
  const bool ok = !g_determinism_reference.empty() && same == static_cast<int>(g_determinism_reference.size());
  report(10, "repeated seeded training runs give bitwise-identical checkpoints", ok,
         std::to_string(same) + "/" + std::to_string(g_determinism_reference.size()) + " (" + detail + ")");
}

}  // namespace

int main() {
  std::printf("build %s, %zu worker thread(s)\n", std::string(build_version()).c_str(), default_thread_count());
  // criterion 3 checks density grids of models trained by 5-7, so it runs after them
  const std::vector<std::pair<int, std::function<void()>>> all = {
      {1, criterion_1}, {2, criterion_2}, {4, criterion_4}, {5, criterion_5},  {6, criterion_6},
      {7, criterion_7}, {3, criterion_3}, {8, criterion_8}, {9, criterion_9}, {10, criterion_10}};
  for (const auto& [id, c] : all) {
    try {
      c();
    } catch (const std::exception& e) {
      report(id, "error", false, e.what());
    }
  }
  std::sort(g_lines.begin(), g_lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  for (const auto& l : g_lines) std::printf("%s\n", format_line(l).c_str());
  const auto passed = std::count_if(g_lines.begin(), g_lines.end(), [](const Line& l) { return l.passed; });
  std::printf("%td/%zu criteria passed\n", passed, g_lines.size());
  return passed == static_cast<std::ptrdiff_t>(g_lines.size()) ? 0 : 1;
}
