#include "adacat/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace adacat {

namespace {

// Phi(b) - Phi(a) for the standard normal, evaluated on the tail side that
// avoids cancellation.
double normal_mass(double a, double b) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  if (b <= a) return 0.0;
  if (a >= 0.0) return 0.5 * (std::erfc(a * inv_sqrt2) - std::erfc(b * inv_sqrt2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * inv_sqrt2) - std::erfc(-a * inv_sqrt2));
  return 1.0 - 0.5 * (std::erfc(-a * inv_sqrt2) + std::erfc(b * inv_sqrt2));
}

// Raises entries below `floor` to it and rescales the rest so the total stays
// one; repeats until no rescaled entry falls below the floor. Returns the mask
// of pinned entries and the factor applied to the free ones.
struct FloorResult {
  std::vector<bool> pinned;
  double free_scale = 1.0;
  bool any = false;
};

FloorResult apply_width_floor(std::vector<double>& p, double floor) {
  FloorResult r;
  r.pinned.assign(p.size(), false);
  if (floor <= 0.0) return r;
  const std::vector<double> raw = p;
  for (;;) {
    std::size_t pinned = 0;
    double free_mass = 0.0;
    bool changed = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!r.pinned[i] && raw[i] * r.free_scale < floor) {
        r.pinned[i] = true;
        changed = true;
      }
      if (r.pinned[i]) {
        ++pinned;
      } else {
        free_mass += raw[i];
      }
    }
    if (!changed) break;
    r.any = true;
    const double remaining = 1.0 - static_cast<double>(pinned) * floor;
    if (free_mass <= 0.0 || remaining <= 0.0) throw std::invalid_argument("width floor too large for bin count");
    r.free_scale = remaining / free_mass;
  }
  if (r.any) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r.pinned[i] ? floor : raw[i] * r.free_scale;
  }
  return r;
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void require_logits(const LogitVector& logits) {
  if (logits.phi.empty() || logits.phi.size() != logits.psi.size())
    throw std::invalid_argument("LogitVector: phi and psi must be non-empty and equal in length");
}

// Normalized head of one conditional, with the quantities the objectives and
// their gradients need.
struct Head {
  std::vector<double> h;
  std::vector<double> log_h;
  std::vector<double> w;
  std::vector<double> log_w;
  std::vector<double> edges;    // c_0 .. c_k
  std::vector<double> raw_w;    // softmax(psi) before the width floor
  FloorResult floor;

  std::size_t bins() const { return h.size(); }

  double log_ratio(std::size_t j) const { return log_h[j] - log_w[j]; }

  std::size_t bin_of(double x) const {
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    auto i = static_cast<std::size_t>(it - edges.begin());
    i = i == 0 ? 0 : i - 1;
    return std::min(i, bins() - 1);
  }

  // Chain dL/dw (w treated as free coordinates) through the floor and the softmax.
  std::vector<double> width_grad_to_psi(std::span<const double> d_w) const {
    const auto k = bins();
    std::vector<double> d_raw(k);
    if (!floor.any) {
      for (std::size_t i = 0; i < k; ++i) d_raw[i] = d_w[i];
    } else {
      // Free entries are w_i = raw_i * scale with scale = remaining / sum(free raw).
      double free_total = 0.0;
      double remaining = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        if (floor.pinned[i]) continue;
        free_total += w[i] * d_w[i];
        remaining += w[i];
      }
      for (std::size_t i = 0; i < k; ++i)
        d_raw[i] = floor.pinned[i] ? 0.0 : floor.free_scale * (d_w[i] - free_total / remaining);
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < k; ++i) mean += raw_w[i] * d_raw[i];
    std::vector<double> d_psi(k);
    for (std::size_t i = 0; i < k; ++i) d_psi[i] = raw_w[i] * (d_raw[i] - mean);
    return d_psi;
  }
};

Head make_head(const LogitVector& logits) {
  require_logits(logits);
  const auto k = logits.bins();
  Head head;
  const double lse_phi = log_sum_exp(logits.phi);
  const double lse_psi = log_sum_exp(logits.psi);
  head.h.resize(k);
  head.log_h.resize(k);
  head.raw_w.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    head.log_h[i] = logits.phi[i] - lse_phi;
    head.h[i] = std::exp(head.log_h[i]);
    head.raw_w[i] = std::exp(logits.psi[i] - lse_psi);
  }
  head.w = head.raw_w;
  head.floor = apply_width_floor(head.w, kWidthFloor);
  head.log_w.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    head.log_w[i] = head.floor.any ? std::log(head.w[i]) : logits.psi[i] - lse_psi;
  }
  head.edges.assign(k + 1, 0.0);
  for (std::size_t i = 0; i < k; ++i) head.edges[i + 1] = head.edges[i] + head.w[i];
  head.edges.back() = 1.0;
  return head;
}

void check_target(double x) {
  if (!(x >= 0.0 && x < 1.0)) throw std::domain_error("target outside [0, 1)");
}

}  // namespace

SmoothingKernel::SmoothingKernel(KernelKind kind, double lambda) : kind_(kind), lambda_(lambda) {
  if (!(std::isfinite(lambda) && lambda > 0.0))
    throw std::invalid_argument("SmoothingKernel: lambda must be positive and finite");
}

SmoothingKernel::Support SmoothingKernel::support(double center) const {
  const double half = kind_ == KernelKind::uniform ? 0.5 * lambda_ : kGaussianSupportSigmas * lambda_;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double SmoothingKernel::cdf(double center, double t) const {
  check_target(center);
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  if (kind_ == KernelKind::uniform) {
    const auto [lo, hi] = support(center);
    return std::clamp((t - lo) / (hi - lo), 0.0, 1.0);
  }
  const double a = -center / lambda_;
  const double b = (1.0 - center) / lambda_;
  const double z = (t - center) / lambda_;
  return std::clamp(normal_mass(a, z) / normal_mass(a, b), 0.0, 1.0);
}

double SmoothingKernel::pdf(double center, double t) const {
  check_target(center);
  if (!(t >= 0.0 && t < 1.0)) return 0.0;
  if (kind_ == KernelKind::uniform) {
    const auto [lo, hi] = support(center);
    return (t >= lo && t < hi) ? 1.0 / (hi - lo) : 0.0;
  }
  const double a = -center / lambda_;
  const double b = (1.0 - center) / lambda_;
  const double z = (t - center) / lambda_;
  const double density = std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * lambda_);
  return density / normal_mass(a, b);
}

SimplexVector softmax_normalize(std::span<const double> logits, double floor) {
  if (logits.empty()) throw std::invalid_argument("softmax_normalize: empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    s += p[i];
  }
  for (auto& v : p) v /= s;
  apply_width_floor(p, floor);
  return SimplexVector(std::move(p));
}

AdaCatParams params_from_logits(const LogitVector& logits, double width_floor) {
  require_logits(logits);
  return AdaCatParams(softmax_normalize(logits.psi, width_floor), softmax_normalize(logits.phi), width_floor);
}

namespace {

// Kernel mass per overlapped bin and kernel density at the interior edges.
// Bins first..last overlap the kernel support; mass outside it is folded into
// the first and last bins so the weights sum to exactly one.
struct Overlap {
  std::size_t first = 0;
  std::size_t last = 0;
  std::vector<double> mass;     // mass[j - first]
  std::vector<double> density;  // density at edge c_b for b in (first, last], index b - first - 1
};

Overlap kernel_overlap(const Head& head, const SmoothingKernel& kernel, double x) {
  const auto [lo, hi] = kernel.support(x);
  Overlap ov;
  ov.first = head.bin_of(lo);
  // Last bin whose left edge lies strictly below hi.
  const auto it = std::lower_bound(head.edges.begin(), head.edges.end(), hi);
  auto last = static_cast<std::size_t>(it - head.edges.begin());
  last = last == 0 ? 0 : last - 1;
  ov.last = std::clamp(last, ov.first, head.bins() - 1);

  const std::size_t count = ov.last - ov.first + 1;
  ov.mass.resize(count);
  ov.density.resize(count - 1);
  double prev = 0.0;
  for (std::size_t j = ov.first; j <= ov.last; ++j) {
    const double next = j == ov.last ? 1.0 : kernel.cdf(x, head.edges[j + 1]);
    ov.mass[j - ov.first] = next - prev;
    if (j != ov.last) ov.density[j - ov.first] = kernel.pdf(x, head.edges[j + 1]);
    prev = next;
  }
  return ov;
}

}  // namespace

double smoothed_loglik(const LogitVector& logits, const SmoothingKernel& kernel, double x) {
  check_target(x);
  const Head head = make_head(logits);
  const Overlap ov = kernel_overlap(head, kernel, x);
  double value = 0.0;
  for (std::size_t j = ov.first; j <= ov.last; ++j) value += ov.mass[j - ov.first] * head.log_ratio(j);
  return value;
}

SmoothedLossGrad smoothed_loglik_grad(const LogitVector& logits, const SmoothingKernel& kernel, double x) {
  check_target(x);
  const Head head = make_head(logits);
  const Overlap ov = kernel_overlap(head, kernel, x);
  const auto k = head.bins();

  SmoothedLossGrad out;
  out.d_phi.assign(k, 0.0);
  std::vector<double> d_w(k, 0.0);

  double total = 0.0;
  for (std::size_t j = ov.first; j <= ov.last; ++j) {
    const double m = ov.mass[j - ov.first];
    out.value += m * head.log_ratio(j);
    out.d_phi[j] += m;
    d_w[j] -= m / head.w[j];
    total += m;
  }
  for (std::size_t i = 0; i < k; ++i) out.d_phi[i] -= head.h[i] * total;

  // Edge c_b moves with every w_i, i < b, and shifts mass between bins b-1 and b.
  double suffix = 0.0;
  for (std::size_t b = ov.last; b > ov.first; --b) {
    double jump = head.log_ratio(b - 1) - head.log_ratio(b);
#ifdef ADACAT_INJECT_GRADIENT_FAULT
    jump = -jump;
#endif
    suffix += ov.density[b - ov.first - 1] * jump;
    d_w[b - 1] += suffix;
  }
  // Entries below ov.first see every interior edge.
  for (std::size_t i = 0; i < ov.first; ++i) d_w[i] += suffix;

  out.d_psi = head.width_grad_to_psi(d_w);
  return out;
}

double unsmoothed_loglik(const LogitVector& logits, double x) {
  check_target(x);
  const Head head = make_head(logits);
  return head.log_ratio(head.bin_of(x));
}

SmoothedLossGrad unsmoothed_loglik_grad(const LogitVector& logits, double x) {
  check_target(x);
  const Head head = make_head(logits);
  const auto k = head.bins();
  const auto i = head.bin_of(x);

  SmoothedLossGrad out;
  out.value = head.log_ratio(i);
  out.d_phi.resize(k);
  for (std::size_t j = 0; j < k; ++j) out.d_phi[j] = (j == i ? 1.0 : 0.0) - head.h[j];
  std::vector<double> d_w(k, 0.0);
  d_w[i] = -1.0 / head.w[i];
  out.d_psi = head.width_grad_to_psi(d_w);
  return out;
}

}  // namespace adacat
