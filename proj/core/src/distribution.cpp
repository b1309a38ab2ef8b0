#include "adacat/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace adacat {

SimplexVector::SimplexVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("SimplexVector: empty");
  double sum = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("SimplexVector: entries must be finite and non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance)
    throw std::invalid_argument("SimplexVector: entries sum to " + std::to_string(sum) + ", expected 1");
}

SimplexVector SimplexVector::uniform(std::size_t k) {
  if (k == 0) throw std::invalid_argument("SimplexVector::uniform: k must be positive");
  return SimplexVector(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

std::vector<double> prefix_sums(const SimplexVector& widths) {
  std::vector<double> c(widths.size() + 1, 0.0);
  const auto v = widths.values();
  const double k = static_cast<double>(v.size());
  if (std::all_of(v.begin(), v.end(), [&](double w) { return w == v[0]; })) {
    // equal entries: i / k is exact where repeated addition drifts by an ulp or two
    for (std::size_t i = 1; i < c.size(); ++i) c[i] = static_cast<double>(i) / k;
    return c;
  }
  for (std::size_t i = 0; i < widths.size(); ++i) c[i + 1] = c[i] + widths[i];
  c.back() = 1.0;
  return c;
}

AdaCatParams::AdaCatParams(SimplexVector widths, SimplexVector masses, double width_floor)
    : widths_(std::move(widths)), masses_(std::move(masses)) {
  if (widths_.size() != masses_.size())
    throw std::invalid_argument("AdaCatParams: widths and masses differ in length");
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    if (widths_[i] < width_floor)
      throw std::invalid_argument("AdaCatParams: width " + std::to_string(i) + " below floor");
  }
  edges_ = prefix_sums(widths_);
  cumulative_ = prefix_sums(masses_);
}

BinHit AdaCatParams::bin_index(double x) const {
  if (!(x >= 0.0 && x < 1.0)) throw std::domain_error("bin_index: x outside [0, 1)");
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
  auto i = static_cast<std::size_t>(it - edges_.begin()) - 1;
  i = std::min(i, bins() - 1);
  return {i, edges_[i], edges_[i + 1]};
}

double AdaCatParams::pdf(double x) const {
  if (!(x >= 0.0 && x < 1.0)) return 0.0;
  const auto i = bin_index(x).index;
  return masses_[i] / widths_[i];
}

double AdaCatParams::log_pdf(double x) const {
  const auto i = bin_index(x).index;
  if (masses_[i] <= 0.0) return kLogZero;
  return std::log(masses_[i]) - std::log(widths_[i]);
}

double AdaCatParams::cdf(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const auto i = bin_index(t).index;
  const double within = (t - edges_[i]) * (masses_[i] / widths_[i]);
  return std::min(cumulative_[i] + within, cumulative_[i + 1]);
}

double AdaCatParams::icdf(double u) const {
  if (!(u >= 0.0 && u < 1.0)) throw std::domain_error("icdf: u outside [0, 1)");
  // First bin whose upper cumulative mass reaches u.
  const auto it = std::lower_bound(cumulative_.begin() + 1, cumulative_.end(), u);
  auto i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  i = std::min(i, bins() - 1);
  if (masses_[i] <= 0.0) return edges_[i];
  const double x = edges_[i] + (u - cumulative_[i]) * (widths_[i] / masses_[i]);
  const double upper = std::nextafter(1.0, 0.0);
  return std::clamp(x, edges_[i], std::min(edges_[i + 1], upper));
}

double AdaCatParams::sample(double u, SampleMode mode) const {
  if (mode == SampleMode::within_bin_uniform) return icdf(u);
  if (!(u >= 0.0 && u < 1.0)) throw std::domain_error("sample: u outside [0, 1)");
  // Bin j with H_j <= u < H_{j+1}; zero-mass bins have an empty range and are never chosen.
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  auto i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  i = std::min(i, bins() - 1);
  while (masses_[i] <= 0.0 && i > 0) --i;
  return edges_[i] + 0.5 * widths_[i];
}

double AdaCatParams::interval_mass(double a, double b) const {
  a = std::max(a, 0.0);
  b = std::min(b, 1.0);
  if (!(b > a)) return 0.0;
  const std::size_t first = bin_index(a).index;
  double mass = 0.0;
  for (std::size_t i = first; i < bins() && edges_[i] < b; ++i) {
    const double lo = std::max(a, edges_[i]);
    const double hi = std::min(b, edges_[i + 1]);
    if (hi > lo) mass += masses_[i] * ((hi - lo) / widths_[i]);
  }
  return mass;
}

double AdaCatParams::discrete_log_mass(std::size_t i, std::size_t levels) const {
  if (levels == 0 || i >= levels) throw std::domain_error("discrete_log_mass: need 0 <= i < levels");
  const double lo = static_cast<double>(i) / static_cast<double>(levels);
  const double hi = static_cast<double>(i + 1) / static_cast<double>(levels);
  const double mass = interval_mass(lo, hi);
  return mass > 0.0 ? std::log(mass) : kLogZero;
}

AdaCatParams from_uniform_categorical(SimplexVector masses) {
  const auto k = masses.size();
  return AdaCatParams(SimplexVector::uniform(k), std::move(masses));
}

AdaCatParams from_quantiles(SimplexVector widths, double width_floor) {
  const auto k = widths.size();
  return AdaCatParams(std::move(widths), SimplexVector::uniform(k), width_floor);
}

}  // namespace adacat
