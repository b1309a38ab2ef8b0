#include "adacat/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "adacat/random.hpp"
#include "json.hpp"

namespace adacat {

namespace {

// Adaptive Simpson on [a, b]; used for the mixture entropy.
double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

double clamp_unit(double v) { return std::clamp(v, 0.0, kBelowOne); }

}  // namespace

double Dataset::log_volume() const {
  double total = 0.0;
  for (const auto& s : scale) total += std::log(s.range);
  return total;
}

void MixtureSpec::validate() const {
  if (components.empty()) throw std::invalid_argument("mixture: no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.stddev > 0.0) || !std::isfinite(c.mean)) throw std::invalid_argument("mixture: stddev must be positive");
    if (!(c.weight >= 0.0)) throw std::invalid_argument("mixture: negative weight");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) throw std::invalid_argument("mixture: weights must sum to 1");
}

double MixtureSpec::density(double x) const {
  double p = 0.0;
  for (const auto& c : components) {
    const double z = (x - c.mean) / c.stddev;
    p += c.weight * std::exp(-0.5 * z * z) / (c.stddev * std::sqrt(2.0 * std::numbers::pi));
  }
  return p;
}

double MixtureSpec::entropy() const {
  validate();
  // Integrate piecewise around each component so narrow modes are resolved.
  std::vector<double> cuts;
  for (const auto& c : components)
    for (double s : {-12.0, -6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0, 12.0}) cuts.push_back(c.mean + s * c.stddev);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  auto integrand = [this](double x) {
    const double p = density(x);
    return p > 0.0 ? -p * std::log(p) : 0.0;
  };
  double h = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) h += integrate(integrand, cuts[i], cuts[i + 1], 1e-13);
  return h;
}

MixtureSpec canonical_mixture() { return MixtureSpec{{{0.5, -1.0, 0.05}, {0.5, 1.0, 0.5}}}; }

Dataset synth_mixture_1d(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("synth_mixture_1d: n must be positive");
  // Span of the means padded by 4 sigma of the widest component.
  double lo = spec.components.front().mean;
  double hi = lo;
  double widest = 0.0;
  for (const auto& c : spec.components) {
    lo = std::min(lo, c.mean);
    hi = std::max(hi, c.mean);
    widest = std::max(widest, c.stddev);
  }
  lo -= 4.0 * widest;
  hi += 4.0 * widest;
  const ScaleMeta meta{lo, hi - lo};

  Rng rng(seed);
  Dataset ds;
  ds.name = "mixture1d";
  ds.samples = SampleMatrix(n, 1);
  ds.scale = {meta};
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    const MixtureComponent* chosen = &spec.components.back();
    for (const auto& c : spec.components) {
      acc += c.weight;
      if (u < acc) {
        chosen = &c;
        break;
      }
    }
    ds.samples(i, 0) = clamp_unit(meta.scale(rng.normal(chosen->mean, chosen->stddev)));
  }
  ds.true_nll = spec.entropy() - std::log(meta.range);
  return ds;
}

Dataset synth_two_spirals(std::size_t n, double noise_sd, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("synth_two_spirals: n must be at least 2");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("synth_two_spirals: negative noise");
  const double turns = 3.0 * std::numbers::pi;
  const double reach = turns + 4.0 * noise_sd;
  const ScaleMeta meta{-reach, 2.0 * reach};

  Rng rng(seed);
  Dataset ds;
  ds.name = "twospirals";
  ds.samples = SampleMatrix(n, 2);
  ds.scale = {meta, meta};
  double angle = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Consecutive rows share an angle, one on each arm.
    if (i % 2 == 0) angle = rng.uniform() * turns;
    const double sign = i % 2 == 0 ? 1.0 : -1.0;
    const double x = sign * angle * std::cos(angle) + noise_sd * rng.normal();
    const double y = sign * angle * std::sin(angle) + noise_sd * rng.normal();
    ds.samples(i, 0) = clamp_unit(meta.scale(x));
    ds.samples(i, 1) = clamp_unit(meta.scale(y));
  }
  return ds;
}

CsvTable read_csv(const std::filesystem::path& path, std::size_t declared_dims, bool skip_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    row.clear();
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      const std::string trimmed = first == std::string::npos ? "" : cell.substr(first, last - first + 1);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(trimmed, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (trimmed.empty() || used != trimmed.size() || !std::isfinite(v))
        throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ", column " +
                                 std::to_string(col) + ": not a number: '" + trimmed + "'");
      row.push_back(v);
    }
    const std::size_t expected = declared_dims != 0 ? declared_dims : table.values.cols();
    if (expected != 0 && row.size() != expected)
      throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                               std::to_string(expected) + " columns, found " + std::to_string(row.size()));
    table.values.append_row(row);
  }
  if (table.values.empty()) throw std::runtime_error(path.string() + ": no data rows");
  return table;
}

std::vector<ScaleMeta> fit_min_max(const SampleMatrix& raw) {
  if (raw.empty()) throw std::invalid_argument("fit_min_max: no rows");
  std::vector<ScaleMeta> meta(raw.cols());
  for (std::size_t c = 0; c < raw.cols(); ++c) {
    double lo = raw(0, c);
    double hi = lo;
    for (std::size_t r = 1; r < raw.rows(); ++r) {
      lo = std::min(lo, raw(r, c));
      hi = std::max(hi, raw(r, c));
    }
    if (!(hi > lo)) throw std::invalid_argument("column " + std::to_string(c + 1) + " is constant");
    meta[c] = {lo, (hi - lo) * (1.0 + 1e-9)};
  }
  return meta;
}

Dataset apply_scaling(const SampleMatrix& raw, std::vector<ScaleMeta> scale, std::string name,
                      std::size_t* clamped) {
  if (scale.size() != raw.cols()) throw std::invalid_argument("apply_scaling: scale/column mismatch");
  Dataset ds;
  ds.name = std::move(name);
  ds.samples = SampleMatrix(raw.rows(), raw.cols());
  std::size_t outside = 0;
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    for (std::size_t c = 0; c < raw.cols(); ++c) {
      const double v = scale[c].scale(raw(r, c));
      if (!(v >= 0.0 && v < 1.0)) ++outside;
      ds.samples(r, c) = clamp_unit(v);
    }
  }
  ds.scale = std::move(scale);
  if (clamped) *clamped = outside;
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, std::size_t declared_dims, bool skip_header) {
  const auto table = read_csv(path, declared_dims, skip_header);
  return apply_scaling(table.values, fit_min_max(table.values), path.stem().string());
}

std::vector<SimplexVector> marginal_quantiles(const Dataset& dataset, std::size_t k) {
  if (k == 0) throw std::invalid_argument("marginal_quantiles: k must be positive");
  const std::size_t n = dataset.size();
  if (n < k) throw std::invalid_argument("marginal_quantiles: need at least k samples");
  std::vector<SimplexVector> out;
  std::vector<double> column(n);
  for (std::size_t t = 0; t < dataset.dims(); ++t) {
    for (std::size_t r = 0; r < n; ++r) column[r] = dataset.samples(r, t);
    std::sort(column.begin(), column.end());
    // Edge i sits between sorted[q - 1] and sorted[q], q = round(i n / k), so
    // bin i holds points q_i .. q_{i+1} - 1.
    std::vector<double> edges(k + 1, 0.0);
    edges[k] = 1.0;
    for (std::size_t i = 1; i < k; ++i) {
      const auto q = static_cast<std::size_t>(
          std::llround(static_cast<double>(i) * static_cast<double>(n) / static_cast<double>(k)));
      const std::size_t idx = std::clamp<std::size_t>(q, 1, n - 1);
      edges[i] = 0.5 * (column[idx - 1] + column[idx]);
    }
    std::vector<double> widths(k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      widths[i] = std::max(edges[i + 1] - edges[i], kWidthFloor);
      total += widths[i];
    }
    for (auto& w : widths) w /= total;
    // Renormalizing can push a floored width a hair below the floor.
    for (auto& w : widths) w = std::max(w, kWidthFloor);
    total = 0.0;
    for (double w : widths) total += w;
    std::size_t widest = static_cast<std::size_t>(std::max_element(widths.begin(), widths.end()) - widths.begin());
    widths[widest] += 1.0 - total;
    out.emplace_back(std::move(widths));
  }
  return out;
}

std::pair<Dataset, Dataset> split_train_validation(const Dataset& dataset, double validation_fraction,
                                                   std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("split: validation fraction must be in [0, 1)");
  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(n)));
  const std::size_t n_train = n - n_val;

  auto take = [&](std::size_t begin, std::size_t end, const char* suffix) {
    Dataset part;
    part.name = dataset.name + suffix;
    part.scale = dataset.scale;
    part.true_nll = dataset.true_nll;
    part.samples = SampleMatrix(end - begin, dataset.dims());
    for (std::size_t i = begin; i < end; ++i) {
      const auto src = dataset.samples.row(order[i]);
      std::copy(src.begin(), src.end(), part.samples.row(i - begin).begin());
    }
    return part;
  };
  return {take(0, n_train, ":train"), take(n_train, n, ":validation")};
}

std::string dataset_to_json(const Dataset& dataset) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["name"] = dataset.name;
  j["dims"] = dataset.dims();
  j["samples"] = std::vector<double>(dataset.samples.data().begin(), dataset.samples.data().end());
  auto& scale = j["scale"] = nlohmann::json::array();
  for (const auto& s : dataset.scale) scale.push_back({{"offset", s.offset}, {"range", s.range}});
  j["true_nll"] = dataset.true_nll ? nlohmann::json(*dataset.true_nll) : nlohmann::json(nullptr);
  return j.dump();
}

Dataset dataset_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Dataset ds;
  ds.name = j.at("name").get<std::string>();
  const auto dims = j.at("dims").get<std::size_t>();
  const auto values = j.at("samples").get<std::vector<double>>();
  if (dims == 0 || values.size() % dims != 0) throw std::runtime_error("dataset snapshot: malformed samples");
  ds.samples = SampleMatrix(values.size() / dims, dims);
  for (std::size_t i = 0; i < values.size(); ++i) ds.samples(i / dims, i % dims) = values[i];
  for (const auto& s : j.at("scale")) ds.scale.push_back({s.at("offset").get<double>(), s.at("range").get<double>()});
  if (ds.scale.size() != dims) throw std::runtime_error("dataset snapshot: scale/dims mismatch");
  if (!j.at("true_nll").is_null()) ds.true_nll = j.at("true_nll").get<double>();
  return ds;
}

}  // namespace adacat
