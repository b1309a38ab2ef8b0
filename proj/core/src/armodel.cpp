#include "adacat/armodel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

namespace adacat {

std::vector<double> fourier_features(double x, std::size_t pairs) {
  std::vector<double> out;
  out.reserve(1 + 2 * pairs);
  append_fourier_features(x, pairs, out);
  return out;
}

void append_fourier_features(double x, std::size_t pairs, std::vector<double>& out) {
  out.push_back(x);
  double freq = 1.0;
  for (std::size_t j = 0; j < pairs; ++j) {
    out.push_back(std::sin(freq * x));
    out.push_back(std::cos(freq * x));
    freq *= 2.0;
  }
}

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::adacat: return "adacat";
    case HeadKind::uniform: return "uniform";
    case HeadKind::adaptive_quantile: return "adaptive-quantile";
    case HeadKind::fixed_quantile: return "fixed-quantile";
  }
  return "unknown";
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "adacat") return HeadKind::adacat;
  if (name == "uniform") return HeadKind::uniform;
  if (name == "adaptive-quantile") return HeadKind::adaptive_quantile;
  if (name == "fixed-quantile") return HeadKind::fixed_quantile;
  throw std::invalid_argument("unknown head mode '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (dims == 0) throw std::invalid_argument("model: dims must be positive");
  if (bins == 0) throw std::invalid_argument("model: bins must be positive");
  if (fourier.pairs > kMaxFourierPairs) throw std::invalid_argument("model: at most 32 Fourier pairs");
  if (hidden.empty()) throw std::invalid_argument("model: at least one hidden layer required");
  if (std::find(hidden.begin(), hidden.end(), std::size_t{0}) != hidden.end())
    throw std::invalid_argument("model: hidden layer widths must be positive");
  const bool fixed = head.kind == HeadKind::fixed_quantile;
  if (fixed != !head.fixed_widths.empty())
    throw std::invalid_argument("model: fixed widths must be given exactly for the fixed-quantile head");
  if (fixed) {
    if (head.fixed_widths.size() != dims) throw std::invalid_argument("model: need one fixed width vector per dimension");
    for (const auto& w : head.fixed_widths) {
      if (w.size() != bins) throw std::invalid_argument("model: fixed width vector length must equal bins");
      for (double v : w.values())
        if (v < kWidthFloor) throw std::invalid_argument("model: fixed width below floor");
    }
  }
}

std::size_t ModelConfig::head_outputs() const { return head.kind == HeadKind::adacat ? 2 * bins : bins; }

std::size_t ModelConfig::input_size(std::size_t t) const { return t * (1 + 2 * fourier.pairs); }

NonFiniteLoss::NonFiniteLoss(std::size_t row, std::size_t dim, double value)
    : std::runtime_error("non-finite loss " + std::to_string(value) + " at sample " + std::to_string(row) +
                         ", dimension " + std::to_string(dim)),
      row_(row),
      dim_(dim) {}

void ArDensityModel::build_layout() {
  config_.validate();
  layers_.assign(config_.dims, {});
  std::size_t offset = 0;
  auto add = [&](std::vector<LayerLayout>& net, std::size_t in, std::size_t out) {
    net.push_back({in, out, offset, offset + in * out});
    offset += in * out + out;
  };
  for (std::size_t t = 0; t < config_.dims; ++t) {
    const std::size_t in = config_.input_size(t);
    if (in == 0) {
      add(layers_[t], 0, config_.head_outputs());
      continue;
    }
    std::size_t prev = in;
    for (std::size_t width : config_.hidden) {
      add(layers_[t], prev, width);
      prev = width;
    }
    add(layers_[t], prev, config_.head_outputs());
  }
  params_.assign(offset, 0.0);

  fixed_log_widths_.clear();
  for (const auto& w : config_.head.fixed_widths) {
    std::vector<double> lw(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) lw[i] = std::log(w[i]);
    fixed_log_widths_.push_back(std::move(lw));
  }
}

ArDensityModel::ArDensityModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  build_layout();
  Rng rng(seed);
  for (const auto& net : layers_) {
    for (std::size_t l = 0; l + 1 < net.size(); ++l) {
      const auto& layer = net[l];
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
      for (std::size_t i = 0; i < layer.in * layer.out; ++i)
        params_[layer.weight_offset + i] = rng.uniform(-limit, limit);
    }
  }
}

ArDensityModel::ArDensityModel(ModelConfig config, std::vector<double> parameters) : config_(std::move(config)) {
  build_layout();
  if (parameters.size() != params_.size())
    throw std::invalid_argument("model: expected " + std::to_string(params_.size()) + " parameters, got " +
                                std::to_string(parameters.size()));
  params_ = std::move(parameters);
}

std::pair<std::size_t, std::size_t> ArDensityModel::net_range(std::size_t t) const {
  const auto& net = layers_.at(t);
  return {net.front().weight_offset, net.back().bias_offset + net.back().out};
}

void ArDensityModel::forward(std::size_t t, std::span<const double> prefix, Trace& trace) const {
  if (t >= dims() || prefix.size() < t) throw std::invalid_argument("forward: dimension mismatch");
  const auto& net = layers_[t];
  trace.activations.resize(net.size());
  trace.pre_activations.resize(net.size());

  auto& input = trace.activations[0];
  input.clear();
  for (std::size_t s = 0; s < t; ++s) append_fourier_features(prefix[s], config_.fourier.pairs, input);

  for (std::size_t l = 0; l < net.size(); ++l) {
    const auto& layer = net[l];
    const auto& a = trace.activations[l];
    auto& z = trace.pre_activations[l];
    z.assign(params_.begin() + static_cast<std::ptrdiff_t>(layer.bias_offset),
             params_.begin() + static_cast<std::ptrdiff_t>(layer.bias_offset + layer.out));
    const double* w = params_.data() + layer.weight_offset;
    for (std::size_t o = 0; o < layer.out; ++o) {
      double acc = 0.0;
      const double* row = w + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * a[i];
      z[o] += acc;
    }
    if (l + 1 < net.size()) {
      auto& next = trace.activations[l + 1];
      next.resize(layer.out);
      for (std::size_t o = 0; o < layer.out; ++o) next[o] = z[o] > 0.0 ? z[o] : 0.0;
    }
  }
  trace.output = trace.pre_activations.back();
}

void ArDensityModel::backward(std::size_t t, const Trace& trace, std::span<const double> d_output,
                              std::span<double> gradient) const {
  const auto& net = layers_[t];
  std::vector<double> delta(d_output.begin(), d_output.end());
  std::vector<double> prev_delta;
  for (std::size_t l = net.size(); l-- > 0;) {
    const auto& layer = net[l];
    const auto& a = trace.activations[l];
    const double* w = params_.data() + layer.weight_offset;
    double* gw = gradient.data() + layer.weight_offset;
    double* gb = gradient.data() + layer.bias_offset;
    for (std::size_t o = 0; o < layer.out; ++o) {
      gb[o] += delta[o];
      if (delta[o] == 0.0) continue;
      double* grow = gw + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) grow[i] += delta[o] * a[i];
    }
    if (l == 0) break;
    prev_delta.assign(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      if (delta[o] == 0.0) continue;
      const double* row = w + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) prev_delta[i] += row[i] * delta[o];
    }
    const auto& z = trace.pre_activations[l - 1];
    for (std::size_t i = 0; i < layer.in; ++i)
      if (z[i] <= 0.0) prev_delta[i] = 0.0;
    delta.swap(prev_delta);
  }
}

LogitVector ArDensityModel::head_logits(std::size_t t, std::span<const double> output) const {
  const auto k = bins();
  LogitVector logits;
  switch (config_.head.kind) {
    case HeadKind::adacat:
      logits.phi.assign(output.begin(), output.begin() + static_cast<std::ptrdiff_t>(k));
      logits.psi.assign(output.begin() + static_cast<std::ptrdiff_t>(k), output.end());
      break;
    case HeadKind::uniform:
      logits.phi.assign(output.begin(), output.end());
      logits.psi.assign(k, 0.0);
      break;
    case HeadKind::adaptive_quantile:
      logits.phi.assign(k, 0.0);
      logits.psi.assign(output.begin(), output.end());
      break;
    case HeadKind::fixed_quantile:
      logits.phi.assign(output.begin(), output.end());
      logits.psi = fixed_log_widths_[t];
      break;
  }
  return logits;
}

std::vector<double> ArDensityModel::head_output_grad(const SmoothedLossGrad& grad) const {
  switch (config_.head.kind) {
    case HeadKind::adacat: {
      std::vector<double> out = grad.d_phi;
      out.insert(out.end(), grad.d_psi.begin(), grad.d_psi.end());
      return out;
    }
    case HeadKind::uniform:
    case HeadKind::fixed_quantile: return grad.d_phi;
    case HeadKind::adaptive_quantile: return grad.d_psi;
  }
  return {};
}

LogitVector ArDensityModel::conditional_logits(std::span<const double> prefix) const {
  const auto t = prefix.size();
  if (t >= dims()) throw std::invalid_argument("conditional_logits: prefix longer than dims - 1");
  Trace trace;
  forward(t, prefix, trace);
  return head_logits(t, trace.output);
}

AdaCatParams ArDensityModel::conditional(std::span<const double> prefix) const {
  return params_from_logits(conditional_logits(prefix));
}

double ArDensityModel::joint_log_likelihood(std::span<const double> x) const {
  if (x.size() != dims()) throw std::invalid_argument("joint_log_likelihood: dimension mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < dims(); ++t) total += unsmoothed_loglik(conditional_logits(x.first(t)), x[t]);
  return total;
}

std::vector<double> ArDensityModel::sample(Rng& rng, SampleMode mode) const {
  std::vector<double> x;
  x.reserve(dims());
  for (std::size_t t = 0; t < dims(); ++t) x.push_back(conditional(x).sample(rng.uniform(), mode));
  return x;
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("ADACAT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

constexpr std::size_t kChunkRows = 16;

struct ChunkResult {
  double value = 0.0;
  std::vector<double> gradient;
};

void run_chunk(const ArDensityModel& model, const SampleMatrix& data, std::span<const std::size_t> rows,
               const std::optional<SmoothingKernel>& kernel, ChunkResult& out) {
  out.value = 0.0;
  out.gradient.assign(model.parameters().size(), 0.0);
  ArDensityModel::Trace trace;
  for (std::size_t r : rows) {
    const auto x = data.row(r);
    for (std::size_t t = 0; t < model.dims(); ++t) {
      model.forward(t, x, trace);
      const LogitVector logits = model.head_logits(t, trace.output);
      const SmoothedLossGrad g =
          kernel ? smoothed_loglik_grad(logits, *kernel, x[t]) : unsmoothed_loglik_grad(logits, x[t]);
      if (!std::isfinite(g.value)) throw NonFiniteLoss(r, t, g.value);
      out.value += g.value;
      model.backward(t, trace, model.head_output_grad(g), out.gradient);
    }
  }
}

}  // namespace

ObjectiveResult smoothed_joint_objective(const ArDensityModel& model, const SampleMatrix& data,
                                         std::span<const std::size_t> rows,
                                         const std::optional<SmoothingKernel>& kernel, std::size_t threads) {
  if (rows.empty()) throw std::invalid_argument("objective: empty batch");
  if (data.cols() != model.dims()) throw std::invalid_argument("objective: data dimension mismatch");

  const std::size_t chunks = (rows.size() + kChunkRows - 1) / kChunkRows;
  std::vector<ChunkResult> results(chunks);
  auto chunk_rows = [&](std::size_t c) {
    const std::size_t begin = c * kChunkRows;
    return rows.subspan(begin, std::min(kChunkRows, rows.size() - begin));
  };

  if (threads == 0) threads = default_thread_count();
  threads = std::min(threads, chunks);
  if (threads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(model, data, chunk_rows(c), kernel, results[c]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(chunks);
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&] {
        for (std::size_t c = next++; c < chunks; c = next++) {
          try {
            run_chunk(model, data, chunk_rows(c), kernel, results[c]);
          } catch (...) {
            errors[c] = std::current_exception();
          }
        }
      });
    }
    for (auto& w : workers) w.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  ObjectiveResult out;
  out.gradient.assign(model.parameters().size(), 0.0);
  for (const auto& r : results) {
    out.value += r.value;
    for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] += r.gradient[i];
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  out.value *= inv_n;
  for (auto& g : out.gradient) g *= inv_n;
  return out;
}

ObjectiveResult smoothed_joint_objective(const ArDensityModel& model, const SampleMatrix& data,
                                         const std::optional<SmoothingKernel>& kernel, std::size_t threads) {
  std::vector<std::size_t> rows(data.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return smoothed_joint_objective(model, data, rows, kernel, threads);
}

}  // namespace adacat
