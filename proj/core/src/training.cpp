#include "adacat/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace adacat {

void adam_step(std::span<double> params, std::span<const double> objective_grad, AdamState& state,
               const AdamConfig& config, double lr) {
  if (params.size() != objective_grad.size() || state.first.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  for (double g : objective_grad)
    if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = -objective_grad[i];  // descend on the negated objective
    state.first[i] = config.beta1 * state.first[i] + (1.0 - config.beta1) * g;
    state.second[i] = config.beta2 * state.second[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.first[i] / c1;
    const double v_hat = state.second[i] / c2;
    params[i] -= lr * (m_hat / (std::sqrt(v_hat) + config.eps) + config.weight_decay * params[i]);
  }
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw std::invalid_argument("train: Adam betas must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw std::invalid_argument("train: Adam eps must be positive");
  if (!(adam.weight_decay >= 0.0)) throw std::invalid_argument("train: weight decay must be non-negative");
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be at least 1");
}

double TrainConfig::lr_at(std::size_t epoch) const {
  if (lr_halving_period == 0 || epoch == 0) return lr;
  return lr * std::ldexp(1.0, -static_cast<int>((epoch - 1) / lr_halving_period));
}

Evaluation evaluate(const ArDensityModel& model, const Dataset& dataset) {
  if (dataset.dims() != model.dims()) throw std::invalid_argument("evaluate: dataset/model dimension mismatch");
  if (dataset.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  Evaluation ev;
  double total = 0.0;
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const auto x = dataset.samples.row(r);
    double ll = 0.0;
    for (std::size_t t = 0; t < model.dims(); ++t) {
      const LogitVector logits = model.conditional_logits(x.first(t));
      ll += unsmoothed_loglik(logits, x[t]);
      const auto w = softmax_normalize(logits.psi, kWidthFloor);
      for (double v : w.values()) ev.min_bin_width = std::min(ev.min_bin_width, v);
    }
    if (!std::isfinite(ll) && !ev.non_finite_index) ev.non_finite_index = r;
    total += ll;
  }
  const auto n = static_cast<double>(dataset.size());
  if (ev.non_finite_index) {
    ev.nll_scaled_nats = std::numeric_limits<double>::infinity();
  } else {
    ev.nll_scaled_nats = -total / n;
  }
  ev.nll_nats = ev.nll_scaled_nats + dataset.log_volume();
  ev.bits_per_dim = ev.nll_scaled_nats / (static_cast<double>(model.dims()) * std::numbers::ln2);
  return ev;
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

EpochRecord make_record(std::size_t epoch, std::optional<double> objective, const Evaluation& ev, double seconds) {
  EpochRecord rec;
  rec.epoch = epoch;
  rec.objective_nats = objective;
  rec.val_nll_nats = ev.nll_nats;
  rec.val_nll_scaled_nats = ev.nll_scaled_nats;
  rec.val_bits_per_dim = ev.bits_per_dim;
  rec.min_bin_width = ev.min_bin_width;
  rec.seconds = seconds;
  return rec;
}

}  // namespace

std::string epoch_to_json(const EpochRecord& record) {
  nlohmann::json j;
  j["epoch"] = record.epoch;
  j["objective_nats"] = record.objective_nats ? finite_or_null(*record.objective_nats) : nlohmann::json(nullptr);
  j["val_nll_nats"] = finite_or_null(record.val_nll_nats);
  j["val_nll_scaled_nats"] = finite_or_null(record.val_nll_scaled_nats);
  j["val_bits_per_dim"] = finite_or_null(record.val_bits_per_dim);
  j["min_bin_width"] = record.min_bin_width;
  j["seconds"] = record.seconds;
  return j.dump();
}

std::string report_to_jsonl(const TrainReport& report) {
  std::string out;
  for (const auto& rec : report.epochs) {
    out += epoch_to_json(rec);
    out += '\n';
  }
  return out;
}

TrainReport train(ArDensityModel& model, const Dataset& train_set, const Dataset& validation_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.dims() != model.dims() || validation_set.dims() != model.dims())
    throw std::invalid_argument("train: dataset/model dimension mismatch");
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };

  TrainReport report;
  auto record = [&](EpochRecord rec) {
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  };
  record(make_record(0, std::nullopt, evaluate(model, validation_set), elapsed()));

  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  AdamState adam(model.parameters().size());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.lr_at(epoch);
    rng.shuffle(order.begin(), order.end());
    double objective_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + begin,
                                               std::min(config.batch_size, order.size() - begin));
      try {
        const auto result =
            smoothed_joint_objective(model, train_set.samples, batch, config.smoothing, config.threads);
        if (!std::isfinite(result.value)) throw std::runtime_error("non-finite objective");
        adam_step(model.parameters(), result.gradient, adam, config.adam, lr);
        objective_sum += result.value * static_cast<double>(batch.size());
      } catch (const std::runtime_error& e) {
        report.aborted = true;
        report.abort_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
        return report;
      }
    }
    const double objective = objective_sum / static_cast<double>(order.size());
    record(make_record(epoch, objective, evaluate(model, validation_set), elapsed()));
  }
  return report;
}

}  // namespace adacat
