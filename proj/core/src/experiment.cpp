#include "adacat/experiment.hpp"

#include <filesystem>
#include <stdexcept>

#include "json.hpp"

namespace adacat {

using nlohmann::json;

std::string_view build_version() { return ADACAT_GIT_DESCRIBE; }

namespace {

std::optional<SmoothingKernel> parse_smoothing(const std::string& name, double lambda) {
  if (name == "none") return std::nullopt;
  if (name == "uniform") return SmoothingKernel(KernelKind::uniform, lambda);
  if (name == "gaussian") return SmoothingKernel(KernelKind::truncated_gaussian, lambda);
  throw std::invalid_argument("smoothing: expected none, uniform or gaussian, got '" + name + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (data != "synth:mixture1d" && data != "synth:twospirals" && data.rfind("csv:", 0) != 0)
    throw std::invalid_argument("data: expected synth:mixture1d, synth:twospirals or csv:<path>, got '" + data + "'");
  if (data.rfind("synth:", 0) == 0 && n < 2) throw std::invalid_argument("n: need at least 2 samples");
  if (!(noise >= 0.0)) throw std::invalid_argument("noise: must be >= 0");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("validation fraction: must lie in (0, 1)");
  parse_head_kind(mode);
  if (bins == 0) throw std::invalid_argument("bins: must be >= 1");
  if (fourier > kMaxFourierPairs)
    throw std::invalid_argument("fourier: at most " + std::to_string(kMaxFourierPairs) + " pairs");
  for (auto h : hidden)
    if (h == 0) throw std::invalid_argument("hidden: layer sizes must be >= 1");
  if (smoothing != "none" && !(lambda > 0.0)) throw std::invalid_argument("lambda: must be > 0");
  parse_smoothing(smoothing, smoothing == "none" ? 1.0 : lambda);
  experiment_train_config(*this).validate();
}

std::string ExperimentConfig::to_json() const {
  json j{{"data", data},
         {"n", n},
         {"noise", noise},
         {"csv_dims", csv_dims},
         {"csv_header", csv_header},
         {"validation_fraction", validation_fraction},
         {"mode", mode},
         {"bins", bins},
         {"fourier", fourier},
         {"hidden", hidden},
         {"smoothing", smoothing},
         {"lambda", lambda},
         {"epochs", epochs},
         {"batch_size", batch_size},
         {"lr", lr},
         {"lr_halving", lr_halving},
         {"weight_decay", weight_decay},
         {"seed", seed}};
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  ExperimentConfig c;
  try {
    const auto j = json::parse(text);
    // Missing keys keep their defaults; present keys must have the right type.
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("data", c.data);
    get("n", c.n);
    get("noise", c.noise);
    get("csv_dims", c.csv_dims);
    get("csv_header", c.csv_header);
    get("validation_fraction", c.validation_fraction);
    get("mode", c.mode);
    get("bins", c.bins);
    get("fourier", c.fourier);
    get("hidden", c.hidden);
    get("smoothing", c.smoothing);
    get("lambda", c.lambda);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("lr", c.lr);
    get("lr_halving", c.lr_halving);
    get("weight_decay", c.weight_decay);
    get("seed", c.seed);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("experiment config: ") + e.what());
  }
  return c;
}

Dataset load_experiment_data(const ExperimentConfig& cfg) {
  if (cfg.data == "synth:mixture1d") return synth_mixture_1d(canonical_mixture(), cfg.n, cfg.seed);
  if (cfg.data == "synth:twospirals") return synth_two_spirals(cfg.n, cfg.noise, cfg.seed);
  if (cfg.data.rfind("csv:", 0) == 0) return load_csv(cfg.data.substr(4), cfg.csv_dims, cfg.csv_header);
  throw std::invalid_argument("data: unknown source '" + cfg.data + "'");
}

std::pair<Dataset, Dataset> experiment_splits(const ExperimentConfig& cfg, std::size_t* clamped_validation) {
  if (clamped_validation) *clamped_validation = 0;
  if (cfg.data.rfind("csv:", 0) != 0)
    return split_train_validation(load_experiment_data(cfg), cfg.validation_fraction, cfg.seed + 1);

  // CSV: split raw rows first so the min-max map only sees training rows.
  const std::filesystem::path path = cfg.data.substr(4);
  Dataset raw;
  raw.name = path.stem().string();
  raw.samples = read_csv(path, cfg.csv_dims, cfg.csv_header).values;
  auto [train_raw, validation_raw] = split_train_validation(raw, cfg.validation_fraction, cfg.seed + 1);
  if (train_raw.size() < 2) throw std::invalid_argument("csv: need at least 2 training rows");
  const auto scale = fit_min_max(train_raw.samples);
  auto train_set = apply_scaling(train_raw.samples, scale, train_raw.name);
  auto validation_set = apply_scaling(validation_raw.samples, scale, validation_raw.name, clamped_validation);
  return {std::move(train_set), std::move(validation_set)};
}

ModelConfig experiment_model_config(const ExperimentConfig& cfg, const Dataset& train_set) {
  ModelConfig m;
  m.dims = train_set.dims();
  m.bins = cfg.bins;
  m.fourier.pairs = cfg.fourier;
  m.hidden = cfg.hidden;
  m.head.kind = parse_head_kind(cfg.mode);
  if (m.head.kind == HeadKind::fixed_quantile) m.head.fixed_widths = marginal_quantiles(train_set, cfg.bins);
  m.validate();
  return m;
}

TrainConfig experiment_train_config(const ExperimentConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.epochs;
  t.batch_size = cfg.batch_size;
  t.lr = cfg.lr;
  t.lr_halving_period = cfg.lr_halving;
  t.adam.weight_decay = cfg.weight_decay;
  t.smoothing = parse_smoothing(cfg.smoothing, cfg.smoothing == "none" ? 1.0 : cfg.lambda);
  t.seed = cfg.seed;
  return t;
}

ExperimentRun run_experiment(const ExperimentConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  auto [train_set, validation_set] = experiment_splits(cfg);
  ArDensityModel model(experiment_model_config(cfg, train_set), cfg.seed + 2);
  auto report = train(model, train_set, validation_set, experiment_train_config(cfg), on_epoch);
  return {std::move(train_set), std::move(validation_set), std::move(model), std::move(report)};
}

}  // namespace adacat
