#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "adacat/checkpoint.hpp"
#include "adacat/experiment.hpp"
#include "adacat/oracle.hpp"
#include "adacat/verify.hpp"
#include "json.hpp"

namespace adacat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAborted = 3;

// Thrown for bad flags or unusable input; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Checkpoint load_checkpoint_or_usage(const fs::path& path) {
  try {
    return load_checkpoint(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

// ---- train ----

struct TrainOptions {
  ExperimentConfig cfg;
  std::string out;
  std::string from_manifest;
};

void add_train(CLI::App& app, TrainOptions& o) {
  auto* cmd = app.add_subcommand("train", "Train a density model and write checkpoint, report and manifest");
  auto& c = o.cfg;
  cmd->add_option("--data", c.data, "synth:mixture1d | synth:twospirals | csv:<path>")->capture_default_str();
  cmd->add_option("--mode", c.mode, "adacat | uniform | adaptive-quantile | fixed-quantile")->capture_default_str();
  cmd->add_option("--bins", c.bins, "Number of bins k")->capture_default_str();
  cmd->add_option("--smoothing", c.smoothing, "none | uniform | gaussian")->capture_default_str();
  cmd->add_option("--lambda", c.lambda, "Smoothing bandwidth")->capture_default_str();
  cmd->add_option("--fourier", c.fourier, "Fourier feature pairs b")->capture_default_str();
  cmd->add_option("--hidden", c.hidden, "Hidden layer sizes")->delimiter(',')->capture_default_str();
  cmd->add_option("--epochs", c.epochs)->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size)->capture_default_str();
  cmd->add_option("--lr", c.lr)->capture_default_str();
  cmd->add_option("--lr-halving", c.lr_halving, "Halve lr every this many epochs (0: never)")->capture_default_str();
  cmd->add_option("--weight-decay", c.weight_decay)->capture_default_str();
  cmd->add_option("--seed", c.seed)->capture_default_str();
  cmd->add_option("--n", c.n, "Synthetic sample count")->capture_default_str();
  cmd->add_option("--noise", c.noise, "Spiral noise sd")->capture_default_str();
  cmd->add_option("--dims", c.csv_dims, "CSV column count (0: infer)")->capture_default_str();
  cmd->add_flag("--header", c.csv_header, "Skip the first CSV line");
  cmd->add_option("--val-fraction", c.validation_fraction)->capture_default_str();
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--from-manifest", o.from_manifest, "Re-run the config stored in a manifest");
}

int cmd_train(TrainOptions o) {
  std::string command = "train";
  if (!o.from_manifest.empty()) {
    const auto manifest = json::parse(read_file(o.from_manifest), nullptr, false);
    if (manifest.is_discarded() || !manifest.contains("config")) throw UsageError("malformed manifest " + o.from_manifest);
    o.cfg = ExperimentConfig::from_json(manifest["config"].dump());
    if (o.out.empty() && manifest.contains("outputs")) o.out = manifest["outputs"].value("directory", "");
    command = "train --from-manifest";
  }
  if (o.out.empty()) throw UsageError("train: --out is required");
  try {
    o.cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const fs::path dir(o.out);
  fs::create_directories(dir);
  const auto checkpoint_path = dir / "checkpoint.json";
  const auto report_path = dir / "report.jsonl";
  const auto manifest_path = dir / "manifest.json";

  json manifest{{"command", command},
                {"config", json::parse(o.cfg.to_json())},
                {"seed", o.cfg.seed},
                {"version", std::string(build_version())},
                {"started", utc_now()},
                {"finished", nullptr},
                {"status", "running"},
                {"outputs",
                 {{"directory", dir.string()},
                  {"checkpoint", checkpoint_path.string()},
                  {"report", report_path.string()},
                  {"manifest", manifest_path.string()}}}};
  write_file(manifest_path, manifest.dump(2) + "\n");

  std::pair<Dataset, Dataset> splits;
  std::size_t clamped = 0;
  try {
    splits = experiment_splits(o.cfg, &clamped);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  auto& [train_set, validation_set] = splits;
  if (clamped > 0) std::fprintf(stderr, "warning: %zu validation values outside the training range were clamped\n", clamped);
  std::fprintf(stderr, "data %s: %zu train, %zu validation, %zu dims\n", o.cfg.data.c_str(), train_set.size(),
               validation_set.size(), train_set.dims());

  ArDensityModel model(experiment_model_config(o.cfg, train_set), o.cfg.seed + 2);
  std::ofstream report_out(report_path);
  if (!report_out) throw std::runtime_error("cannot write " + report_path.string());
  const auto report = train(model, train_set, validation_set, experiment_train_config(o.cfg),
                            [&](const EpochRecord& r) {
                              report_out << epoch_to_json(r) << '\n' << std::flush;
                              std::fprintf(stderr, "epoch %zu  val nll %.5f  min width %.3g  %.2fs\n", r.epoch,
                                           r.val_nll_scaled_nats, r.min_bin_width, r.seconds);
                            });
  save_checkpoint(checkpoint_path, model, train_set.scale, o.cfg.data);

  manifest["finished"] = utc_now();
  manifest["status"] = report.aborted ? "aborted" : "completed";
  if (report.aborted) manifest["abort_reason"] = report.abort_reason;
  write_file(manifest_path, manifest.dump(2) + "\n");
  if (report.aborted) {
    std::fprintf(stderr, "training aborted: %s\n", report.abort_reason.c_str());
    return kExitAborted;
  }
  return kExitOk;
}

// ---- eval ----

struct EvalOptions {
  std::string checkpoint;
  ExperimentConfig data;  ///< only the data fields are used
};

void add_eval(CLI::App& app, EvalOptions& o) {
  auto* cmd = app.add_subcommand("eval", "Print NLL (nats) and bits/dim of a checkpoint on a dataset as JSON");
  cmd->add_option("--checkpoint", o.checkpoint)->required();
  cmd->add_option("--data", o.data.data, "synth:mixture1d | synth:twospirals | csv:<path>")->required();
  cmd->add_option("--n", o.data.n)->capture_default_str();
  cmd->add_option("--noise", o.data.noise)->capture_default_str();
  cmd->add_option("--seed", o.data.seed, "Seed for synthetic data")->capture_default_str();
  cmd->add_option("--dims", o.data.csv_dims)->capture_default_str();
  cmd->add_flag("--header", o.data.csv_header);
}

int cmd_eval(const EvalOptions& o) {
  const auto ckpt = load_checkpoint_or_usage(o.checkpoint);
  const std::size_t m = ckpt.model.dims();
  Dataset ds;
  try {
    if (o.data.data.rfind("csv:", 0) == 0) {
      // Map raw CSV values with the scaling stored alongside the model.
      const auto table = read_csv(o.data.data.substr(4), o.data.csv_dims, o.data.csv_header);
      if (table.values.cols() != m)
        throw UsageError("eval: data has " + std::to_string(table.values.cols()) + " columns, checkpoint expects " +
                         std::to_string(m));
      auto scale = ckpt.scale.empty() ? std::vector<ScaleMeta>(m, ScaleMeta{0.0, 1.0}) : ckpt.scale;
      std::size_t clamped = 0;
      ds = apply_scaling(table.values, scale, o.data.data, &clamped);
      if (clamped > 0) std::fprintf(stderr, "eval: %zu values outside the training range were clamped\n", clamped);
    } else {
      auto cfg = o.data;
      cfg.validate();
      ds = load_experiment_data(cfg);
      if (!ckpt.scale.empty() && ckpt.scale != ds.scale)
        std::fprintf(stderr, "eval: synthetic data scaling differs from the checkpoint's\n");
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (ds.dims() != m)
    throw UsageError("eval: data has " + std::to_string(ds.dims()) + " dims, checkpoint expects " + std::to_string(m));

  const auto ev = evaluate(ckpt.model, ds);
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json out{{"n", ds.size()},
           {"dims", m},
           {"nll_nats", finite_or_null(ev.nll_nats)},
           {"nll_scaled_nats", finite_or_null(ev.nll_scaled_nats)},
           {"bits_per_dim", finite_or_null(ev.bits_per_dim)},
           {"min_bin_width", ev.min_bin_width}};
  if (ev.non_finite_index) out["non_finite_index"] = *ev.non_finite_index;
  std::cout << out.dump() << '\n';
  return kExitOk;
}

// ---- sample ----

struct SampleOptions {
  std::string checkpoint;
  std::size_t n = 1000;
  std::string mode = "uniform";
  std::uint64_t seed = 0;
};

void add_sample(CLI::App& app, SampleOptions& o) {
  auto* cmd = app.add_subcommand("sample", "Write n samples in original units as CSV");
  cmd->add_option("--checkpoint", o.checkpoint)->required();
  cmd->add_option("--n", o.n)->capture_default_str();
  cmd->add_option("--mode", o.mode, "uniform (within bin) | midpoint")
      ->check(CLI::IsMember({"uniform", "midpoint"}))
      ->capture_default_str();
  cmd->add_option("--seed", o.seed)->capture_default_str();
}

int cmd_sample(const SampleOptions& o) {
  const auto ckpt = load_checkpoint_or_usage(o.checkpoint);
  const auto mode = o.mode == "midpoint" ? SampleMode::midpoint : SampleMode::within_bin_uniform;
  Rng rng(o.seed);
  std::string line;
  for (std::size_t i = 0; i < o.n; ++i) {
    const auto x = ckpt.model.sample(rng, mode);
    line.clear();
    for (std::size_t t = 0; t < x.size(); ++t) {
      if (t) line += ',';
      line += fmt(ckpt.scale.empty() ? x[t] : ckpt.scale[t].unscale(x[t]));
    }
    std::cout << line << '\n';
  }
  return kExitOk;
}

// ---- grid ----

struct GridOptions {
  std::string checkpoint;
  std::size_t resolution = 100;
};

void add_grid(CLI::App& app, GridOptions& o) {
  auto* cmd = app.add_subcommand("grid", "Density on a cell-midpoint grid over the unit square or interval, as CSV");
  cmd->add_option("--checkpoint", o.checkpoint)->required();
  cmd->add_option("--resolution", o.resolution, "Cells per dimension")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

int cmd_grid(const GridOptions& o) {
  const auto ckpt = load_checkpoint_or_usage(o.checkpoint);
  const std::size_t m = ckpt.model.dims();
  if (m > 2) throw UsageError("grid: only 1-D and 2-D models are supported, checkpoint has " + std::to_string(m));
  const auto r = static_cast<double>(o.resolution);
  auto mid = [&](std::size_t i) { return (static_cast<double>(i) + 0.5) / r; };
  if (m == 1) {
    std::cout << "x,density\n";
    const auto p = ckpt.model.conditional({});
    for (std::size_t i = 0; i < o.resolution; ++i) std::cout << fmt(mid(i)) << ',' << fmt(p.pdf(mid(i))) << '\n';
    return kExitOk;
  }
  std::cout << "x1,x2,density\n";
  const auto p1 = ckpt.model.conditional({});
  for (std::size_t i = 0; i < o.resolution; ++i) {
    const double x1 = mid(i);
    const double prefix[1] = {x1};
    const auto p2 = ckpt.model.conditional(prefix);
    const double d1 = p1.pdf(x1);
    for (std::size_t j = 0; j < o.resolution; ++j)
      std::cout << fmt(x1) << ',' << fmt(mid(j)) << ',' << fmt(d1 * p2.pdf(mid(j))) << '\n';
  }
  return kExitOk;
}

// ---- verify ----

struct VerifyOptions {
  std::uint64_t seed = 20240601;
  std::string bias_report;
};

void add_verify(CLI::App& app, VerifyOptions& o) {
  auto* cmd = app.add_subcommand("verify", "Check closed forms and gradients against quadrature and finite differences");
  cmd->add_option("--seed", o.seed)->capture_default_str();
  cmd->add_option("--bias-report", o.bias_report, "Also write the gradient-bias demo as JSON to this path");
}

int cmd_verify(const VerifyOptions& o) {
  const auto results = verify::run_all(o.seed);
  std::cout << verify::format_table(results);
  if (!o.bias_report.empty()) write_file(o.bias_report, oracle::gradient_bias_demo().to_json() + "\n");
  bool ok = true;
  for (const auto& r : results) ok = ok && r.passed;
  std::fprintf(stderr, "%s\n", ok ? "all checks passed" : "verification FAILED");
  return ok ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"AdaCat density estimation"};
  app.require_subcommand(1);
  TrainOptions train_opts;
  EvalOptions eval_opts;
  SampleOptions sample_opts;
  GridOptions grid_opts;
  VerifyOptions verify_opts;
  add_train(app, train_opts);
  add_eval(app, eval_opts);
  add_sample(app, sample_opts);
  add_grid(app, grid_opts);
  add_verify(app, verify_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "train") return cmd_train(train_opts);
    if (name == "eval") return cmd_eval(eval_opts);
    if (name == "sample") return cmd_sample(sample_opts);
    if (name == "grid") return cmd_grid(grid_opts);
    if (name == "verify") return cmd_verify(verify_opts);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace adacat::cli
