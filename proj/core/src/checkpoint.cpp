#include "adacat/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace adacat {

using nlohmann::json;

std::string checkpoint_to_json(const ArDensityModel& model, const std::vector<ScaleMeta>& scale,
                               const std::string& dataset) {
  const auto& cfg = model.config();
  json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["dims"] = cfg.dims;
  j["bins"] = cfg.bins;
  j["head_mode"] = std::string(to_string(cfg.head.kind));
  j["fourier_pairs"] = cfg.fourier.pairs;
  j["hidden"] = cfg.hidden;
  if (!cfg.head.fixed_widths.empty()) {
    auto& fw = j["fixed_widths"] = json::array();
    for (const auto& w : cfg.head.fixed_widths) fw.push_back(std::vector<double>(w.values().begin(), w.values().end()));
  }
  if (!scale.empty()) {
    auto& s = j["scale"] = json::array();
    for (const auto& m : scale) s.push_back({{"offset", m.offset}, {"range", m.range}});
  }
  if (!dataset.empty()) j["dataset"] = dataset;
  auto& nets = j["parameters"] = json::array();
  const auto params = model.parameters();
  for (std::size_t t = 0; t < model.dims(); ++t) {
    const auto [begin, end] = model.net_range(t);
    nets.push_back(std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(begin),
                                       params.begin() + static_cast<std::ptrdiff_t>(end)));
  }
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  try {
    const int version = j.at("schema_version").get<int>();
    if (version > kCheckpointSchemaVersion)
      throw std::runtime_error("checkpoint: unsupported schema_version " + std::to_string(version));
    ModelConfig cfg;
    cfg.dims = j.at("dims").get<std::size_t>();
    cfg.bins = j.at("bins").get<std::size_t>();
    cfg.head.kind = parse_head_kind(j.at("head_mode").get<std::string>());
    cfg.fourier.pairs = j.at("fourier_pairs").get<std::size_t>();
    cfg.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.contains("fixed_widths"))
      for (const auto& w : j["fixed_widths"]) cfg.head.fixed_widths.emplace_back(w.get<std::vector<double>>());

    std::vector<double> params;
    for (const auto& net : j.at("parameters")) {
      const auto v = net.get<std::vector<double>>();
      params.insert(params.end(), v.begin(), v.end());
    }
    std::vector<ScaleMeta> scale;
    if (j.contains("scale"))
      for (const auto& s : j["scale"]) scale.push_back({s.at("offset").get<double>(), s.at("range").get<double>()});
    if (!scale.empty() && scale.size() != cfg.dims) throw std::runtime_error("checkpoint: scale/dims mismatch");
    std::string dataset = j.value("dataset", std::string{});
    return Checkpoint{ArDensityModel(std::move(cfg), std::move(params)), std::move(scale), std::move(dataset)};
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ArDensityModel& model,
                     const std::vector<ScaleMeta>& scale, const std::string& dataset) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(model, scale, dataset) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_json(buffer.str());
}

}  // namespace adacat
