#pragma once

// Versioned JSON checkpoint:
//   {schema_version, dims, bins, head_mode, fourier_pairs, hidden,
//    fixed_widths?, scale?, dataset?, parameters: [[net 0], [net 1], ...]}
// Doubles are written in shortest round-trip form, so save/load is exact.

#include <filesystem>
#include <string>
#include <vector>

#include "adacat/armodel.hpp"
#include "adacat/datasets.hpp"

namespace adacat {

inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
  ArDensityModel model;
  std::vector<ScaleMeta> scale;  ///< empty means unit scaling
  std::string dataset;
};

std::string checkpoint_to_json(const ArDensityModel& model, const std::vector<ScaleMeta>& scale = {},
                               const std::string& dataset = {});
/// Throws std::runtime_error on malformed documents or a newer schema_version.
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const ArDensityModel& model,
                     const std::vector<ScaleMeta>& scale = {}, const std::string& dataset = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace adacat
