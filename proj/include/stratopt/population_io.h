#pragma once

#include "stratopt/popgen.h"

#include <json.hpp>

#include <filesystem>

namespace stratopt {

nlohmann::json to_json(const PopulationConfig &config);
PopulationConfig population_config_from_json(const nlohmann::json &j);

/// Columnar unit CSV plus a JSON sidecar with stratum metadata and truth.
void write_population(const Synthesis &synthesis, const std::filesystem::path &csv_path,
                      const std::filesystem::path &json_path);
std::string population_csv(const SyntheticPopulation &population);
Synthesis read_population(const std::filesystem::path &csv_path,
                          const std::filesystem::path &json_path);

} // namespace stratopt
