#pragma once

#include "stratopt/allocation.h"
#include "stratopt/popgen.h"
#include "stratopt/reduction.h"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace stratopt {

/// Thresholds checked by the report stage.
struct AcceptanceChecks {
    double min_alpha{0.5};
    double min_cv_pass_rate{0.90};
    double max_abs_national_bias{0.02};
};

/// Every setting of an end-to-end run.
struct RunConfig {
    RunConfig();

    PopulationConfig population{PopulationConfig::desk_scale()};
    double baseline_fraction{0.05};
    double national_target{0.03};
    double domain_target{0.08};
    VarianceInputOptions variance{};
    BethelOptions bethel{};
    ReductionSettings reduction{};
    /// "truth" (simulation truth) or "baseline" (direct baseline estimates).
    std::string truth_proxy{"truth"};
    int mc_replications{100};
    int mc_parallelism{0};
    AcceptanceChecks checks{};
    std::filesystem::path output{"run"};
    std::uint64_t seed{20240601};

    /// Applies the global seed to the population and the reduction search.
    void set_seed(std::uint64_t value);
    [[nodiscard]] PrecisionTargets targets() const;
    void validate() const;
};

/// Reads a TOML run configuration. Keys that are absent keep their defaults;
/// unknown keys are rejected.
RunConfig load_run_config(const std::filesystem::path &path);
RunConfig run_config_from_json(const nlohmann::json &j, const std::filesystem::path &base_dir = {});
nlohmann::json to_json(const RunConfig &config);
/// Converts TOML text to the equivalent JSON document.
nlohmann::json toml_to_json(std::string_view toml_text, const std::string &source = "config");

} // namespace stratopt
