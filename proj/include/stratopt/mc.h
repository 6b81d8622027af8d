#pragma once

#include "stratopt/reduction.h"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace stratopt {

struct MCConfig {
    int replications{100};
    /// Master (Bethel) allocation redrawn in every replication.
    Allocation master;
    double alpha{0.0};
    std::vector<Variable> variables{kAllVariables.begin(), kAllVariables.end()};
    std::array<PriorSetting, kNumVariables> priors{};
    ModelSettings model{};
    PrecisionTargets targets{};
    double rhat_limit{1.05};
    std::uint64_t base_seed{1};
    /// Worker threads; 0 lets the scheduler decide.
    int parallelism{0};

    void validate() const;
};

struct AreaRecord {
    int area{0};
    bool covered{false};
    double estimate{0.0};
    double are{0.0};
    double cv{0.0};
};

struct VariableRecord {
    Variable variable{Variable::employed};
    bool converged{false};
    double rhat_max{0.0};
    bool cv_pass{false};
    double national_bias{0.0};
    std::vector<AreaRecord> areas;
    std::string failure;
};

struct ReplicationRecord {
    int replication{0};
    std::int64_t master_size{0};
    std::int64_t subsample_size{0};
    std::vector<VariableRecord> variables;
};

/// One replication: fresh master draw, nested subsample, one fit per variable.
ReplicationRecord run_replication(int b, const MCConfig &config, const SyntheticPopulation &population,
                                  const TruthProxy &truth);

std::vector<ReplicationRecord> run_mc(const MCConfig &config, const SyntheticPopulation &population,
                                      const TruthProxy &truth);

struct VariableMCSummary {
    Variable variable{Variable::employed};
    int usable{0};
    int failures{0};
    double failure_rate{0.0};
    /// Coverage rate per area (index 0 national).
    std::vector<double> coverage;
    double mean_coverage{0.0};
    /// SD across replications of the per-replication share of covered areas.
    double coverage_share_sd{0.0};
    /// SD of the pooled coverage indicator, sqrt(c (1 - c)).
    double coverage_indicator_sd{0.0};
    double mean_national_bias{0.0};
    double mean_mare{0.0};
    double mean_max_are{0.0};
    double cv_pass_rate{0.0};
};

struct MCResult {
    int replications{0};
    int domains{0};
    std::vector<VariableMCSummary> variables;

    [[nodiscard]] const VariableMCSummary &of(Variable v) const;
};

/// Deterministic fold over replication records; failed fits are counted in
/// the failure rate and excluded from every other summary.
MCResult aggregate(std::span<const ReplicationRecord> records, int domains);

/// replication, variable, area, covered, estimate, ARE, cv, cv_pass, rhat_max, converged
std::string mc_raw_csv(std::span<const ReplicationRecord> records);
std::vector<ReplicationRecord> read_mc_raw_csv(const std::string &path);
std::string mc_summary_csv(const MCResult &result);

} // namespace stratopt
