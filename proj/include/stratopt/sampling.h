#pragma once

#include "stratopt/popgen.h"
#include "stratopt/rng.h"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stratopt {

enum class AllocationKind { baseline, neyman, nso_max, bethel, hb_reduced, custom };

struct Provenance {
    AllocationKind kind{AllocationKind::custom};
    /// Variable index for Neyman allocations, -1 otherwise.
    int variable{-1};
    /// Reduction fraction for HB-reduced allocations.
    double alpha{0.0};

    [[nodiscard]] std::string to_string() const;
};

/// Per-stratum sample sizes n_h.
struct Allocation {
    std::vector<std::int64_t> sizes;
    Provenance provenance{};

    [[nodiscard]] std::int64_t total() const noexcept;
    [[nodiscard]] std::size_t strata() const noexcept { return sizes.size(); }
    /// Throws if any n_h is negative or exceeds the stratum size.
    void validate(std::span<const std::int64_t> stratum_sizes) const;
};

std::vector<std::int64_t> stratum_sizes(const SyntheticPopulation &population);

struct StratumSample {
    /// Population unit ids, ordered by ascending selection key.
    std::vector<std::int64_t> units;
    std::vector<double> keys;
};

/// A stratified sample: selected unit ids grouped by stratum.
struct Sample {
    std::vector<StratumSample> strata;
    Allocation allocation;
    std::string lineage;
    /// Strata whose reduced size was floored at one unit.
    std::vector<int> floored_strata;

    [[nodiscard]] std::int64_t total() const noexcept;
};

/// n_h = max{2, round(fraction N_h)} clamped to N_h.
Allocation baseline_allocation(const SyntheticPopulation &population, double fraction);

/// Stratified SRSWOR: each unit receives a uniform key from its stratum
/// stream and the n_h smallest keys are selected.
Sample draw_stratified(const SyntheticPopulation &population, const Allocation &allocation,
                       RandomStream stream, std::string lineage = {});

/// round(n (1 - n/N) / deff), floored at 1.
std::int64_t effective_sample_size(std::int64_t n, std::int64_t N, double deff);

/// Keeps round(fraction n*_h) master units per stratum (at least one). Using
/// the same stream for a decreasing ladder of fractions yields nested samples.
Sample nested_subsample(const Sample &master, double fraction, RandomStream stream);

struct StratumSummary {
    std::int64_t n{0};
    std::int64_t N{0};
    std::int64_t n_eff{1};
    double deff{1.0};
    int domain{1};
    std::array<double, kNumVariables> mean{};
    std::array<double, kNumVariables> sd{};
    PerVariableCovariates<double> covariate_means{};
};

struct BaselineSummary {
    std::vector<StratumSummary> strata;
    int domains{0};
};

BaselineSummary summarize_baseline(const Sample &sample, const SyntheticPopulation &population);

/// CSV manifest (stratum, unit_id, key) for external audit of nesting.
std::string sample_manifest_csv(const Sample &sample);
/// Rebuilds a sample from its manifest; rows keep their file order per stratum.
Sample read_sample_manifest(const std::string &path, int strata);
std::string baseline_summary_csv(const BaselineSummary &summary);
BaselineSummary read_baseline_summary_csv(const std::string &path);

} // namespace stratopt
