#pragma once

#include "stratopt/popgen.h"
#include "stratopt/sampling.h"

#include <cstdint>
#include <string>
#include <vector>

namespace stratopt {

/// Direct estimate for one stratum: the sample mean and the variance of the
/// mean, psi = DEFF (1 - f) S^2 / n.
struct StratumEstimate {
    int stratum{0};
    int domain{1};
    std::int64_t n{0};
    std::int64_t N{0};
    double mean{0.0};
    double s2{0.0};
    double deff{1.0};
    double psi{0.0};
    /// Set when n = 1 or a binary stratum has no variation; s2 is then floored.
    bool degenerate{false};
};

/// Direct estimate for an area (0 = national, 1..D = domains).
struct DirectEstimate {
    int area{0};
    Variable variable{Variable::employed};
    double mean{0.0};
    double total{0.0};
    /// Variance of the estimated total.
    double variance{0.0};
    double cv{0.0};
    std::int64_t n{0};
    bool degenerate{false};
};

struct EstimatorOptions {
    /// Inflate psi by the stratum design effect.
    bool apply_deff{true};
};

/// Per-stratum direct estimates for one variable. Throws if a stratum of the
/// sample is empty.
std::vector<StratumEstimate> stratum_estimates(const Sample &sample, const SyntheticPopulation &population,
                                               Variable variable, const EstimatorOptions &options = {});

/// N_h-weighted domain and national estimates built from stratum estimates.
/// Element a of the result is area a (0 = national).
std::vector<DirectEstimate> area_estimates(std::span<const StratumEstimate> strata, int domains,
                                           Variable variable);

/// Area estimates for every variable, ordered by variable then area.
std::vector<DirectEstimate> direct_estimates(const Sample &sample, const SyntheticPopulation &population,
                                             std::span<const Variable> variables,
                                             const EstimatorOptions &options = {});

/// Row of a CV comparison table.
struct CvTableRow {
    Variable variable{Variable::employed};
    double national_cv{0.0};
    double worst_domain_cv{0.0};
    int worst_domain{0};
    double national_target{0.0};
    double domain_target{0.0};

    [[nodiscard]] bool national_pass() const { return national_cv <= national_target; }
    [[nodiscard]] bool domain_pass() const { return worst_domain_cv <= domain_target; }
};

CvTableRow cv_row(std::span<const DirectEstimate> areas, double national_target, double domain_target);

/// Variable, National CV, Worst-Domain CV, Target columns and pass/fail flags.
std::string cv_table_csv(std::span<const CvTableRow> rows);

} // namespace stratopt
