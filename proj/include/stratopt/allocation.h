#pragma once

#include "stratopt/popgen.h"
#include "stratopt/sampling.h"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stratopt {

/// CV upper bounds g_{d,k}; area 0 is national, 1..D are domains.
struct PrecisionTargets {
    int domains{0};
    int variables{0};
    std::vector<double> bounds;

    [[nodiscard]] double operator()(int d, int k) const {
        return bounds.at(static_cast<std::size_t>(d * variables + k));
    }
    double &at(int d, int k) { return bounds.at(static_cast<std::size_t>(d * variables + k)); }
    void validate() const;

    /// Same national bound for every variable and same domain bound for every
    /// (domain, variable) pair.
    static PrecisionTargets uniform(int domains, int variables, double national, double domain);
};

/// Inputs to the allocation problems, dense over (area d, variable k, stratum h).
struct VarianceInputs {
    int strata{0};
    int domains{0};
    int variables{0};
    std::vector<std::string> variable_names;
    std::vector<std::int64_t> N;
    std::vector<double> cost;
    std::vector<std::int64_t> n_min;
    /// Domain id (1..D) of each stratum.
    std::vector<int> domain_of;
    /// Anticipated totals Y_{d,k}, index d * K + k.
    std::vector<double> totals;
    /// S^2_{h,d,k} and DEFF_{h,d,k}, index (d * K + k) * H + h.
    std::vector<double> s2;
    std::vector<double> deff;
    /// Cells where a variance floor was applied, for reporting.
    std::vector<std::string> warnings;

    [[nodiscard]] double Y(int d, int k) const { return totals.at(static_cast<std::size_t>(d * variables + k)); }
    [[nodiscard]] double S2(int h, int d, int k) const {
        return s2.at(static_cast<std::size_t>((d * variables + k) * strata + h));
    }
    [[nodiscard]] double DEFF(int h, int d, int k) const {
        return deff.at(static_cast<std::size_t>((d * variables + k) * strata + h));
    }
    double &S2(int h, int d, int k) { return s2.at(static_cast<std::size_t>((d * variables + k) * strata + h)); }
    double &DEFF(int h, int d, int k) {
        return deff.at(static_cast<std::size_t>((d * variables + k) * strata + h));
    }
    /// Allocates zeroed storage for the given dimensions (unit cost, n_min 2).
    void resize(int H, int D, int K);
    void validate() const;
};

struct VarianceInputOptions {
    double unit_cost{1.0};
    std::int64_t n_min{2};
};

/// Builds the allocation problem from baseline stratum summaries. Strata nest
/// in domains: a domain constraint sums only over its own strata, the
/// national constraint over all strata. Binary strata with no observed
/// variation get a variance floor based on p = 0.5 / n.
VarianceInputs build_variance_inputs(const BaselineSummary &baseline, std::span<const Variable> variables,
                                     const PrecisionTargets &targets, const VarianceInputOptions &options = {});

/// Design variance of the estimated total: sum_h DEFF (1 - f_h) N_h^2 S^2 / n_h.
double variance_of_total(std::span<const double> n, const VarianceInputs &inputs, int d, int k);
double variance_of_total(const Allocation &allocation, const VarianceInputs &inputs, int d, int k);
double cv_of(std::span<const double> n, const VarianceInputs &inputs, int d, int k);
double cv_of(const Allocation &allocation, const VarianceInputs &inputs, int d, int k);

/// Single-variable allocation proportional to N_h S_h sqrt(DEFF_h), sized so
/// the national CV equals g before rounding up.
Allocation neyman_allocation(const VarianceInputs &inputs, int k, double g);
/// Continuous Neyman total (before per-stratum rounding).
double neyman_total(const VarianceInputs &inputs, int k, double g);

/// Element-wise maximum of per-variable allocations.
Allocation nso_max_allocation(std::span<const Allocation> allocations);

struct BethelOptions {
    double damping{0.5};
    double exponent{2.0};
    double residual_tolerance{1e-9};
    double multiplier_tolerance{1e-10};
    int max_iterations{10'000};
    /// Iterations between attempts to finish with a Newton step on the
    /// multipliers of the current active set.
    int polish_interval{25};
};

struct ConstraintId {
    int domain{0};
    int variable{0};
};

struct BethelSolution {
    std::vector<double> continuous;
    Allocation rounded;
    int iterations{0};
    double continuous_cost{0.0};
    double rounded_cost{0.0};
    std::vector<ConstraintId> constraints;
    /// Relative slack 1 - var / (g Y)^2 of the rounded allocation.
    std::vector<double> slack;
    /// Relative slack of the continuous optimum.
    std::vector<double> continuous_slack;
    /// Constraints with continuous slack below 1e-6.
    std::vector<int> active;
    /// Lagrange multipliers normalised to sum to one.
    std::vector<double> multipliers;
};

/// Minimum-cost allocation meeting every CV bound, by the normalised
/// multiplier fixed point with an active-set Newton finish, followed by
/// integer rounding (ceil, greedy decrement, repair).
BethelSolution bethel_solve(const VarianceInputs &inputs, const PrecisionTargets &targets,
                            const BethelOptions &options = {});

/// Checks every constraint of an integer allocation by direct CV evaluation.
bool satisfies_all(const Allocation &allocation, const VarianceInputs &inputs,
                   const PrecisionTargets &targets);

/// 1 + (b - 1) rho.
double deff_cluster(double take, double rho);

struct ClusterDesign {
    std::int64_t psus{0};
    double take{1.0};
};

/// Scales the number of PSUs and keeps the within-PSU take, so the cluster
/// design effect is unchanged.
ClusterDesign preserve_deff_reduction(std::int64_t psus, double take, double scale);

} // namespace stratopt
