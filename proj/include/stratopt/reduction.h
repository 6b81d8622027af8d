#pragma once

#include "stratopt/allocation.h"
#include "stratopt/estimators.h"
#include "stratopt/hb.h"
#include "stratopt/popgen.h"
#include "stratopt/sampling.h"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace stratopt {

struct GateThresholds {
    /// CV bounds indexed by (area, index_of(variable)).
    PrecisionTargets targets;
    double rhat_limit{1.05};
    double national_are{0.05};
    double domain_mare{0.15};
    double domain_max_are{0.50};

    void validate() const;
};

/// Reference area means (index 0 national) for the accuracy gates: either
/// the population truth or direct estimates from an earlier sample.
struct TruthProxy {
    std::array<std::vector<double>, kNumVariables> area_means;

    [[nodiscard]] double at(Variable v, int area) const {
        return area_means[static_cast<std::size_t>(index_of(v))].at(static_cast<std::size_t>(area));
    }
    static TruthProxy from_truth(const TruthRegistry &truth);
    static TruthProxy from_direct(std::span<const DirectEstimate> estimates, int domains);
};

struct PriorSetting {
    double nu{5.0};
    double s2{0.1};
};

struct ModelSettings {
    int chains{3};
    int iterations{2000};
    int burn_in{1000};
    double tau2_beta{1e6};
    /// Inflate the Fay-Herriot sampling variances by the stratum design effect.
    bool deff_in_psi{true};
};

Family family_for(Variable v) noexcept;

/// Intercept plus the two stratum covariate means of the variable, centred.
Eigen::MatrixXd covariate_matrix(const SyntheticPopulation &population, Variable v);

HBSpec make_spec(const SyntheticPopulation &population, Variable v, const PriorSetting &prior,
                 const ModelSettings &model, std::uint64_t seed);

AreaData make_area_data(const Sample &sample, const SyntheticPopulation &population, Variable v,
                        bool deff_in_psi = true);

/// Moment estimate of the between-stratum variance of the linking model
/// (logit scale for binary variables), floored at 5% of the mean sampling
/// variance. Used to centre the prior scale grid.
double between_variance_estimate(const AreaData &data, const Eigen::MatrixXd &z, Family family);

/// Posterior accuracy and precision against the proxy, for every area.
struct AreaMetrics {
    std::vector<double> estimate;
    std::vector<double> cv;
    std::vector<double> are;
    std::vector<bool> covered;
    double national_bias{0.0};
    double mare{0.0};
    double max_are{0.0};
    int coverage{0};
    double worst_cv_margin{0.0};
    double worst_cv{0.0};
    int worst_cv_area{0};
    bool cv_pass{true};
};

AreaMetrics area_metrics(const PosteriorSummary &summary, const TruthProxy &proxy, Variable v,
                         const PrecisionTargets &targets);

struct GateReport {
    Variable variable{Variable::employed};
    double alpha{0.0};
    std::int64_t sample_size{0};
    bool cv_pass{false};
    double worst_cv{0.0};
    int worst_cv_area{0};
    bool convergence_pass{false};
    double rhat_max{0.0};
    bool national_pass{false};
    double national_are{0.0};
    bool domain_pass{false};
    double mare{0.0};
    double max_are{0.0};
    int coverage{0};
    double national_bias{0.0};
    bool eligible{false};
    std::string failure;
    AreaMetrics metrics;
};

/// Applies the four gates to a fitted posterior.
GateReport gate_report(Variable v, double alpha, std::int64_t sample_size, const PosteriorSummary &summary,
                       const TruthProxy &proxy, const GateThresholds &thresholds);

/// Draws the nested subsample at fraction 1 - alpha, fits the variable's
/// model and applies the gates. Fit failures fail the convergence gate.
GateReport evaluate_gates(Variable v, double alpha, const Sample &master, const SyntheticPopulation &population,
                          const TruthProxy &proxy, const PriorSetting &prior, const ModelSettings &model,
                          const GateThresholds &thresholds, RandomStream subsample_stream, std::uint64_t fit_seed);

struct AlphaSearch {
    Variable variable{Variable::employed};
    std::vector<GateReport> reports;
    double alpha_star{0.0};
    bool non_monotone{false};
    bool none_eligible{false};
    std::vector<std::string> warnings;
};

/// Evaluates every grid point and returns the largest eligible one.
AlphaSearch alpha_star_search(Variable v, std::span<const double> grid,
                              const std::function<GateReport(double)> &evaluate);

struct MinimaxResult {
    double alpha{0.0};
    std::int64_t n_hb{0};
};

MinimaxResult minimax_combine(std::span<const double> alphas, std::int64_t n_star);

struct PriorCandidate {
    PriorSetting prior;
    int coverage{0};
    double national_bias{0.0};
    double mare{0.0};
    double max_are{0.0};
    double rhat_max{0.0};
    std::string failure;
};

struct PriorGridResult {
    Variable variable{Variable::employed};
    std::vector<PriorCandidate> candidates;
    std::size_t selected{0};
    bool fallback{false};
    std::string warning;

    [[nodiscard]] const PriorCandidate &best() const { return candidates.at(selected); }
};

/// Among candidates covering at least ceil(0.95 areas), the smallest domain
/// MARE (ties: smaller max ARE, then smaller nu). Falls back to the best
/// coverage when none qualifies.
PriorGridResult select_prior(std::vector<PriorCandidate> candidates, int areas);

PriorGridResult prior_grid_search(Variable v, std::span<const double> nu_grid, std::span<const double> s2_grid,
                                  int areas, const std::function<PriorCandidate(const PriorSetting &)> &evaluate);

/// centre * 10^(-half_width + i * step) for i = 0..points-1.
std::vector<double> log_spaced_grid(double centre, int points, double half_width);

std::vector<double> default_alpha_grid();

struct ReductionSettings {
    std::vector<double> alpha_grid{default_alpha_grid()};
    std::vector<double> nu_grid{2.0, 3.0, 5.0, 10.0, 20.0};
    int s2_points{7};
    double s2_log10_half_width{1.5};
    double default_nu{5.0};
    ModelSettings model{};
    GateThresholds thresholds{};
    std::uint64_t seed{1};
    std::vector<Variable> variables{kAllVariables.begin(), kAllVariables.end()};
};

struct VariableReduction {
    Variable variable{Variable::employed};
    double s2_centre{0.0};
    AlphaSearch initial;
    PriorGridResult priors;
    AlphaSearch final;
};

struct ReductionResult {
    std::vector<VariableReduction> variables;
    double initial_alpha{0.0};
    double alpha_star{0.0};
    std::int64_t n_star{0};
    std::int64_t n_hb{0};
    /// Gate reports at the combined alpha, one per variable.
    std::vector<GateReport> recheck;
    bool recheck_pass{false};
    std::vector<std::string> warnings;

    [[nodiscard]] const VariableReduction &of(Variable v) const;
    [[nodiscard]] PriorSetting prior(Variable v) const { return of(v).priors.best().prior; }
};

/// Full search: per-variable alpha search with the default prior, prior
/// calibration at the minimax fraction, a second alpha search with the
/// calibrated priors, and a mandatory re-check at the combined fraction that
/// steps down the grid until every variable passes.
ReductionResult run_reduction(const Sample &master, const Sample &baseline, const SyntheticPopulation &population,
                              const TruthProxy &proxy, const ReductionSettings &settings);

std::string gate_reports_csv(std::span<const GateReport> reports);
std::string prior_grid_csv(std::span<const PriorGridResult> grids);
std::string reduction_json(const ReductionResult &result);

} // namespace stratopt
