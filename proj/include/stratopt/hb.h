#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stratopt {

enum class Family { binomial_logit, gaussian_area };

std::string_view family_name(Family family) noexcept;

/// Model and sampler settings for one hierarchical Bayes fit.
struct HBSpec {
    Family family{Family::binomial_logit};
    /// H x p stratum covariates; the first column is normally the intercept.
    Eigen::MatrixXd z;
    double tau2_beta{1e6};
    /// Scaled inverse chi-square prior on the random-effect variance.
    double nu{5.0};
    double s2{0.1};
    /// Holds the random-effect variance fixed; zero removes the random effect.
    std::optional<double> fixed_sigma2;
    int chains{3};
    /// Retained draws per chain.
    int iterations{2000};
    int burn_in{1000};
    std::uint64_t seed{1};

    void validate() const;
};

/// Stratum data: successes and trials for the binomial family, direct means
/// and known sampling variances for the Gaussian family.
struct AreaData {
    std::vector<double> y;
    std::vector<double> trials;
    std::vector<double> theta_hat;
    std::vector<double> psi;
    /// Aggregation weights (N_h).
    std::vector<double> weights;
    /// Domain id 1..domains of each stratum.
    std::vector<int> domain;
    int domains{0};

    [[nodiscard]] int strata() const noexcept { return static_cast<int>(weights.size()); }
    void validate(Family family) const;
};

struct ChainDraws {
    /// draws x p
    Eigen::MatrixXd beta;
    std::vector<double> sigma2;
    /// draws x H
    Eigen::MatrixXd v;
    /// draws x H: p_h or theta_h
    Eigen::MatrixXd mean;
    /// Mean Metropolis acceptance over the random effects and the regression
    /// coefficients (binomial family; 1 for Gibbs updates).
    double acceptance_v{1.0};
    double acceptance_beta{1.0};
};

struct PosteriorDraws {
    Family family{Family::binomial_logit};
    std::vector<ChainDraws> chains;

    [[nodiscard]] int draws_per_chain() const {
        return chains.empty() ? 0 : static_cast<int>(chains.front().sigma2.size());
    }
};

struct AreaSummary {
    double mean{0.0};
    double sd{0.0};
    double cv{0.0};
    double lower{0.0};
    double upper{0.0};
};

struct RhatEntry {
    std::string parameter;
    double value{1.0};
    bool divergent{false};
};

struct PosteriorSummary {
    std::vector<AreaSummary> strata;
    /// Index 0 is national, 1..D are domains.
    std::vector<AreaSummary> areas;
    std::vector<RhatEntry> rhat;
    double rhat_max{1.0};
    double acceptance_min{1.0};
    /// Acceptance below 0.05 somewhere (possible separation).
    bool low_acceptance{false};
};

struct HBFit {
    PosteriorDraws draws;
    PosteriorSummary summary;
};

HBFit fit_binomial_logit(const HBSpec &spec, const AreaData &data);
HBFit fit_fay_herriot(const HBSpec &spec, const AreaData &data);
/// Dispatches on spec.family.
HBFit fit_hb(const HBSpec &spec, const AreaData &data);

struct RhatResult {
    double value{1.0};
    bool divergent{false};
};

/// Potential scale reduction factor over equal-length chains.
RhatResult gelman_rubin(std::span<const std::vector<double>> chains);

/// Per-draw N_h-weighted domain and national means: draws x (D + 1), column
/// 0 national.
Eigen::MatrixXd aggregate_domains(const Eigen::MatrixXd &stratum_draws, std::span<const double> weights,
                                  std::span<const int> domain, int domains);

/// Summary of pooled draws: mean, population SD, SD / mean, 2.5 and 97.5
/// percentiles.
AreaSummary summarize_draws(std::span<const double> pooled);

/// Posterior SD over posterior mean of an area aggregate.
double hb_cv(const PosteriorSummary &summary, int area);

PosteriorSummary summarize_posterior(const PosteriorDraws &draws, const AreaData &data, bool sigma2_fixed);

/// Long-format CSV: chain, iteration, parameter, value.
std::string draws_csv(const PosteriorDraws &draws);

/// JSON fit report with area summaries, the R-hat table and acceptance rates.
std::string fit_report_json(const HBFit &fit);

} // namespace stratopt
