#pragma once

#include "stratopt/rng.h"

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace stratopt {

/// The three labour-force target variables.
enum class Variable : int { employed = 0, unemployed = 1, hours = 2 };

inline constexpr int kNumVariables = 3;
inline constexpr std::array<Variable, kNumVariables> kAllVariables{
    Variable::employed, Variable::unemployed, Variable::hours};

std::string_view variable_name(Variable v) noexcept;
std::string_view variable_label(Variable v) noexcept;
Variable variable_from_name(std::string_view name);
constexpr bool is_binary(Variable v) noexcept { return v != Variable::hours; }
constexpr int index_of(Variable v) noexcept { return static_cast<int>(v); }

struct CovariateLaw {
    double mean{0.0};
    double sd{1.0};
};

/// Logit-normal latent model for a binary indicator.
struct BinaryLatentParams {
    double rate{0.5};
    double coef1{0.0};
    double coef2{0.0};
    double domain_sd{0.0};
    double stratum_sd{0.0};
    CovariateLaw x1{};
    CovariateLaw x2{};
};

/// Truncated-normal hours with a logistic stratum-mean link.
struct HoursParams {
    double coef1{0.10};
    double coef2{0.08};
    double within_sd{12.0};
    double lower{15.0};
    double upper{60.0};
    double link_offset{15.0};
    double link_scale{45.0};
    CovariateLaw x1{0.0, 3.0};
    CovariateLaw x2{0.0, 3.0};
};

struct PopulationConfig {
    std::int64_t units{1'000'000};
    int strata{100};
    int domains{10};
    double deff_low{1.1};
    double deff_high{1.2};
    /// Log-scale SD of the stratum size weights.
    double size_log_sd{0.3};
    BinaryLatentParams employment{0.62, 0.15, 0.10, 0.20, 0.15, {3.0, 1.0}, {4.0, 1.5}};
    BinaryLatentParams unemployment{0.04, 0.15, 0.10, 0.10, 0.08, {3.0, 1.0}, {4.0, 1.5}};
    HoursParams hours{};
    double unit_noise_sd{0.2};
    std::uint64_t seed{20240601};

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;

    /// N = 100,000, H = 50, D = 10 with all other parameters at their defaults.
    static PopulationConfig desk_scale();
};

/// Covariates per variable: two columns each, indexed [variable][column].
template <typename T> using PerVariableCovariates = std::array<std::array<T, 2>, kNumVariables>;

struct StratumInfo {
    std::int64_t size{0};
    std::int64_t first_unit{0};
    /// Domain id in 1..D (0 is reserved for the national area).
    int domain{1};
    double deff{1.0};
    PerVariableCovariates<double> covariate_draws{};
    /// Mean of the unit-level covariate values within the stratum.
    PerVariableCovariates<double> covariate_means{};
    double p_employed{0.0};
    double p_unemployed{0.0};
    double mu_hours{0.0};
};

/// Unit-level population stored column-wise. Units of stratum h occupy the
/// contiguous index range [first_unit, first_unit + size).
class SyntheticPopulation {
  public:
    SyntheticPopulation() = default;
    SyntheticPopulation(PopulationConfig config, std::vector<StratumInfo> strata);

    [[nodiscard]] const PopulationConfig &config() const noexcept { return config_; }
    [[nodiscard]] std::int64_t size() const noexcept { return static_cast<std::int64_t>(hours_.size()); }
    [[nodiscard]] int strata_count() const noexcept { return static_cast<int>(strata_.size()); }
    [[nodiscard]] int domain_count() const noexcept { return config_.domains; }
    [[nodiscard]] const std::vector<StratumInfo> &strata() const noexcept { return strata_; }
    [[nodiscard]] const StratumInfo &stratum(int h) const { return strata_.at(static_cast<std::size_t>(h)); }
    [[nodiscard]] int stratum_of(std::int64_t unit) const;

    [[nodiscard]] double value(Variable v, std::int64_t unit) const noexcept;
    [[nodiscard]] double covariate(Variable v, int column, std::int64_t unit) const noexcept;

    std::vector<std::uint8_t> &employed() noexcept { return employed_; }
    std::vector<std::uint8_t> &unemployed() noexcept { return unemployed_; }
    std::vector<double> &hours() noexcept { return hours_; }
    std::vector<double> &covariate_column(Variable v, int column) noexcept;
    [[nodiscard]] const std::vector<std::uint8_t> &employed() const noexcept { return employed_; }
    [[nodiscard]] const std::vector<std::uint8_t> &unemployed() const noexcept { return unemployed_; }
    [[nodiscard]] const std::vector<double> &hours() const noexcept { return hours_; }
    [[nodiscard]] const std::vector<double> &covariate_column(Variable v, int column) const noexcept;
    std::vector<StratumInfo> &mutable_strata() noexcept { return strata_; }

    /// Strata belonging to a domain id (1..D), or all strata for id 0.
    [[nodiscard]] std::vector<int> strata_in(int domain) const;

  private:
    PopulationConfig config_{};
    std::vector<StratumInfo> strata_;
    std::vector<std::uint8_t> employed_;
    std::vector<std::uint8_t> unemployed_;
    std::vector<double> hours_;
    std::array<std::vector<double>, 2 * kNumVariables> covariates_;
};

struct AreaTruth {
    double total{0.0};
    double mean{0.0};
    std::int64_t size{0};
};

/// True totals and means at national (area 0), domain (1..D) and stratum level.
class TruthRegistry {
  public:
    TruthRegistry() = default;
    explicit TruthRegistry(const SyntheticPopulation &population);

    [[nodiscard]] const AreaTruth &national(Variable v) const noexcept { return national_[index_of(v)]; }
    /// Area 0 is national, 1..D are domains.
    [[nodiscard]] const AreaTruth &area(int area, Variable v) const;
    [[nodiscard]] const AreaTruth &stratum(int h, Variable v) const;
    [[nodiscard]] int domain_count() const noexcept { return static_cast<int>(domains_.size()); }
    [[nodiscard]] int strata_count() const noexcept { return static_cast<int>(strata_.size()); }

    /// Rebuilds a registry from stored values (used by the importer).
    static TruthRegistry from_parts(std::array<AreaTruth, kNumVariables> national,
                                    std::vector<std::array<AreaTruth, kNumVariables>> domains,
                                    std::vector<std::array<AreaTruth, kNumVariables>> strata);

  private:
    std::array<AreaTruth, kNumVariables> national_{};
    std::vector<std::array<AreaTruth, kNumVariables>> domains_;
    std::vector<std::array<AreaTruth, kNumVariables>> strata_;
};

struct Synthesis {
    SyntheticPopulation population;
    TruthRegistry truth;
};

/// Domain id (1..D) of stratum h: contiguous balanced blocks.
int domain_of_stratum(int h, int strata, int domains) noexcept;

std::vector<std::int64_t> gen_stratum_sizes(const PopulationConfig &config, RandomStream stream);
std::vector<double> gen_design_effects(const PopulationConfig &config, RandomStream stream);

struct CovariateSet {
    /// Stratum-level draws X_{j,k,h}: [variable][column][h].
    PerVariableCovariates<std::vector<double>> stratum;
    /// Unit-level values X_{j,k,i}: [variable][column][unit].
    PerVariableCovariates<std::vector<double>> unit;
    /// Mean of unit-level values per stratum: [variable][column][h].
    PerVariableCovariates<std::vector<double>> stratum_means;
};

CovariateSet gen_covariates(const PopulationConfig &config, std::span<const std::int64_t> sizes,
                            RandomStream stream);

/// logistic(logit(rate) + coef1 (x1 - mean1) + coef2 (x2 - mean2) + domain + stratum)
double stratum_binary_prob(double x1, double x2, double domain_effect, double stratum_residual,
                           const BinaryLatentParams &params) noexcept;
double stratum_employment_prob(double x1, double x2, double domain_effect,
                               double stratum_residual, const PopulationConfig &config) noexcept;
double stratum_unemployment_prob(double x1, double x2, double domain_effect,
                                 double stratum_residual, const PopulationConfig &config) noexcept;

/// Units with E = U = 1 are reassigned to employed with probability
/// `prob_employed`, otherwise to unemployed. Returns the number reassigned.
std::int64_t resolve_overlap(std::span<std::uint8_t> employed, std::span<std::uint8_t> unemployed,
                             double prob_employed, RandomStream stream);

double stratum_hours_mean(double x1, double x2, const HoursParams &params) noexcept;
std::vector<double> gen_hours(double stratum_mean, std::int64_t count, const HoursParams &params,
                              RandomStream stream);

Synthesis synthesize(const PopulationConfig &config);

} // namespace stratopt
