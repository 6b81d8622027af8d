#include "stratopt/popgen.h"

#include "stratopt/numeric.h"

#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stratopt {

namespace {

void require(bool ok, const std::string &field, const std::string &what) {
    if (!ok) {
        throw std::invalid_argument("population." + field + ": " + what);
    }
}

void validate_binary(const BinaryLatentParams &p, const std::string &prefix) {
    require(p.rate > 0.0 && p.rate < 1.0, prefix + ".rate", "must lie in (0, 1)");
    require(p.domain_sd >= 0.0, prefix + ".domain_sd", "must be non-negative");
    require(p.stratum_sd >= 0.0, prefix + ".stratum_sd", "must be non-negative");
    require(p.x1.sd >= 0.0, prefix + ".x1.sd", "must be non-negative");
    require(p.x2.sd >= 0.0, prefix + ".x2.sd", "must be non-negative");
}

const char *stream_name(Variable v) {
    switch (v) {
    case Variable::employed:
        return "employed";
    case Variable::unemployed:
        return "unemployed";
    case Variable::hours:
        return "hours";
    }
    return "?";
}

} // namespace

std::string_view variable_name(Variable v) noexcept { return stream_name(v); }

std::string_view variable_label(Variable v) noexcept {
    switch (v) {
    case Variable::employed:
        return "Employed";
    case Variable::unemployed:
        return "Unemployed";
    case Variable::hours:
        return "Hours Worked";
    }
    return "?";
}

Variable variable_from_name(std::string_view name) {
    for (const auto v : kAllVariables) {
        if (variable_name(v) == name) {
            return v;
        }
    }
    throw std::invalid_argument("unknown variable '" + std::string{name} +
                                "' (expected employed, unemployed or hours)");
}

void PopulationConfig::validate() const {
    require(strata >= 1, "H", "must be at least 1");
    require(domains >= 1, "D", "must be at least 1");
    require(strata >= domains, "H", "must be at least D");
    require(units >= strata, "N", "must be at least H");
    require(deff_low >= 1.0, "deff_range", "lower bound must be at least 1");
    require(deff_high >= deff_low, "deff_range", "upper bound must not be below the lower bound");
    require(size_log_sd >= 0.0, "size_log_sd", "must be non-negative");
    validate_binary(employment, "employment");
    validate_binary(unemployment, "unemployment");
    require(hours.lower < hours.upper, "hours.truncation", "lower bound must be below upper bound");
    require(hours.within_sd >= 0.0, "hours.within_sd", "must be non-negative");
    require(hours.x1.sd >= 0.0 && hours.x2.sd >= 0.0, "hours.covariates", "SDs must be non-negative");
    require(unit_noise_sd >= 0.0, "unit_noise_sd", "must be non-negative");
}

PopulationConfig PopulationConfig::desk_scale() {
    PopulationConfig config;
    config.units = 100'000;
    config.strata = 50;
    config.domains = 10;
    return config;
}

SyntheticPopulation::SyntheticPopulation(PopulationConfig config, std::vector<StratumInfo> strata)
    : config_{std::move(config)}, strata_{std::move(strata)} {
    std::int64_t total = 0;
    for (auto &s : strata_) {
        s.first_unit = total;
        total += s.size;
    }
    employed_.assign(static_cast<std::size_t>(total), 0);
    unemployed_.assign(static_cast<std::size_t>(total), 0);
    hours_.assign(static_cast<std::size_t>(total), 0.0);
    for (auto &column : covariates_) {
        column.assign(static_cast<std::size_t>(total), 0.0);
    }
}

int SyntheticPopulation::stratum_of(std::int64_t unit) const {
    const auto it = std::upper_bound(strata_.begin(), strata_.end(), unit,
                                     [](std::int64_t u, const StratumInfo &s) { return u < s.first_unit; });
    if (it == strata_.begin() || unit >= size()) {
        throw std::out_of_range("unit id out of range: " + std::to_string(unit));
    }
    return static_cast<int>(std::distance(strata_.begin(), it)) - 1;
}

double SyntheticPopulation::value(Variable v, std::int64_t unit) const noexcept {
    const auto i = static_cast<std::size_t>(unit);
    switch (v) {
    case Variable::employed:
        return employed_[i];
    case Variable::unemployed:
        return unemployed_[i];
    case Variable::hours:
        return hours_[i];
    }
    return 0.0;
}

double SyntheticPopulation::covariate(Variable v, int column, std::int64_t unit) const noexcept {
    return covariate_column(v, column)[static_cast<std::size_t>(unit)];
}

std::vector<double> &SyntheticPopulation::covariate_column(Variable v, int column) noexcept {
    return covariates_[static_cast<std::size_t>(2 * index_of(v) + column)];
}

const std::vector<double> &SyntheticPopulation::covariate_column(Variable v, int column) const noexcept {
    return covariates_[static_cast<std::size_t>(2 * index_of(v) + column)];
}

std::vector<int> SyntheticPopulation::strata_in(int domain) const {
    std::vector<int> out;
    for (int h = 0; h < strata_count(); ++h) {
        if (domain == 0 || strata_[static_cast<std::size_t>(h)].domain == domain) {
            out.push_back(h);
        }
    }
    return out;
}

TruthRegistry::TruthRegistry(const SyntheticPopulation &population) {
    const int H = population.strata_count();
    const int D = population.domain_count();
    strata_.resize(static_cast<std::size_t>(H));
    domains_.resize(static_cast<std::size_t>(D));
    for (int h = 0; h < H; ++h) {
        const auto &info = population.stratum(h);
        for (const auto v : kAllVariables) {
            double total = 0.0;
            for (std::int64_t i = info.first_unit; i < info.first_unit + info.size; ++i) {
                total += population.value(v, i);
            }
            auto &cell = strata_[static_cast<std::size_t>(h)][static_cast<std::size_t>(index_of(v))];
            cell.total = total;
            cell.size = info.size;
            cell.mean = total / static_cast<double>(info.size);
        }
    }
    // Domain totals are sums of stratum totals; the national total is the sum
    // of domain totals, so all three levels agree by construction.
    for (int h = 0; h < H; ++h) {
        const int d = population.stratum(h).domain;
        for (int k = 0; k < kNumVariables; ++k) {
            auto &cell = domains_[static_cast<std::size_t>(d - 1)][static_cast<std::size_t>(k)];
            cell.total += strata_[static_cast<std::size_t>(h)][static_cast<std::size_t>(k)].total;
            cell.size += strata_[static_cast<std::size_t>(h)][static_cast<std::size_t>(k)].size;
        }
    }
    for (auto &domain : domains_) {
        for (int k = 0; k < kNumVariables; ++k) {
            auto &cell = domain[static_cast<std::size_t>(k)];
            cell.mean = cell.size > 0 ? cell.total / static_cast<double>(cell.size) : 0.0;
            national_[static_cast<std::size_t>(k)].total += cell.total;
            national_[static_cast<std::size_t>(k)].size += cell.size;
        }
    }
    for (auto &cell : national_) {
        cell.mean = cell.total / static_cast<double>(cell.size);
    }
}

const AreaTruth &TruthRegistry::area(int area, Variable v) const {
    if (area == 0) {
        return national(v);
    }
    return domains_.at(static_cast<std::size_t>(area - 1))[static_cast<std::size_t>(index_of(v))];
}

const AreaTruth &TruthRegistry::stratum(int h, Variable v) const {
    return strata_.at(static_cast<std::size_t>(h))[static_cast<std::size_t>(index_of(v))];
}

TruthRegistry TruthRegistry::from_parts(std::array<AreaTruth, kNumVariables> national,
                                        std::vector<std::array<AreaTruth, kNumVariables>> domains,
                                        std::vector<std::array<AreaTruth, kNumVariables>> strata) {
    TruthRegistry out;
    out.national_ = national;
    out.domains_ = std::move(domains);
    out.strata_ = std::move(strata);
    return out;
}

int domain_of_stratum(int h, int strata, int domains) noexcept {
    return 1 + static_cast<int>((static_cast<std::int64_t>(h) * domains) / strata);
}

std::vector<std::int64_t> gen_stratum_sizes(const PopulationConfig &config, RandomStream stream) {
    std::vector<double> weights(static_cast<std::size_t>(config.strata));
    for (auto &w : weights) {
        w = std::exp(config.size_log_sd * stream.normal());
    }
    // Every stratum gets one unit; the remainder follows the weights.
    auto sizes = largest_remainder(weights, config.units - config.strata);
    for (auto &s : sizes) {
        s += 1;
    }
    return sizes;
}

std::vector<double> gen_design_effects(const PopulationConfig &config, RandomStream stream) {
    std::vector<double> deff(static_cast<std::size_t>(config.strata));
    for (auto &d : deff) {
        d = config.deff_low == config.deff_high ? config.deff_low
                                                : stream.uniform(config.deff_low, config.deff_high);
    }
    return deff;
}

CovariateSet gen_covariates(const PopulationConfig &config, std::span<const std::int64_t> sizes,
                            RandomStream stream) {
    const auto H = sizes.size();
    std::int64_t total = 0;
    for (const auto s : sizes) {
        total += s;
    }
    CovariateSet out;
    for (const auto v : kAllVariables) {
        const auto k = static_cast<std::size_t>(index_of(v));
        std::array<CovariateLaw, 2> laws{};
        switch (v) {
        case Variable::employed:
            laws = {config.employment.x1, config.employment.x2};
            break;
        case Variable::unemployed:
            laws = {config.unemployment.x1, config.unemployment.x2};
            break;
        case Variable::hours:
            laws = {config.hours.x1, config.hours.x2};
            break;
        }
        auto var_stream = stream.child(stream_name(v));
        for (std::size_t j = 0; j < 2; ++j) {
            auto draw_stream = var_stream.child(j == 0 ? "x1" : "x2");
            auto &stratum_values = out.stratum[k][j];
            stratum_values.resize(H);
            for (auto &x : stratum_values) {
                x = draw_stream.normal(laws[j].mean, laws[j].sd);
            }
            auto noise_root = var_stream.child(j == 0 ? "noise/x1" : "noise/x2");
            auto &unit_values = out.unit[k][j];
            unit_values.resize(static_cast<std::size_t>(total));
            auto &means = out.stratum_means[k][j];
            means.resize(H);
            std::int64_t offset = 0;
            for (std::size_t h = 0; h < H; ++h) {
                auto noise = noise_root.child(static_cast<std::uint64_t>(h));
                double sum = 0.0;
                for (std::int64_t i = 0; i < sizes[h]; ++i) {
                    const double x = config.unit_noise_sd > 0.0
                                         ? stratum_values[h] + config.unit_noise_sd * noise.normal()
                                         : stratum_values[h];
                    unit_values[static_cast<std::size_t>(offset + i)] = x;
                    sum += x;
                }
                means[h] = sum / static_cast<double>(sizes[h]);
                offset += sizes[h];
            }
        }
    }
    return out;
}

double stratum_binary_prob(double x1, double x2, double domain_effect, double stratum_residual,
                           const BinaryLatentParams &params) noexcept {
    const double eta = logit(params.rate) + params.coef1 * (x1 - params.x1.mean) +
                       params.coef2 * (x2 - params.x2.mean) + domain_effect + stratum_residual;
    return logistic(eta);
}

double stratum_employment_prob(double x1, double x2, double domain_effect,
                               double stratum_residual, const PopulationConfig &config) noexcept {
    return stratum_binary_prob(x1, x2, domain_effect, stratum_residual, config.employment);
}

double stratum_unemployment_prob(double x1, double x2, double domain_effect,
                                 double stratum_residual, const PopulationConfig &config) noexcept {
    return stratum_binary_prob(x1, x2, domain_effect, stratum_residual, config.unemployment);
}

std::int64_t resolve_overlap(std::span<std::uint8_t> employed, std::span<std::uint8_t> unemployed,
                             double prob_employed, RandomStream stream) {
    if (employed.size() != unemployed.size()) {
        throw std::invalid_argument("resolve_overlap: indicator vectors differ in length");
    }
    std::int64_t resolved = 0;
    for (std::size_t i = 0; i < employed.size(); ++i) {
        if (employed[i] != 0 && unemployed[i] != 0) {
            if (stream.uniform() < prob_employed) {
                unemployed[i] = 0;
            } else {
                employed[i] = 0;
            }
            ++resolved;
        }
    }
    return resolved;
}

double stratum_hours_mean(double x1, double x2, const HoursParams &params) noexcept {
    return params.link_offset + params.link_scale * logistic(params.coef1 * x1 + params.coef2 * x2);
}

std::vector<double> gen_hours(double stratum_mean, std::int64_t count, const HoursParams &params,
                              RandomStream stream) {
    std::vector<double> out(static_cast<std::size_t>(count));
    for (auto &x : out) {
        x = truncated_normal_from_uniform(stream.uniform(), stratum_mean, params.within_sd,
                                          params.lower, params.upper);
    }
    return out;
}

Synthesis synthesize(const PopulationConfig &config) {
    config.validate();
    const auto root = RandomStream::derive(config.seed, "popgen");
    const int H = config.strata;
    const int D = config.domains;

    const auto sizes = gen_stratum_sizes(config, root.child("sizes"));
    const auto deff = gen_design_effects(config, root.child("deff"));
    auto covariates = gen_covariates(config, sizes, root.child("covariates"));

    auto effects = [&](const char *name, double sd, int count) {
        auto s = root.child(name);
        std::vector<double> out(static_cast<std::size_t>(count));
        for (auto &e : out) {
            e = sd * s.normal();
        }
        return out;
    };
    const auto gamma_e = effects("domain_effect/employed", config.employment.domain_sd, D);
    const auto eps_e = effects("stratum_effect/employed", config.employment.stratum_sd, H);
    const auto gamma_u = effects("domain_effect/unemployed", config.unemployment.domain_sd, D);
    const auto eps_u = effects("stratum_effect/unemployed", config.unemployment.stratum_sd, H);

    std::vector<StratumInfo> strata(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
        auto &s = strata[static_cast<std::size_t>(h)];
        const auto hu = static_cast<std::size_t>(h);
        s.size = sizes[hu];
        s.domain = domain_of_stratum(h, H, D);
        s.deff = deff[hu];
        for (int k = 0; k < kNumVariables; ++k) {
            for (int j = 0; j < 2; ++j) {
                const auto ku = static_cast<std::size_t>(k);
                const auto ju = static_cast<std::size_t>(j);
                s.covariate_draws[ku][ju] = covariates.stratum[ku][ju][hu];
                s.covariate_means[ku][ju] = covariates.stratum_means[ku][ju][hu];
            }
        }
        const auto &xe = s.covariate_draws[0];
        const auto &xu = s.covariate_draws[1];
        const auto &xh = s.covariate_draws[2];
        const auto du = static_cast<std::size_t>(s.domain - 1);
        s.p_employed = stratum_employment_prob(xe[0], xe[1], gamma_e[du], eps_e[hu], config);
        s.p_unemployed = stratum_unemployment_prob(xu[0], xu[1], gamma_u[du], eps_u[hu], config);
        s.mu_hours = stratum_hours_mean(xh[0], xh[1], config.hours);
    }

    SyntheticPopulation population{config, std::move(strata)};
    for (const auto v : kAllVariables) {
        for (int j = 0; j < 2; ++j) {
            population.covariate_column(v, j) = std::move(
                covariates.unit[static_cast<std::size_t>(index_of(v))][static_cast<std::size_t>(j)]);
        }
    }

    const double prob_employed =
        config.employment.rate / (config.employment.rate + config.unemployment.rate);
    const auto units_e = root.child("units/employed");
    const auto units_u = root.child("units/unemployed");
    const auto units_h = root.child("units/hours");
    const auto overlap = root.child("overlap");
    auto &E = population.employed();
    auto &U = population.unemployed();
    auto &Hrs = population.hours();
    tbb::parallel_for(0, H, [&](int h) {
        const auto &s = population.stratum(h);
        const auto first = static_cast<std::size_t>(s.first_unit);
        const auto n = static_cast<std::size_t>(s.size);
        auto se = units_e.child(static_cast<std::uint64_t>(h));
        auto su = units_u.child(static_cast<std::uint64_t>(h));
        for (std::size_t i = 0; i < n; ++i) {
            E[first + i] = se.bernoulli(s.p_employed) ? 1 : 0;
            U[first + i] = su.bernoulli(s.p_unemployed) ? 1 : 0;
        }
        resolve_overlap(std::span{E}.subspan(first, n), std::span{U}.subspan(first, n),
                        prob_employed, overlap.child(static_cast<std::uint64_t>(h)));
        const auto hrs = gen_hours(s.mu_hours, s.size, config.hours,
                                   units_h.child(static_cast<std::uint64_t>(h)));
        std::copy(hrs.begin(), hrs.end(), Hrs.begin() + static_cast<std::ptrdiff_t>(first));
    });

    TruthRegistry truth{population};
    return Synthesis{std::move(population), std::move(truth)};
}

} // namespace stratopt
