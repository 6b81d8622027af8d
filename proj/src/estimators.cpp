#include "stratopt/estimators.h"

#include "stratopt/numeric.h"
#include "stratopt/text_io.h"

#include <cmath>
#include <stdexcept>

namespace stratopt {

std::vector<StratumEstimate> stratum_estimates(const Sample &sample, const SyntheticPopulation &population,
                                               Variable variable, const EstimatorOptions &options) {
    const int H = population.strata_count();
    if (static_cast<int>(sample.strata.size()) != H) {
        throw std::invalid_argument("sample does not cover the population strata");
    }
    std::vector<StratumEstimate> out(static_cast<std::size_t>(H));
    // Pooled within-stratum variance per domain, used for single-unit strata.
    std::vector<double> pooled_ss(static_cast<std::size_t>(population.domain_count() + 1), 0.0);
    std::vector<double> pooled_df(pooled_ss.size(), 0.0);
    for (int h = 0; h < H; ++h) {
        const auto &units = sample.strata[static_cast<std::size_t>(h)].units;
        const auto &info = population.stratum(h);
        auto &e = out[static_cast<std::size_t>(h)];
        e.stratum = h;
        e.domain = info.domain;
        e.n = static_cast<std::int64_t>(units.size());
        e.N = info.size;
        e.deff = options.apply_deff ? info.deff : 1.0;
        if (e.n == 0) {
            throw std::invalid_argument("stratum " + std::to_string(h) + " has no sampled units");
        }
        std::vector<double> values;
        values.reserve(units.size());
        for (const auto u : units) {
            values.push_back(population.value(variable, u));
        }
        e.mean = mean(values);
        e.s2 = sample_variance(values);
        if (e.n >= 2) {
            pooled_ss[static_cast<std::size_t>(e.domain)] += e.s2 * static_cast<double>(e.n - 1);
            pooled_df[static_cast<std::size_t>(e.domain)] += static_cast<double>(e.n - 1);
        }
        if (e.n >= 2 && is_binary(variable) && e.s2 == 0.0) {
            const double n = static_cast<double>(e.n);
            const double p = 0.5 / n;
            e.s2 = p * (1.0 - p) * n / (n - 1.0);
            e.degenerate = true;
        }
    }
    for (auto &e : out) {
        if (e.n == 1) {
            e.degenerate = true;
            const auto d = static_cast<std::size_t>(e.domain);
            if (pooled_df[d] > 0.0) {
                e.s2 = pooled_ss[d] / pooled_df[d];
            } else if (is_binary(variable)) {
                e.s2 = 0.25;
            }
        }
        const double f = static_cast<double>(e.n) / static_cast<double>(e.N);
        e.psi = e.deff * (1.0 - f) * e.s2 / static_cast<double>(e.n);
    }
    return out;
}

std::vector<DirectEstimate> area_estimates(std::span<const StratumEstimate> strata, int domains,
                                           Variable variable) {
    std::vector<DirectEstimate> out(static_cast<std::size_t>(domains + 1));
    std::vector<double> size(out.size(), 0.0);
    for (std::size_t a = 0; a < out.size(); ++a) {
        out[a].area = static_cast<int>(a);
        out[a].variable = variable;
    }
    for (const auto &s : strata) {
        const double N = static_cast<double>(s.N);
        for (const int a : {0, s.domain}) {
            auto &e = out[static_cast<std::size_t>(a)];
            e.total += N * s.mean;
            e.variance += N * N * s.psi;
            e.n += s.n;
            e.degenerate = e.degenerate || s.degenerate;
            size[static_cast<std::size_t>(a)] += N;
        }
    }
    for (std::size_t a = 0; a < out.size(); ++a) {
        auto &e = out[a];
        e.mean = size[a] > 0.0 ? e.total / size[a] : 0.0;
        e.cv = e.total > 0.0 ? std::sqrt(e.variance) / e.total : 0.0;
    }
    return out;
}

std::vector<DirectEstimate> direct_estimates(const Sample &sample, const SyntheticPopulation &population,
                                             std::span<const Variable> variables,
                                             const EstimatorOptions &options) {
    std::vector<DirectEstimate> out;
    for (const auto v : variables) {
        const auto strata = stratum_estimates(sample, population, v, options);
        const auto areas = area_estimates(strata, population.domain_count(), v);
        out.insert(out.end(), areas.begin(), areas.end());
    }
    return out;
}

CvTableRow cv_row(std::span<const DirectEstimate> areas, double national_target, double domain_target) {
    if (areas.empty()) {
        throw std::invalid_argument("cv_row: no areas");
    }
    CvTableRow row;
    row.variable = areas.front().variable;
    row.national_cv = areas.front().cv;
    row.national_target = national_target;
    row.domain_target = domain_target;
    for (std::size_t a = 1; a < areas.size(); ++a) {
        if (areas[a].cv > row.worst_domain_cv) {
            row.worst_domain_cv = areas[a].cv;
            row.worst_domain = areas[a].area;
        }
    }
    return row;
}

std::string cv_table_csv(std::span<const CvTableRow> rows) {
    CsvWriter csv({"Variable", "National CV", "National Target", "National Pass", "Worst-Domain CV",
                   "Worst Domain", "Domain Target", "Domain Pass"});
    for (const auto &r : rows) {
        csv.row({std::string{variable_label(r.variable)}, format_fixed(r.national_cv, 4),
                 format_fixed(r.national_target, 2), r.national_pass() ? "pass" : "FAIL",
                 format_fixed(r.worst_domain_cv, 4), std::to_string(r.worst_domain),
                 format_fixed(r.domain_target, 2), r.domain_pass() ? "pass" : "FAIL"});
    }
    return csv.str();
}

} // namespace stratopt
