#pragma once

#include "stratopt/popgen.h"

#include <vector>

namespace stratopt::testing {

/// Population with hand-set unit values. Stratum h has sizes[h] units and
/// belongs to domains[h]; hours[h] and employed[h] hold its unit values.
inline SyntheticPopulation make_population(const std::vector<std::int64_t> &sizes, const std::vector<int> &domains,
                                           const std::vector<std::vector<double>> &hours,
                                           const std::vector<std::vector<std::uint8_t>> &employed = {},
                                           double deff = 1.0) {
    PopulationConfig config;
    config.strata = static_cast<int>(sizes.size());
    config.domains = 0;
    config.units = 0;
    std::vector<StratumInfo> strata(sizes.size());
    for (std::size_t h = 0; h < sizes.size(); ++h) {
        strata[h].size = sizes[h];
        strata[h].domain = domains[h];
        strata[h].deff = deff;
        config.domains = std::max(config.domains, domains[h]);
        config.units += sizes[h];
    }
    SyntheticPopulation pop{config, strata};
    std::int64_t offset = 0;
    for (std::size_t h = 0; h < sizes.size(); ++h) {
        for (std::int64_t i = 0; i < sizes[h]; ++i) {
            const auto u = static_cast<std::size_t>(offset + i);
            if (h < hours.size()) {
                pop.hours()[u] = hours[h][static_cast<std::size_t>(i)];
            }
            if (h < employed.size()) {
                pop.employed()[u] = employed[h][static_cast<std::size_t>(i)];
                pop.unemployed()[u] = employed[h][static_cast<std::size_t>(i)] ? 0 : 1;
            }
        }
        offset += sizes[h];
    }
    return pop;
}

/// Constant-valued strata: every unit of stratum h has hours value[h].
inline SyntheticPopulation constant_population(const std::vector<std::int64_t> &sizes,
                                               const std::vector<int> &domains, const std::vector<double> &value) {
    std::vector<std::vector<double>> hours;
    for (std::size_t h = 0; h < sizes.size(); ++h) {
        hours.emplace_back(static_cast<std::size_t>(sizes[h]), value[h]);
    }
    return make_population(sizes, domains, hours);
}

} // namespace stratopt::testing
