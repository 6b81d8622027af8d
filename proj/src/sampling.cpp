#include "stratopt/sampling.h"

#include "stratopt/numeric.h"
#include "stratopt/text_io.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace stratopt {

std::string Provenance::to_string() const {
    switch (kind) {
    case AllocationKind::baseline:
        return "baseline";
    case AllocationKind::neyman:
        return "neyman(" + std::to_string(variable) + ")";
    case AllocationKind::nso_max:
        return "nso_max";
    case AllocationKind::bethel:
        return "bethel";
    case AllocationKind::hb_reduced:
        return "hb_reduced(" + format_double(alpha) + ")";
    case AllocationKind::custom:
        return "custom";
    }
    return "custom";
}

std::int64_t Allocation::total() const noexcept {
    return std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0});
}

void Allocation::validate(std::span<const std::int64_t> stratum_sizes) const {
    if (sizes.size() != stratum_sizes.size()) {
        throw std::invalid_argument("allocation covers " + std::to_string(sizes.size()) +
                                    " strata, population has " + std::to_string(stratum_sizes.size()));
    }
    for (std::size_t h = 0; h < sizes.size(); ++h) {
        if (sizes[h] < 0 || sizes[h] > stratum_sizes[h]) {
            throw std::invalid_argument("allocation for stratum " + std::to_string(h) + " is " +
                                        std::to_string(sizes[h]) + ", outside [0, " +
                                        std::to_string(stratum_sizes[h]) + "]");
        }
    }
}

std::vector<std::int64_t> stratum_sizes(const SyntheticPopulation &population) {
    std::vector<std::int64_t> out;
    out.reserve(population.strata().size());
    for (const auto &s : population.strata()) {
        out.push_back(s.size);
    }
    return out;
}

std::int64_t Sample::total() const noexcept {
    std::int64_t n = 0;
    for (const auto &s : strata) {
        n += static_cast<std::int64_t>(s.units.size());
    }
    return n;
}

Allocation baseline_allocation(const SyntheticPopulation &population, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("baseline fraction must lie in (0, 1]");
    }
    Allocation out;
    out.provenance.kind = AllocationKind::baseline;
    for (int h = 0; h < population.strata_count(); ++h) {
        const auto N = population.stratum(h).size;
        if (N < 2) {
            throw std::invalid_argument("stratum " + std::to_string(h) +
                                        " has fewer than 2 units; a baseline variance cannot be estimated");
        }
        const auto n = std::max<std::int64_t>(2, round_to_count(fraction * static_cast<double>(N)));
        out.sizes.push_back(std::min(n, N));
    }
    return out;
}

namespace {

// Indices of the `take` smallest keys, ordered by key.
std::vector<std::size_t> smallest_keys(const std::vector<double> &keys, std::size_t take) {
    std::vector<std::size_t> order(keys.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto by_key = [&](std::size_t a, std::size_t b) {
        return keys[a] < keys[b] || (keys[a] == keys[b] && a < b);
    };
    if (take < order.size()) {
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), by_key);
        order.resize(take);
    }
    std::sort(order.begin(), order.end(), by_key);
    return order;
}

} // namespace

Sample draw_stratified(const SyntheticPopulation &population, const Allocation &allocation,
                       RandomStream stream, std::string lineage) {
    const auto sizes = stratum_sizes(population);
    allocation.validate(sizes);
    Sample sample;
    sample.allocation = allocation;
    sample.lineage = std::move(lineage);
    sample.strata.resize(sizes.size());
    for (std::size_t h = 0; h < sizes.size(); ++h) {
        auto s = stream.child(static_cast<std::uint64_t>(h));
        std::vector<double> keys(static_cast<std::size_t>(sizes[h]));
        for (auto &k : keys) {
            k = s.uniform();
        }
        const auto first = population.stratum(static_cast<int>(h)).first_unit;
        auto &out = sample.strata[h];
        for (const auto i : smallest_keys(keys, static_cast<std::size_t>(allocation.sizes[h]))) {
            out.units.push_back(first + static_cast<std::int64_t>(i));
            out.keys.push_back(keys[i]);
        }
    }
    return sample;
}

std::int64_t effective_sample_size(std::int64_t n, std::int64_t N, double deff) {
    const double nd = static_cast<double>(n);
    const double value = nd * (1.0 - nd / static_cast<double>(N)) / deff;
    return std::max<std::int64_t>(1, round_to_count(value));
}

Sample nested_subsample(const Sample &master, double fraction, RandomStream stream) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("subsample fraction must lie in (0, 1]");
    }
    Sample out;
    out.lineage = master.lineage + "/sub(" + format_double(fraction) + ")";
    out.allocation.provenance = {AllocationKind::hb_reduced, -1, 1.0 - fraction};
    out.strata.resize(master.strata.size());
    for (std::size_t h = 0; h < master.strata.size(); ++h) {
        const auto &src = master.strata[h];
        const auto n = static_cast<std::int64_t>(src.units.size());
        auto take = round_to_count(fraction * static_cast<double>(n));
        if (n > 0 && take == 0) {
            take = 1;
            out.floored_strata.push_back(static_cast<int>(h));
        }
        auto s = stream.child(static_cast<std::uint64_t>(h));
        std::vector<double> keys(src.units.size());
        for (auto &k : keys) {
            k = s.uniform();
        }
        auto &dst = out.strata[h];
        for (const auto i : smallest_keys(keys, static_cast<std::size_t>(take))) {
            dst.units.push_back(src.units[i]);
            dst.keys.push_back(keys[i]);
        }
        out.allocation.sizes.push_back(take);
    }
    return out;
}

BaselineSummary summarize_baseline(const Sample &sample, const SyntheticPopulation &population) {
    if (static_cast<int>(sample.strata.size()) != population.strata_count()) {
        throw std::invalid_argument("sample and population disagree on the number of strata");
    }
    BaselineSummary out;
    out.domains = population.domain_count();
    std::vector<double> values;
    for (int h = 0; h < population.strata_count(); ++h) {
        const auto &units = sample.strata[static_cast<std::size_t>(h)].units;
        if (units.size() < 2) {
            throw std::invalid_argument("stratum " + std::to_string(h) + " has " +
                                        std::to_string(units.size()) +
                                        " sampled units; at least 2 are required");
        }
        const auto &info = population.stratum(h);
        StratumSummary s;
        s.n = static_cast<std::int64_t>(units.size());
        s.N = info.size;
        s.deff = info.deff;
        s.domain = info.domain;
        s.n_eff = effective_sample_size(s.n, s.N, s.deff);
        for (const auto v : kAllVariables) {
            values.clear();
            for (const auto u : units) {
                values.push_back(population.value(v, u));
            }
            s.mean[static_cast<std::size_t>(index_of(v))] = mean(values);
            s.sd[static_cast<std::size_t>(index_of(v))] = std::sqrt(sample_variance(values));
            for (int j = 0; j < 2; ++j) {
                values.clear();
                for (const auto u : units) {
                    values.push_back(population.covariate(v, j, u));
                }
                s.covariate_means[static_cast<std::size_t>(index_of(v))][static_cast<std::size_t>(j)] =
                    mean(values);
            }
        }
        out.strata.push_back(s);
    }
    return out;
}

std::string sample_manifest_csv(const Sample &sample) {
    CsvWriter csv({"stratum", "unit_id", "key"});
    for (std::size_t h = 0; h < sample.strata.size(); ++h) {
        const auto &s = sample.strata[h];
        for (std::size_t i = 0; i < s.units.size(); ++i) {
            csv.row({std::to_string(h), std::to_string(s.units[i]), format_double(s.keys[i])});
        }
    }
    return csv.str();
}

Sample read_sample_manifest(const std::string &path, int strata) {
    const auto table = read_csv(path);
    const auto c_stratum = table.column("stratum");
    const auto c_unit = table.column("unit_id");
    const auto c_key = table.column("key");
    Sample out;
    out.lineage = path;
    out.strata.resize(static_cast<std::size_t>(strata));
    for (const auto &row : table.rows) {
        const auto h = parse_int(row.at(c_stratum));
        if (h < 0 || h >= strata) {
            throw std::invalid_argument(path + ": stratum id " + std::to_string(h) + " out of range");
        }
        auto &s = out.strata[static_cast<std::size_t>(h)];
        s.units.push_back(parse_int(row.at(c_unit)));
        s.keys.push_back(parse_double(row.at(c_key)));
    }
    for (const auto &s : out.strata) {
        out.allocation.sizes.push_back(static_cast<std::int64_t>(s.units.size()));
    }
    out.allocation.provenance.kind = AllocationKind::custom;
    return out;
}

std::string baseline_summary_csv(const BaselineSummary &summary) {
    std::vector<std::string> header{"stratum", "domain", "N", "n", "n_eff", "deff"};
    for (const auto v : kAllVariables) {
        header.push_back("mean_" + std::string{variable_name(v)});
        header.push_back("sd_" + std::string{variable_name(v)});
    }
    for (const auto v : kAllVariables) {
        header.push_back("zbar_" + std::string{variable_name(v)} + "_1");
        header.push_back("zbar_" + std::string{variable_name(v)} + "_2");
    }
    CsvWriter csv(header);
    for (std::size_t h = 0; h < summary.strata.size(); ++h) {
        const auto &s = summary.strata[h];
        std::vector<std::string> row{std::to_string(h), std::to_string(s.domain), std::to_string(s.N),
                                     std::to_string(s.n), std::to_string(s.n_eff), format_double(s.deff)};
        for (int k = 0; k < kNumVariables; ++k) {
            row.push_back(format_double(s.mean[static_cast<std::size_t>(k)]));
            row.push_back(format_double(s.sd[static_cast<std::size_t>(k)]));
        }
        for (int k = 0; k < kNumVariables; ++k) {
            for (int j = 0; j < 2; ++j) {
                row.push_back(format_double(s.covariate_means[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]));
            }
        }
        csv.row(std::move(row));
    }
    return csv.str();
}

BaselineSummary read_baseline_summary_csv(const std::string &path) {
    const auto table = read_csv(path);
    BaselineSummary out;
    for (const auto &row : table.rows) {
        StratumSummary s;
        s.domain = static_cast<int>(parse_int(row[table.column("domain")]));
        s.N = parse_int(row[table.column("N")]);
        s.n = parse_int(row[table.column("n")]);
        s.n_eff = parse_int(row[table.column("n_eff")]);
        s.deff = parse_double(row[table.column("deff")]);
        for (const auto v : kAllVariables) {
            const auto k = static_cast<std::size_t>(index_of(v));
            const std::string name{variable_name(v)};
            s.mean[k] = parse_double(row[table.column("mean_" + name)]);
            s.sd[k] = parse_double(row[table.column("sd_" + name)]);
            s.covariate_means[k][0] = parse_double(row[table.column("zbar_" + name + "_1")]);
            s.covariate_means[k][1] = parse_double(row[table.column("zbar_" + name + "_2")]);
        }
        out.domains = std::max(out.domains, s.domain);
        out.strata.push_back(s);
    }
    return out;
}

} // namespace stratopt
