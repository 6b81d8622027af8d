#include "stratopt/population_io.h"

#include "stratopt/text_io.h"

#include <stdexcept>
#include <string>

namespace stratopt {

using nlohmann::json;

namespace {

json law_json(const CovariateLaw &law) { return {{"mean", law.mean}, {"sd", law.sd}}; }

CovariateLaw law_from(const json &j) { return {j.at("mean").get<double>(), j.at("sd").get<double>()}; }

json binary_json(const BinaryLatentParams &p) {
    return {{"rate", p.rate},           {"coef1", p.coef1},           {"coef2", p.coef2},
            {"domain_sd", p.domain_sd}, {"stratum_sd", p.stratum_sd}, {"x1", law_json(p.x1)},
            {"x2", law_json(p.x2)}};
}

BinaryLatentParams binary_from(const json &j) {
    BinaryLatentParams p;
    p.rate = j.at("rate").get<double>();
    p.coef1 = j.at("coef1").get<double>();
    p.coef2 = j.at("coef2").get<double>();
    p.domain_sd = j.at("domain_sd").get<double>();
    p.stratum_sd = j.at("stratum_sd").get<double>();
    p.x1 = law_from(j.at("x1"));
    p.x2 = law_from(j.at("x2"));
    return p;
}

json area_json(const AreaTruth &t) { return {{"total", t.total}, {"mean", t.mean}, {"size", t.size}}; }

AreaTruth area_from(const json &j) {
    return {j.at("total").get<double>(), j.at("mean").get<double>(), j.at("size").get<std::int64_t>()};
}

json truth_row(const std::array<AreaTruth, kNumVariables> &row) {
    json out = json::object();
    for (const auto v : kAllVariables) {
        out[std::string{variable_name(v)}] = area_json(row[static_cast<std::size_t>(index_of(v))]);
    }
    return out;
}

std::array<AreaTruth, kNumVariables> truth_row_from(const json &j) {
    std::array<AreaTruth, kNumVariables> out{};
    for (const auto v : kAllVariables) {
        out[static_cast<std::size_t>(index_of(v))] = area_from(j.at(std::string{variable_name(v)}));
    }
    return out;
}

json covariates_json(const PerVariableCovariates<double> &c) {
    json out = json::object();
    for (const auto v : kAllVariables) {
        const auto &pair = c[static_cast<std::size_t>(index_of(v))];
        out[std::string{variable_name(v)}] = json::array({pair[0], pair[1]});
    }
    return out;
}

PerVariableCovariates<double> covariates_from(const json &j) {
    PerVariableCovariates<double> out{};
    for (const auto v : kAllVariables) {
        const auto &arr = j.at(std::string{variable_name(v)});
        out[static_cast<std::size_t>(index_of(v))] = {arr.at(0).get<double>(), arr.at(1).get<double>()};
    }
    return out;
}

const char *kCsvHeader = "unit_id,stratum,domain,E,U,hrs,x_employed_1,x_employed_2,"
                         "x_unemployed_1,x_unemployed_2,x_hours_1,x_hours_2";

} // namespace

json to_json(const PopulationConfig &c) {
    return {{"N", c.units},
            {"H", c.strata},
            {"D", c.domains},
            {"deff_range", json::array({c.deff_low, c.deff_high})},
            {"size_log_sd", c.size_log_sd},
            {"employment", binary_json(c.employment)},
            {"unemployment", binary_json(c.unemployment)},
            {"hours",
             {{"coef1", c.hours.coef1},
              {"coef2", c.hours.coef2},
              {"within_sd", c.hours.within_sd},
              {"truncation", json::array({c.hours.lower, c.hours.upper})},
              {"link_offset", c.hours.link_offset},
              {"link_scale", c.hours.link_scale},
              {"x1", law_json(c.hours.x1)},
              {"x2", law_json(c.hours.x2)}}},
            {"unit_noise_sd", c.unit_noise_sd},
            {"seed", c.seed}};
}

PopulationConfig population_config_from_json(const json &j) {
    PopulationConfig c;
    try {
    c.units = j.at("N").get<std::int64_t>();
    c.strata = j.at("H").get<int>();
    c.domains = j.at("D").get<int>();
    c.deff_low = j.at("deff_range").at(0).get<double>();
    c.deff_high = j.at("deff_range").at(1).get<double>();
    c.size_log_sd = j.at("size_log_sd").get<double>();
    c.employment = binary_from(j.at("employment"));
    c.unemployment = binary_from(j.at("unemployment"));
    const auto &h = j.at("hours");
    c.hours.coef1 = h.at("coef1").get<double>();
    c.hours.coef2 = h.at("coef2").get<double>();
    c.hours.within_sd = h.at("within_sd").get<double>();
    c.hours.lower = h.at("truncation").at(0).get<double>();
    c.hours.upper = h.at("truncation").at(1).get<double>();
    c.hours.link_offset = h.at("link_offset").get<double>();
    c.hours.link_scale = h.at("link_scale").get<double>();
    c.hours.x1 = law_from(h.at("x1"));
    c.hours.x2 = law_from(h.at("x2"));
    c.unit_noise_sd = j.at("unit_noise_sd").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception &e) {
        throw std::invalid_argument(std::string{"population config: "} + e.what());
    }
    c.validate();
    return c;
}

std::string population_csv(const SyntheticPopulation &population) {
    std::string text = kCsvHeader;
    text += '\n';
    text.reserve(static_cast<std::size_t>(population.size()) * 160);
    for (int h = 0; h < population.strata_count(); ++h) {
        const auto &s = population.stratum(h);
        const auto prefix = ',' + std::to_string(h) + ',' + std::to_string(s.domain) + ',';
        for (std::int64_t i = s.first_unit; i < s.first_unit + s.size; ++i) {
            text += std::to_string(i);
            text += prefix;
            text += population.employed()[static_cast<std::size_t>(i)] ? '1' : '0';
            text += ',';
            text += population.unemployed()[static_cast<std::size_t>(i)] ? '1' : '0';
            text += ',';
            text += format_double(population.hours()[static_cast<std::size_t>(i)]);
            for (const auto v : kAllVariables) {
                for (int j = 0; j < 2; ++j) {
                    text += ',';
                    text += format_double(population.covariate(v, j, i));
                }
            }
            text += '\n';
        }
    }
    return text;
}

void write_population(const Synthesis &synthesis, const std::filesystem::path &csv_path,
                      const std::filesystem::path &json_path) {
    const auto &population = synthesis.population;
    write_text_file(csv_path, population_csv(population));

    json strata = json::array();
    for (const auto &s : population.strata()) {
        strata.push_back({{"N", s.size},
                          {"first_unit", s.first_unit},
                          {"domain", s.domain},
                          {"deff", s.deff},
                          {"covariate_draws", covariates_json(s.covariate_draws)},
                          {"covariate_means", covariates_json(s.covariate_means)},
                          {"p_employed", s.p_employed},
                          {"p_unemployed", s.p_unemployed},
                          {"mu_hours", s.mu_hours}});
    }
    json domains = json::array();
    for (int d = 1; d <= synthesis.truth.domain_count(); ++d) {
        std::array<AreaTruth, kNumVariables> row{};
        for (const auto v : kAllVariables) {
            row[static_cast<std::size_t>(index_of(v))] = synthesis.truth.area(d, v);
        }
        domains.push_back(truth_row(row));
    }
    json strata_truth = json::array();
    for (int h = 0; h < synthesis.truth.strata_count(); ++h) {
        std::array<AreaTruth, kNumVariables> row{};
        for (const auto v : kAllVariables) {
            row[static_cast<std::size_t>(index_of(v))] = synthesis.truth.stratum(h, v);
        }
        strata_truth.push_back(truth_row(row));
    }
    std::array<AreaTruth, kNumVariables> national{};
    for (const auto v : kAllVariables) {
        national[static_cast<std::size_t>(index_of(v))] = synthesis.truth.national(v);
    }
    const json doc = {{"format", "stratopt-population/1"},
                      {"config", to_json(population.config())},
                      {"strata", strata},
                      {"truth",
                       {{"national", truth_row(national)},
                        {"domains", domains},
                        {"strata", strata_truth}}}};
    write_text_file(json_path, doc.dump(1) + "\n");
}

Synthesis read_population(const std::filesystem::path &csv_path,
                          const std::filesystem::path &json_path) {
    if (!std::filesystem::exists(json_path)) {
        throw std::runtime_error("missing population sidecar: " + json_path.string());
    }
    if (!std::filesystem::exists(csv_path)) {
        throw std::runtime_error("missing population file: " + csv_path.string());
    }
    const auto doc = json::parse(read_text_file(json_path));
    if (doc.value("format", "") != "stratopt-population/1") {
        throw std::runtime_error("unrecognised population sidecar: " + json_path.string());
    }
    auto config = population_config_from_json(doc.at("config"));
    std::vector<StratumInfo> strata;
    for (const auto &s : doc.at("strata")) {
        StratumInfo info;
        info.size = s.at("N").get<std::int64_t>();
        info.first_unit = s.at("first_unit").get<std::int64_t>();
        info.domain = s.at("domain").get<int>();
        info.deff = s.at("deff").get<double>();
        info.covariate_draws = covariates_from(s.at("covariate_draws"));
        info.covariate_means = covariates_from(s.at("covariate_means"));
        info.p_employed = s.at("p_employed").get<double>();
        info.p_unemployed = s.at("p_unemployed").get<double>();
        info.mu_hours = s.at("mu_hours").get<double>();
        strata.push_back(info);
    }
    SyntheticPopulation population{config, std::move(strata)};

    const auto text = read_text_file(csv_path);
    std::size_t start = text.find('\n');
    if (start == std::string::npos || text.substr(0, start) != kCsvHeader) {
        throw std::runtime_error("unexpected population CSV header in " + csv_path.string());
    }
    ++start;
    std::int64_t expected = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) {
            end = text.size();
        }
        const auto fields = split_csv_line(std::string_view{text}.substr(start, end - start));
        start = end + 1;
        if (fields.size() != 12) {
            throw std::runtime_error("malformed population row in " + csv_path.string());
        }
        const auto id = parse_int(fields[0]);
        if (id != expected || id >= population.size()) {
            throw std::runtime_error("population rows out of order at unit " + std::to_string(id));
        }
        const auto i = static_cast<std::size_t>(id);
        population.employed()[i] = static_cast<std::uint8_t>(parse_int(fields[3]));
        population.unemployed()[i] = static_cast<std::uint8_t>(parse_int(fields[4]));
        population.hours()[i] = parse_double(fields[5]);
        std::size_t f = 6;
        for (const auto v : kAllVariables) {
            for (int j = 0; j < 2; ++j) {
                population.covariate_column(v, j)[i] = parse_double(fields[f++]);
            }
        }
        ++expected;
    }
    if (expected != population.size()) {
        throw std::runtime_error("population CSV has " + std::to_string(expected) +
                                 " rows, sidecar declares " + std::to_string(population.size()));
    }

    const auto &t = doc.at("truth");
    std::vector<std::array<AreaTruth, kNumVariables>> domains;
    for (const auto &row : t.at("domains")) {
        domains.push_back(truth_row_from(row));
    }
    std::vector<std::array<AreaTruth, kNumVariables>> strata_truth;
    for (const auto &row : t.at("strata")) {
        strata_truth.push_back(truth_row_from(row));
    }
    auto truth = TruthRegistry::from_parts(truth_row_from(t.at("national")), std::move(domains),
                                           std::move(strata_truth));
    return Synthesis{std::move(population), std::move(truth)};
}

} // namespace stratopt
