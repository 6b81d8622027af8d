#include "stratopt/allocation_io.h"

#include "stratopt/text_io.h"

#include <algorithm>
#include <stdexcept>

namespace stratopt {

using nlohmann::json;

json to_json(const AllocationProblem &problem) {
    const auto &in = problem.inputs;
    json j;
    j["format"] = "stratopt-allocation-problem/1";
    j["strata"] = in.strata;
    j["domains"] = in.domains;
    j["variables"] = in.variable_names;
    j["N"] = in.N;
    j["cost"] = in.cost;
    j["n_min"] = in.n_min;
    j["domain_of"] = in.domain_of;
    j["totals"] = in.totals;
    j["s2"] = in.s2;
    j["deff"] = in.deff;
    j["targets"] = problem.targets.bounds;
    return j;
}

AllocationProblem allocation_problem_from_json(const json &j) {
    try {
        if (j.value("format", "") != "stratopt-allocation-problem/1") {
            throw std::invalid_argument("allocation problem: unrecognised format tag");
        }
        AllocationProblem p;
        auto &in = p.inputs;
        const auto names = j.at("variables").get<std::vector<std::string>>();
        in.resize(j.at("strata").get<int>(), j.at("domains").get<int>(), static_cast<int>(names.size()));
        in.variable_names = names;
        in.N = j.at("N").get<std::vector<std::int64_t>>();
        in.cost = j.at("cost").get<std::vector<double>>();
        in.n_min = j.at("n_min").get<std::vector<std::int64_t>>();
        in.domain_of = j.at("domain_of").get<std::vector<int>>();
        in.totals = j.at("totals").get<std::vector<double>>();
        in.s2 = j.at("s2").get<std::vector<double>>();
        in.deff = j.at("deff").get<std::vector<double>>();
        p.targets.domains = in.domains;
        p.targets.variables = in.variables;
        p.targets.bounds = j.at("targets").get<std::vector<double>>();
        in.validate();
        p.targets.validate();
        return p;
    } catch (const json::exception &e) {
        throw std::invalid_argument(std::string{"allocation problem: "} + e.what());
    }
}

void save_problem(const AllocationProblem &problem, const std::filesystem::path &path) {
    write_text_file(path, to_json(problem).dump(1) + "\n");
}

AllocationProblem load_problem(const std::filesystem::path &path) {
    const auto text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    return allocation_problem_from_json(j);
}

std::string allocations_csv(const std::vector<NamedAllocation> &allocations) {
    if (allocations.empty()) {
        throw std::invalid_argument("allocations_csv: nothing to write");
    }
    std::vector<std::string> header{"stratum"};
    for (const auto &a : allocations) {
        header.push_back(a.name);
    }
    CsvWriter csv(header);
    const auto H = allocations.front().allocation.strata();
    for (std::size_t h = 0; h < H; ++h) {
        std::vector<std::string> row{std::to_string(h)};
        for (const auto &a : allocations) {
            row.push_back(std::to_string(a.allocation.sizes.at(h)));
        }
        csv.row(std::move(row));
    }
    return csv.str();
}

std::vector<NamedAllocation> read_allocations_csv(const std::filesystem::path &path) {
    const auto table = read_csv(path);
    if (table.header.size() < 2 || table.header.front() != "stratum") {
        throw std::invalid_argument(path.string() + ": expected a stratum column followed by allocations");
    }
    std::vector<NamedAllocation> out;
    for (std::size_t c = 1; c < table.header.size(); ++c) {
        NamedAllocation a;
        a.name = table.header[c];
        a.allocation.provenance.kind = AllocationKind::custom;
        for (const auto &row : table.rows) {
            a.allocation.sizes.push_back(parse_int(row.at(c)));
        }
        out.push_back(std::move(a));
    }
    return out;
}

json to_json(const BethelSolution &solution, const VarianceInputs &inputs) {
    json j;
    j["iterations"] = solution.iterations;
    j["continuous_cost"] = solution.continuous_cost;
    j["rounded_cost"] = solution.rounded_cost;
    j["continuous"] = solution.continuous;
    j["rounded"] = solution.rounded.sizes;
    j["constraints"] = json::array();
    for (std::size_t i = 0; i < solution.constraints.size(); ++i) {
        const auto &c = solution.constraints[i];
        const bool active = std::find(solution.active.begin(), solution.active.end(), static_cast<int>(i)) !=
                            solution.active.end();
        j["constraints"].push_back({{"area", c.domain},
                                    {"variable", inputs.variable_names.at(static_cast<std::size_t>(c.variable))},
                                    {"slack", solution.slack.at(i)},
                                    {"continuous_slack", solution.continuous_slack.at(i)},
                                    {"multiplier", solution.multipliers.at(i)},
                                    {"active", active}});
    }
    return j;
}

} // namespace stratopt
