#pragma once

#include "stratopt/allocation.h"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace stratopt {

/// An allocation problem: variance inputs and precision targets.
struct AllocationProblem {
    VarianceInputs inputs;
    PrecisionTargets targets;
};

nlohmann::json to_json(const AllocationProblem &problem);
AllocationProblem allocation_problem_from_json(const nlohmann::json &j);
void save_problem(const AllocationProblem &problem, const std::filesystem::path &path);
AllocationProblem load_problem(const std::filesystem::path &path);

struct NamedAllocation {
    std::string name;
    Allocation allocation;
};

/// Wide CSV: stratum column followed by one column of n_h per allocation.
std::string allocations_csv(const std::vector<NamedAllocation> &allocations);
std::vector<NamedAllocation> read_allocations_csv(const std::filesystem::path &path);

nlohmann::json to_json(const BethelSolution &solution, const VarianceInputs &inputs);

} // namespace stratopt
