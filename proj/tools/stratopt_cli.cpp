#include "stratopt/allocation_io.h"
#include "stratopt/config.h"
#include "stratopt/pipeline.h"
#include "stratopt/text_io.h"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace {

namespace fs = std::filesystem;
using namespace stratopt;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;
constexpr int kExitChecks = 4;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string stage;
    bool strict{false};
    std::string method{"bethel"};
    std::string inputs;
    std::string variable{"all"};
    std::vector<double> alpha_grid;
    std::string thresholds;
    std::optional<int> replications;
    std::optional<int> parallelism;
};

/// Explicit --config, else the resolved config of an existing run directory,
/// else the built-in desk-scale defaults; then command-line overrides.
RunConfig resolve_config(const Options &o) {
    RunConfig c;
    if (!o.config.empty()) {
        c = load_run_config(o.config);
    } else if (!o.out.empty() && fs::exists(fs::path{o.out} / files::config)) {
        c = run_config_from_json(nlohmann::json::parse(read_text_file(fs::path{o.out} / files::config)));
    }
    if (o.seed) {
        c.set_seed(*o.seed);
    }
    if (!o.out.empty()) {
        c.output = o.out;
    }
    if (!o.alpha_grid.empty()) {
        c.reduction.alpha_grid = o.alpha_grid;
    }
    if (o.variable != "all") {
        c.reduction.variables = {variable_from_name(o.variable)};
    }
    if (!o.thresholds.empty()) {
        const auto t = toml_to_json(read_text_file(o.thresholds), o.thresholds);
        for (const auto &[key, value] : t.items()) {
            const double x = value.get<double>();
            if (key == "rhat_limit") {
                c.reduction.thresholds.rhat_limit = x;
            } else if (key == "national_are") {
                c.reduction.thresholds.national_are = x;
            } else if (key == "domain_mare") {
                c.reduction.thresholds.domain_mare = x;
            } else if (key == "domain_max_are") {
                c.reduction.thresholds.domain_max_are = x;
            } else if (key == "national") {
                c.national_target = x;
            } else if (key == "domain") {
                c.domain_target = x;
            } else {
                throw std::invalid_argument("unknown threshold key " + key);
            }
        }
        c.reduction.thresholds.targets = c.targets();
    }
    if (o.replications) {
        c.mc_replications = *o.replications;
    }
    if (o.parallelism) {
        c.mc_parallelism = *o.parallelism;
    }
    c.validate();
    return c;
}

/// Standalone solve from a problem file, written as a wide allocation CSV.
void allocate_from_problem(const Options &o) {
    const auto problem = load_problem(o.inputs);
    const auto &in = problem.inputs;
    std::vector<NamedAllocation> out;
    if (o.method == "neyman" || o.method == "nso-max") {
        std::vector<Allocation> each;
        for (int k = 0; k < in.variables; ++k) {
            each.push_back(neyman_allocation(in, k, problem.targets(0, k)));
            if (o.method == "neyman") {
                out.push_back({"neyman_" + in.variable_names[static_cast<std::size_t>(k)], each.back()});
            }
        }
        if (o.method == "nso-max") {
            out.push_back({"nso_max", nso_max_allocation(each)});
        }
    } else if (o.method == "bethel") {
        const auto solution = bethel_solve(in, problem.targets, BethelOptions{});
        out.push_back({"bethel", solution.rounded});
        std::cerr << "bethel total " << solution.rounded.total() << '\n';
    } else {
        throw std::invalid_argument("--method must be neyman, nso-max or bethel");
    }
    const auto csv = allocations_csv(out);
    if (o.out.empty()) {
        std::cout << csv;
    } else {
        write_text_file(o.out, csv);
    }
}

int print_checks(const ReportResult &r, bool strict) {
    for (const auto &c : r.checks) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    }
    return strict && !r.all_pass() ? kExitChecks : kExitOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Multivariate stratified allocation with hierarchical Bayes sample reduction"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App *cmd) {
        cmd->add_option("--config", o.config, "TOML run configuration")->check(CLI::ExistingFile);
        cmd->add_option("--seed", o.seed, "Global seed");
        cmd->add_option("--out", o.out, "Run directory");
    };
    std::vector<std::pair<CLI::App *, Stage>> stage_cmds;
    for (const auto stage : kStages) {
        const auto name = std::string{stage_name(stage)};
        if (stage == Stage::allocate || stage == Stage::report) {
            continue;
        }
        auto *cmd = app.add_subcommand(name, "Run the " + name + " stage");
        common(cmd);
        stage_cmds.emplace_back(cmd, stage);
    }
    auto *allocate = app.add_subcommand("allocate", "Run the allocate stage, or solve a problem file");
    common(allocate);
    allocate->add_option("--method", o.method, "neyman | nso-max | bethel (with --inputs)");
    allocate->add_option("--inputs", o.inputs, "Problem JSON; --out is then the allocation CSV")
        ->check(CLI::ExistingFile);
    stage_cmds.emplace_back(allocate, Stage::allocate);

    for (auto &[cmd, stage] : stage_cmds) {
        if (stage == Stage::reduce) {
            cmd->add_option("--variable", o.variable, "employed | unemployed | hours | all");
            cmd->add_option("--alpha-grid", o.alpha_grid, "Reduction fractions")->delimiter(',');
            cmd->add_option("--thresholds", o.thresholds, "TOML file of gate thresholds")->check(CLI::ExistingFile);
        }
        if (stage == Stage::mc) {
            cmd->add_option("--replications", o.replications, "Monte Carlo replications");
            cmd->add_option("--parallelism", o.parallelism, "Worker threads (0 = automatic)");
        }
    }

    auto *report = app.add_subcommand("report", "Write tables and report.md for a run directory");
    common(report);
    report->add_flag("--strict", o.strict, "Exit with status 4 when an acceptance check fails");

    auto *pipeline = app.add_subcommand("pipeline", "Run every stage");
    common(pipeline);
    pipeline->add_option("--stage", o.stage, "Resume from this stage using persisted artifacts");
    pipeline->add_option("--parallelism", o.parallelism, "Monte Carlo worker threads (0 = automatic)");
    pipeline->add_option("--replications", o.replications, "Monte Carlo replications");
    pipeline->add_flag("--strict", o.strict, "Exit with status 4 when an acceptance check fails");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    RunConfig config;
    Stage first = Stage::synth;
    try {
        if (!o.stage.empty()) {
            first = stage_from_name(o.stage);
        }
        if (allocate->parsed() && !o.inputs.empty()) {
            allocate_from_problem(o);
            return kExitOk;
        }
        config = resolve_config(o);
    } catch (const std::exception &e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (report->parsed()) {
            run_stage(config, Stage::report);
            return print_checks(write_report(config.output, config.checks), o.strict);
        }
        if (pipeline->parsed()) {
            run_pipeline(config, first, Stage::report);
            return print_checks(write_report(config.output, config.checks), o.strict);
        }
        for (const auto &[cmd, stage] : stage_cmds) {
            if (cmd->parsed()) {
                run_stage(config, stage);
            }
        }
    } catch (const StageError &e) {
        std::cerr << e.what() << '\n';
        return kExitStage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStage;
    }
    return kExitOk;
}
