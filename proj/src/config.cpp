#include "stratopt/config.h"

#include "stratopt/population_io.h"
#include "stratopt/text_io.h"

#include <toml.hpp>

#include <set>
#include <stdexcept>

namespace stratopt {

using nlohmann::json;

RunConfig::RunConfig() {
    set_seed(seed);
    reduction.thresholds.targets = targets();
}

void RunConfig::set_seed(std::uint64_t value) {
    seed = value;
    population.seed = value;
    reduction.seed = value;
}

PrecisionTargets RunConfig::targets() const {
    return PrecisionTargets::uniform(population.domains, kNumVariables, national_target, domain_target);
}

void RunConfig::validate() const {
    population.validate();
    if (!(baseline_fraction > 0.0 && baseline_fraction <= 1.0)) {
        throw std::invalid_argument("baseline.fraction must lie in (0, 1]");
    }
    targets().validate();
    if (truth_proxy != "truth" && truth_proxy != "baseline") {
        throw std::invalid_argument("reduction.truth_proxy must be \"truth\" or \"baseline\"");
    }
    if (mc_replications < 1) {
        throw std::invalid_argument("mc.replications must be at least 1");
    }
    if (reduction.alpha_grid.empty() || reduction.nu_grid.empty() || reduction.s2_points < 1) {
        throw std::invalid_argument("reduction grids must be non-empty");
    }
    if (reduction.model.chains < 2 || reduction.model.iterations < 10 || reduction.model.burn_in < 0) {
        throw std::invalid_argument("hb: need chains >= 2, iterations >= 10, burn_in >= 0");
    }
    if (output.empty()) {
        throw std::invalid_argument("run.output must not be empty");
    }
}

namespace {

json node_to_json(const toml::node &node) {
    if (const auto *t = node.as_table()) {
        json out = json::object();
        for (const auto &[key, value] : *t) {
            out[std::string{key.str()}] = node_to_json(value);
        }
        return out;
    }
    if (const auto *a = node.as_array()) {
        json out = json::array();
        for (const auto &value : *a) {
            out.push_back(node_to_json(value));
        }
        return out;
    }
    if (const auto *v = node.as_integer()) {
        return v->get();
    }
    if (const auto *v = node.as_floating_point()) {
        return v->get();
    }
    if (const auto *v = node.as_boolean()) {
        return v->get();
    }
    if (const auto *v = node.as_string()) {
        return v->get();
    }
    throw std::invalid_argument("unsupported TOML value type (dates and times are not used)");
}

void reject_unknown(const json &table, const std::string &name, std::set<std::string> known) {
    if (!table.is_object()) {
        throw std::invalid_argument(name + " must be a table");
    }
    for (const auto &[key, value] : table.items()) {
        if (!known.contains(key)) {
            throw std::invalid_argument("unknown configuration key " + (name.empty() ? key : name + "." + key));
        }
    }
}

template <typename T> void read(const json &table, const char *key, T &target) {
    if (table.contains(key)) {
        target = table.at(key).get<T>();
    }
}

} // namespace

json toml_to_json(std::string_view toml_text, const std::string &source) {
    try {
        return node_to_json(toml::parse(toml_text, source));
    } catch (const toml::parse_error &e) {
        throw std::invalid_argument(source + ": " + std::string{e.description()});
    }
}

RunConfig run_config_from_json(const json &j, const std::filesystem::path &base_dir) {
    RunConfig c;
    try {
        reject_unknown(j, "", {"run", "population", "baseline", "targets", "allocation", "hb", "reduction", "mc",
                               "checks"});
        if (j.contains("run")) {
            const auto &r = j.at("run");
            reject_unknown(r, "run", {"seed", "output"});
            if (r.contains("seed")) {
                c.set_seed(r.at("seed").get<std::uint64_t>());
            }
            if (r.contains("output")) {
                c.output = r.at("output").get<std::string>();
            }
        }
        if (j.contains("population")) {
            json p = j.at("population");
            json base;
            std::string preset = "desk";
            if (p.contains("preset")) {
                preset = p.at("preset").get<std::string>();
                p.erase("preset");
            }
            if (preset == "desk") {
                base = to_json(PopulationConfig::desk_scale());
            } else if (preset == "full") {
                base = to_json(PopulationConfig{});
            } else {
                throw std::invalid_argument("population.preset must be \"desk\" or \"full\"");
            }
            base["seed"] = c.population.seed;
            if (p.contains("file")) {
                auto path = std::filesystem::path{p.at("file").get<std::string>()};
                if (path.is_relative()) {
                    path = base_dir / path;
                }
                p.erase("file");
                base.merge_patch(toml_to_json(read_text_file(path), path.string()));
            }
            reject_unknown(p, "population", {"N", "H", "D", "deff_range", "size_log_sd", "employment",
                                             "unemployment", "hours", "unit_noise_sd", "seed"});
            base.merge_patch(p);
            c.population = population_config_from_json(base);
        }
        if (j.contains("baseline")) {
            const auto &b = j.at("baseline");
            reject_unknown(b, "baseline", {"fraction"});
            read(b, "fraction", c.baseline_fraction);
        }
        if (j.contains("targets")) {
            const auto &t = j.at("targets");
            reject_unknown(t, "targets", {"national", "domain"});
            read(t, "national", c.national_target);
            read(t, "domain", c.domain_target);
        }
        if (j.contains("allocation")) {
            const auto &a = j.at("allocation");
            reject_unknown(a, "allocation", {"unit_cost", "n_min", "damping", "exponent", "residual_tolerance",
                                             "multiplier_tolerance", "max_iterations", "polish_interval"});
            read(a, "unit_cost", c.variance.unit_cost);
            read(a, "n_min", c.variance.n_min);
            read(a, "damping", c.bethel.damping);
            read(a, "exponent", c.bethel.exponent);
            read(a, "residual_tolerance", c.bethel.residual_tolerance);
            read(a, "multiplier_tolerance", c.bethel.multiplier_tolerance);
            read(a, "max_iterations", c.bethel.max_iterations);
            read(a, "polish_interval", c.bethel.polish_interval);
        }
        if (j.contains("hb")) {
            const auto &h = j.at("hb");
            reject_unknown(h, "hb", {"chains", "iterations", "burn_in", "tau2_beta", "deff_in_psi"});
            read(h, "chains", c.reduction.model.chains);
            read(h, "iterations", c.reduction.model.iterations);
            read(h, "burn_in", c.reduction.model.burn_in);
            read(h, "tau2_beta", c.reduction.model.tau2_beta);
            read(h, "deff_in_psi", c.reduction.model.deff_in_psi);
        }
        if (j.contains("reduction")) {
            const auto &r = j.at("reduction");
            reject_unknown(r, "reduction", {"alpha_grid", "nu_grid", "s2_points", "s2_log10_half_width", "default_nu",
                                            "rhat_limit", "national_are", "domain_mare", "domain_max_are",
                                            "truth_proxy"});
            read(r, "alpha_grid", c.reduction.alpha_grid);
            read(r, "nu_grid", c.reduction.nu_grid);
            read(r, "s2_points", c.reduction.s2_points);
            read(r, "s2_log10_half_width", c.reduction.s2_log10_half_width);
            read(r, "default_nu", c.reduction.default_nu);
            read(r, "rhat_limit", c.reduction.thresholds.rhat_limit);
            read(r, "national_are", c.reduction.thresholds.national_are);
            read(r, "domain_mare", c.reduction.thresholds.domain_mare);
            read(r, "domain_max_are", c.reduction.thresholds.domain_max_are);
            read(r, "truth_proxy", c.truth_proxy);
        }
        if (j.contains("mc")) {
            const auto &m = j.at("mc");
            reject_unknown(m, "mc", {"replications", "parallelism"});
            read(m, "replications", c.mc_replications);
            read(m, "parallelism", c.mc_parallelism);
        }
        if (j.contains("checks")) {
            const auto &k = j.at("checks");
            reject_unknown(k, "checks", {"min_alpha", "min_cv_pass_rate", "max_abs_national_bias"});
            read(k, "min_alpha", c.checks.min_alpha);
            read(k, "min_cv_pass_rate", c.checks.min_cv_pass_rate);
            read(k, "max_abs_national_bias", c.checks.max_abs_national_bias);
        }
    } catch (const json::exception &e) {
        throw std::invalid_argument(std::string{"configuration: "} + e.what());
    }
    c.reduction.thresholds.targets = c.targets();
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path &path) {
    if (!std::filesystem::exists(path)) {
        throw std::invalid_argument("configuration file not found: " + path.string());
    }
    return run_config_from_json(toml_to_json(read_text_file(path), path.string()), path.parent_path());
}

json to_json(const RunConfig &c) {
    json j;
    j["run"] = {{"seed", c.seed}, {"output", c.output.string()}};
    j["population"] = to_json(c.population);
    j["baseline"] = {{"fraction", c.baseline_fraction}};
    j["targets"] = {{"national", c.national_target}, {"domain", c.domain_target}};
    j["allocation"] = {{"unit_cost", c.variance.unit_cost},
                       {"n_min", c.variance.n_min},
                       {"damping", c.bethel.damping},
                       {"exponent", c.bethel.exponent},
                       {"residual_tolerance", c.bethel.residual_tolerance},
                       {"multiplier_tolerance", c.bethel.multiplier_tolerance},
                       {"max_iterations", c.bethel.max_iterations},
                       {"polish_interval", c.bethel.polish_interval}};
    const auto &m = c.reduction.model;
    j["hb"] = {{"chains", m.chains},
               {"iterations", m.iterations},
               {"burn_in", m.burn_in},
               {"tau2_beta", m.tau2_beta},
               {"deff_in_psi", m.deff_in_psi}};
    const auto &r = c.reduction;
    j["reduction"] = {{"alpha_grid", r.alpha_grid},
                      {"nu_grid", r.nu_grid},
                      {"s2_points", r.s2_points},
                      {"s2_log10_half_width", r.s2_log10_half_width},
                      {"default_nu", r.default_nu},
                      {"rhat_limit", r.thresholds.rhat_limit},
                      {"national_are", r.thresholds.national_are},
                      {"domain_mare", r.thresholds.domain_mare},
                      {"domain_max_are", r.thresholds.domain_max_are},
                      {"truth_proxy", c.truth_proxy}};
    j["mc"] = {{"replications", c.mc_replications}, {"parallelism", c.mc_parallelism}};
    j["checks"] = {{"min_alpha", c.checks.min_alpha},
                   {"min_cv_pass_rate", c.checks.min_cv_pass_rate},
                   {"max_abs_national_bias", c.checks.max_abs_national_bias}};
    return j;
}

} // namespace stratopt
