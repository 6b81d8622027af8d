#include "stratopt/mc.h"

#include "stratopt/numeric.h"
#include "stratopt/text_io.h"

#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <cmath>
#include <map>
#include <stdexcept>

namespace stratopt {

void MCConfig::validate() const {
    if (replications < 1) {
        throw std::invalid_argument("mc: replications must be at least 1");
    }
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("mc: alpha must lie in [0, 1)");
    }
    if (master.sizes.empty()) {
        throw std::invalid_argument("mc: master allocation is empty");
    }
    if (variables.empty()) {
        throw std::invalid_argument("mc: no variables");
    }
    if (parallelism < 0) {
        throw std::invalid_argument("mc: parallelism must be non-negative");
    }
    targets.validate();
}

ReplicationRecord run_replication(int b, const MCConfig &config, const SyntheticPopulation &population,
                                  const TruthProxy &truth) {
    const auto stream = RandomStream::derive(config.base_seed, "mc").child(static_cast<std::uint64_t>(b));
    ReplicationRecord rec;
    rec.replication = b;
    const auto master = draw_stratified(population, config.master, stream.child("master"),
                                        "mc/" + std::to_string(b));
    rec.master_size = master.total();
    const auto sub = config.alpha == 0.0 ? master : nested_subsample(master, 1.0 - config.alpha, stream.child("subsample"));
    rec.subsample_size = sub.total();
    for (const auto v : config.variables) {
        VariableRecord vr;
        vr.variable = v;
        try {
            const auto data = make_area_data(sub, population, v, config.model.deff_in_psi);
            const auto spec = make_spec(population, v, config.priors[static_cast<std::size_t>(index_of(v))],
                                        config.model, stream.child("fit").child(variable_name(v)).key());
            const auto fit = fit_hb(spec, data);
            const auto m = area_metrics(fit.summary, truth, v, config.targets);
            vr.rhat_max = fit.summary.rhat_max;
            vr.converged = fit.summary.rhat_max <= config.rhat_limit;
            vr.cv_pass = m.cv_pass;
            vr.national_bias = m.national_bias;
            for (std::size_t a = 0; a < m.estimate.size(); ++a) {
                vr.areas.push_back({static_cast<int>(a), static_cast<bool>(m.covered[a]), m.estimate[a], m.are[a], m.cv[a]});
            }
            if (!vr.converged) {
                vr.failure = "rhat_max " + format_double(vr.rhat_max) + " above limit";
            }
        } catch (const std::exception &e) {
            vr.converged = false;
            vr.failure = e.what();
        }
        rec.variables.push_back(std::move(vr));
    }
    return rec;
}

std::vector<ReplicationRecord> run_mc(const MCConfig &config, const SyntheticPopulation &population,
                                      const TruthProxy &truth) {
    config.validate();
    std::vector<ReplicationRecord> records(static_cast<std::size_t>(config.replications));
    auto body = [&] {
        tbb::parallel_for(0, config.replications, [&](int b) {
            records[static_cast<std::size_t>(b)] = run_replication(b + 1, config, population, truth);
        });
    };
    if (config.parallelism > 0) {
        tbb::task_arena arena(config.parallelism);
        arena.execute(body);
    } else {
        body();
    }
    return records;
}

const VariableMCSummary &MCResult::of(Variable v) const {
    for (const auto &s : variables) {
        if (s.variable == v) {
            return s;
        }
    }
    throw std::invalid_argument("mc result has no entry for " + std::string{variable_name(v)});
}

MCResult aggregate(std::span<const ReplicationRecord> records, int domains) {
    if (records.empty()) {
        throw std::invalid_argument("mc aggregate: no replication records");
    }
    MCResult out;
    out.replications = static_cast<int>(records.size());
    out.domains = domains;
    const auto areas = static_cast<std::size_t>(domains + 1);
    for (std::size_t i = 0; i < records.front().variables.size(); ++i) {
        VariableMCSummary s;
        s.variable = records.front().variables[i].variable;
        s.coverage.assign(areas, 0.0);
        std::vector<double> shares;
        double covered_total = 0.0;
        for (const auto &rec : records) {
            const auto &vr = rec.variables.at(i);
            if (vr.variable != s.variable) {
                throw std::invalid_argument("mc aggregate: inconsistent variable order across records");
            }
            if (!vr.converged || vr.areas.size() != areas) {
                ++s.failures;
                continue;
            }
            ++s.usable;
            int covered = 0;
            double domain_sum = 0.0;
            double domain_max = 0.0;
            for (std::size_t a = 0; a < areas; ++a) {
                const auto &ar = vr.areas[a];
                s.coverage[a] += ar.covered ? 1.0 : 0.0;
                covered += ar.covered ? 1 : 0;
                if (a > 0) {
                    domain_sum += ar.are;
                    domain_max = std::max(domain_max, ar.are);
                }
            }
            covered_total += covered;
            shares.push_back(static_cast<double>(covered) / static_cast<double>(areas));
            s.mean_national_bias += vr.national_bias;
            s.mean_mare += domain_sum / static_cast<double>(domains);
            s.mean_max_are += domain_max;
            s.cv_pass_rate += vr.cv_pass ? 1.0 : 0.0;
        }
        s.failure_rate = static_cast<double>(s.failures) / static_cast<double>(records.size());
        if (s.usable > 0) {
            const double u = static_cast<double>(s.usable);
            for (auto &c : s.coverage) {
                c /= u;
            }
            s.mean_coverage = covered_total / (u * static_cast<double>(areas));
            s.coverage_share_sd = std::sqrt(sample_variance(shares));
            s.coverage_indicator_sd = std::sqrt(s.mean_coverage * (1.0 - s.mean_coverage));
            s.mean_national_bias /= u;
            s.mean_mare /= u;
            s.mean_max_are /= u;
            s.cv_pass_rate /= u;
        }
        out.variables.push_back(std::move(s));
    }
    return out;
}

std::string mc_raw_csv(std::span<const ReplicationRecord> records) {
    CsvWriter csv({"replication", "variable", "area", "covered", "estimate", "ARE", "cv", "cv_pass", "rhat_max",
                   "national_bias", "converged"});
    for (const auto &rec : records) {
        for (const auto &vr : rec.variables) {
            const std::string name{variable_name(vr.variable)};
            if (vr.areas.empty()) {
                csv.row({std::to_string(rec.replication), name, "-1", "0", "nan", "nan", "nan", "0",
                         format_double(vr.rhat_max), "nan", "0"});
                continue;
            }
            for (const auto &a : vr.areas) {
                csv.row({std::to_string(rec.replication), name, std::to_string(a.area), a.covered ? "1" : "0",
                         format_double(a.estimate), format_double(a.are), format_double(a.cv), vr.cv_pass ? "1" : "0",
                         format_double(vr.rhat_max), format_double(vr.national_bias), vr.converged ? "1" : "0"});
            }
        }
    }
    return csv.str();
}

std::vector<ReplicationRecord> read_mc_raw_csv(const std::string &path) {
    const auto table = read_csv(path);
    const auto c_rep = table.column("replication");
    const auto c_var = table.column("variable");
    const auto c_area = table.column("area");
    const auto c_cov = table.column("covered");
    const auto c_est = table.column("estimate");
    const auto c_are = table.column("ARE");
    const auto c_cv = table.column("cv");
    const auto c_pass = table.column("cv_pass");
    const auto c_rhat = table.column("rhat_max");
    const auto c_bias = table.column("national_bias");
    const auto c_conv = table.column("converged");
    std::vector<ReplicationRecord> out;
    for (const auto &row : table.rows) {
        const auto rep = static_cast<int>(parse_int(row.at(c_rep)));
        if (out.empty() || out.back().replication != rep) {
            out.push_back({});
            out.back().replication = rep;
        }
        auto &rec = out.back();
        const auto v = variable_from_name(row.at(c_var));
        if (rec.variables.empty() || rec.variables.back().variable != v) {
            VariableRecord vr;
            vr.variable = v;
            vr.rhat_max = parse_double(row.at(c_rhat));
            vr.cv_pass = row.at(c_pass) == "1";
            vr.converged = row.at(c_conv) == "1";
            vr.national_bias = parse_double(row.at(c_bias));
            rec.variables.push_back(std::move(vr));
        }
        const auto area = static_cast<int>(parse_int(row.at(c_area)));
        if (area >= 0) {
            rec.variables.back().areas.push_back({area, row.at(c_cov) == "1", parse_double(row.at(c_est)),
                                                  parse_double(row.at(c_are)), parse_double(row.at(c_cv))});
        }
    }
    return out;
}

std::string mc_summary_csv(const MCResult &result) {
    CsvWriter csv({"variable", "usable", "failures", "failure_rate", "mean_coverage", "coverage_share_sd",
                   "coverage_indicator_sd", "mean_national_bias", "mean_mare", "mean_max_are", "cv_pass_rate"});
    for (const auto &s : result.variables) {
        csv.row({std::string{variable_name(s.variable)}, std::to_string(s.usable), std::to_string(s.failures),
                 format_double(s.failure_rate), format_double(s.mean_coverage), format_double(s.coverage_share_sd),
                 format_double(s.coverage_indicator_sd), format_double(s.mean_national_bias),
                 format_double(s.mean_mare), format_double(s.mean_max_are), format_double(s.cv_pass_rate)});
    }
    return csv.str();
}

} // namespace stratopt
