#include "stratopt/mc.h"
#include "stratopt/pipeline.h"
#include "stratopt/text_io.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace stratopt {

using nlohmann::json;
namespace fs = std::filesystem;

bool ReportResult::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto &c) { return c.pass; });
}

namespace {

/// One table: CSV cells plus a parallel mask of cells that miss their target.
struct Table {
    std::string title;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::vector<bool>> failing;

    void add(std::vector<std::string> cells, std::vector<bool> fails = {}) {
        fails.resize(cells.size(), false);
        rows.push_back(std::move(cells));
        failing.push_back(std::move(fails));
    }

    [[nodiscard]] std::string csv() const {
        CsvWriter w{header};
        for (const auto &r : rows) {
            w.row(r);
        }
        return w.str();
    }

    [[nodiscard]] std::string markdown() const {
        std::ostringstream out;
        out << "### " << title << "\n\n|";
        for (const auto &h : header) {
            out << ' ' << h << " |";
        }
        out << "\n|";
        for (std::size_t i = 0; i < header.size(); ++i) {
            out << (i == 0 ? " --- |" : " ---: |");
        }
        out << '\n';
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out << '|';
            for (std::size_t c = 0; c < rows[r].size(); ++c) {
                if (failing[r][c]) {
                    out << " **" << rows[r][c] << "** |";
                } else {
                    out << ' ' << rows[r][c] << " |";
                }
            }
            out << '\n';
        }
        out << '\n';
        return out.str();
    }
};

std::string cv_text(const json &value) { return value.is_null() ? "inf" : format_fixed(value.get<double>(), 4); }
double cv_value(const json &value) {
    return value.is_null() ? std::numeric_limits<double>::infinity() : value.get<double>();
}
std::string pct(double value) { return format_fixed(100.0 * value, 2) + "%"; }
std::string signed_pct(double value) { return (value >= 0.0 ? "+" : "") + pct(value); }

json load_json(const fs::path &dir, const char *name, Stage producer) {
    const auto path = dir / name;
    if (!fs::exists(path)) {
        throw std::invalid_argument("missing artifact " + path.string() + " (produced by stage " +
                                    std::string{stage_name(producer)} + ")");
    }
    try {
        return json::parse(read_text_file(path));
    } catch (const json::exception &e) {
        throw std::runtime_error("corrupt " + path.string() + ": " + e.what());
    }
}

const json &find_variable(const json &array, std::string_view name) {
    for (const auto &row : array) {
        if (row.at("variable").get<std::string>() == name) {
            return row;
        }
    }
    throw std::runtime_error("no entry for variable " + std::string{name});
}

/// National CV and worst domain CV from recheck area rows (index 0 national).
std::pair<double, double> hb_cvs(const json &report) {
    const auto &areas = report.at("areas");
    double worst = 0.0;
    for (std::size_t a = 1; a < areas.size(); ++a) {
        worst = std::max(worst, cv_value(areas[a].at("cv")));
    }
    return {cv_value(areas.at(0).at("cv")), worst};
}

} // namespace

ReportResult write_report(const fs::path &run_dir, const AcceptanceChecks &checks) {
    const auto manifest = read_manifest(run_dir);
    const auto alloc = load_json(run_dir, files::allocation_json, Stage::allocate);
    const auto red = load_json(run_dir, files::reduction_json, Stage::reduce);
    const auto raw_path = run_dir / files::mc_raw;
    if (!fs::exists(raw_path)) {
        throw std::invalid_argument("missing artifact " + raw_path.string() + " (produced by stage mc)");
    }
    const auto records = read_mc_raw_csv(raw_path.string());
    const double national_target = alloc.at("targets").at("national").get<double>();
    const double domain_target = alloc.at("targets").at("domain").get<double>();
    const auto &totals = alloc.at("totals");
    const int domains = static_cast<int>(red.at("recheck").at(0).at("areas").size()) - 1;
    const auto mc = aggregate(records, domains);
    const auto target_nat = "<= " + format_fixed(100.0 * national_target, 0) + "%";
    const auto target_dom = "<= " + format_fixed(100.0 * domain_target, 0) + "%";

    std::vector<Table> tables(8);
    tables[0] = {"Total sample sizes", {"Variable", "Neyman", "NSO Max", "Bethel", "HB Combined"}, {}, {}};
    tables[1] = {"National and worst-domain CVs under Neyman and NSO-max",
                 {"Variable", "Neyman National CV", "Neyman Worst-Domain CV", "NSO Max National CV",
                  "NSO Max Worst-Domain CV"},
                 {},
                 {}};
    tables[2] = {"National and worst-domain CVs after Bethel allocation",
                 {"Variable", "National CV", "National Target", "Worst-Domain Max CV", "Domain Target"},
                 {},
                 {}};
    tables[3] = {"National and worst-domain CVs after HB modelling",
                 {"Variable", "National CV", "National Target", "Worst-Domain Max CV", "Domain Target"},
                 {},
                 {}};
    tables[4] = {"Accuracy and coverage of HB estimates: single sample",
                 {"Variable", "Nat. Rel. Bias", "Domain MARE", "Domain Max ARE", "Cases", "Empirical Coverage"},
                 {},
                 {}};
    tables[5] = {"Monte Carlo accuracy of HB estimates",
                 {"Variable", "MC Mean Nat. Rel. Bias", "MC Mean Domain MARE", "MC Mean Domain Max ARE",
                  "Failure Rate"},
                 {},
                 {}};
    tables[6] = {"Monte Carlo credible interval coverage",
                 {"Variable", "MC Mean Coverage", "MC SD", "MC SD (Share)"},
                 {},
                 {}};
    tables[7] = {"Monte Carlo CV gate pass rate", {"Variable", "CV Gate Pass Rate"}, {}, {}};

    std::vector<CheckResult> results;
    results.push_back({"bethel_feasible", alloc.at("bethel").at("feasible").get<bool>(),
                       "Bethel total " + std::to_string(totals.at("bethel").get<std::int64_t>())});
    const double alpha_star = red.at("alpha_star").get<double>();
    results.push_back({"alpha_star", alpha_star >= checks.min_alpha,
                       "alpha* = " + format_fixed(alpha_star, 2) + " (minimum " + format_fixed(checks.min_alpha, 2) +
                           ")"});
    results.push_back({"reduction_recheck", red.at("recheck_pass").get<bool>(),
                       "all gates at alpha* = " + format_fixed(alpha_star, 2)});

    bool hb_cv_ok = true;
    std::string hb_cv_detail;
    for (const auto v : kAllVariables) {
        const auto name = variable_name(v);
        const auto label = std::string{variable_label(v)};
        const auto &ney = find_variable(alloc.at("cv").at("neyman"), name);
        const auto &nso = find_variable(alloc.at("cv").at("nso_max"), name);
        const auto &bet = find_variable(alloc.at("cv").at("bethel"), name);
        tables[0].add({label, std::to_string(totals.at("neyman").at(name).get<std::int64_t>()),
                       std::to_string(totals.at("nso_max").get<std::int64_t>()),
                       std::to_string(totals.at("bethel").get<std::int64_t>()),
                       std::to_string(red.at("n_hb").get<std::int64_t>())});

        auto fails = [&](const json &row) {
            return std::pair{cv_value(row.at("national_cv")) > national_target,
                             cv_value(row.at("worst_domain_cv")) > domain_target};
        };
        const auto [ney_n, ney_d] = fails(ney);
        const auto [nso_n, nso_d] = fails(nso);
        tables[1].add({label, cv_text(ney.at("national_cv")), cv_text(ney.at("worst_domain_cv")),
                       cv_text(nso.at("national_cv")), cv_text(nso.at("worst_domain_cv"))},
                      {false, ney_n, ney_d, nso_n, nso_d});
        const auto [bet_n, bet_d] = fails(bet);
        tables[2].add({label, cv_text(bet.at("national_cv")), target_nat, cv_text(bet.at("worst_domain_cv")), target_dom},
                      {false, bet_n, false, bet_d, false});

        const auto &re = find_variable(red.at("recheck"), name);
        const auto [hb_nat, hb_dom] = hb_cvs(re);
        const bool hb_n = !(hb_nat <= national_target);
        const bool hb_d = !(hb_dom <= domain_target);
        hb_cv_ok = hb_cv_ok && !hb_n && !hb_d;
        hb_cv_detail += label + " " + format_fixed(hb_nat, 4) + "/" + format_fixed(hb_dom, 4) + "; ";
        tables[3].add({label, format_fixed(hb_nat, 4), target_nat, format_fixed(hb_dom, 4), target_dom},
                      {false, hb_n, false, hb_d, false});

        const int areas = static_cast<int>(re.at("areas").size());
        const int covered = re.at("coverage").get<int>();
        tables[4].add({label, signed_pct(re.at("national_bias").get<double>()), pct(re.at("mare").get<double>()),
                       pct(re.at("max_are").get<double>()), std::to_string(covered) + "/" + std::to_string(areas),
                       pct(static_cast<double>(covered) / areas)});

        const VariableMCSummary *s = nullptr;
        for (const auto &candidate : mc.variables) {
            if (candidate.variable == v) {
                s = &candidate;
            }
        }
        if (s == nullptr) {
            throw std::runtime_error("no Monte Carlo records for variable " + std::string{name});
        }
        const bool bias_ok = s->usable > 0 && std::abs(s->mean_national_bias) <= checks.max_abs_national_bias;
        const bool pass_ok = s->usable > 0 && s->cv_pass_rate >= checks.min_cv_pass_rate;
        tables[5].add({label, signed_pct(s->mean_national_bias), pct(s->mean_mare), pct(s->mean_max_are),
                       pct(s->failure_rate)},
                      {false, !bias_ok, false, false, false});
        tables[6].add({label, pct(s->mean_coverage), format_fixed(s->coverage_indicator_sd, 3),
                       format_fixed(s->coverage_share_sd, 3)});
        tables[7].add({label, pct(s->cv_pass_rate)}, {false, !pass_ok});
        results.push_back({"mc_cv_pass_rate_" + std::string{name}, pass_ok,
                           pct(s->cv_pass_rate) + " (minimum " + pct(checks.min_cv_pass_rate) + ")"});
        results.push_back({"mc_national_bias_" + std::string{name}, bias_ok,
                           signed_pct(s->mean_national_bias) + " (limit " + pct(checks.max_abs_national_bias) + ")"});
    }
    results.insert(results.begin() + 3, CheckResult{"hb_cv_targets", hb_cv_ok, hb_cv_detail});

    fs::create_directories(run_dir / "tables");
    for (std::size_t t = 0; t < tables.size(); ++t) {
        write_text_file(run_dir / files::tables[t], tables[t].csv());
    }

    std::ostringstream md;
    md << "# Run report\n\n";
    md << "- Tool: " << manifest.tool_version << "\n";
    md << "- Seed: " << manifest.seed << "\n";
    md << "- Config hash: `" << manifest.config_hash << "`\n";
    md << "- Monte Carlo replications: " << mc.replications << "\n\n";
    md << "## Acceptance checks\n\n| Check | Result | Detail |\n| --- | --- | --- |\n";
    for (const auto &c : results) {
        md << "| " << c.name << " | " << (c.pass ? "PASS" : "**FAIL**") << " | " << c.detail << " |\n";
    }
    md << "\n## Tables\n\nBold cells miss their target.\n\n";
    for (std::size_t t = 0; t < tables.size(); ++t) {
        tables[t].title = "T" + std::to_string(t + 1) + ". " + tables[t].title;
        md << tables[t].markdown();
    }
    const auto warnings = red.at("warnings");
    if (!warnings.empty() || !alloc.at("warnings").empty()) {
        md << "## Warnings\n\n";
        for (const auto &w : alloc.at("warnings")) {
            md << "- " << w.get<std::string>() << "\n";
        }
        for (const auto &w : warnings) {
            md << "- " << w.get<std::string>() << "\n";
        }
    }
    ReportResult out{md.str(), std::move(results)};
    write_text_file(run_dir / files::report, out.markdown);
    return out;
}

} // namespace stratopt
