#include "stratopt/reduction.h"

#include "stratopt/numeric.h"
#include "stratopt/text_io.h"

#include <json.hpp>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stratopt {

void GateThresholds::validate() const {
    targets.validate();
    if (!(rhat_limit > 0.0) || !(national_are > 0.0) || !(domain_mare > 0.0) || !(domain_max_are > 0.0)) {
        throw std::invalid_argument("gate thresholds must be positive");
    }
}

TruthProxy TruthProxy::from_truth(const TruthRegistry &truth) {
    TruthProxy p;
    for (const auto v : kAllVariables) {
        auto &m = p.area_means[static_cast<std::size_t>(index_of(v))];
        for (int a = 0; a <= truth.domain_count(); ++a) {
            m.push_back(truth.area(a, v).mean);
        }
    }
    return p;
}

TruthProxy TruthProxy::from_direct(std::span<const DirectEstimate> estimates, int domains) {
    TruthProxy p;
    for (auto &m : p.area_means) {
        m.assign(static_cast<std::size_t>(domains + 1), std::numeric_limits<double>::quiet_NaN());
    }
    for (const auto &e : estimates) {
        p.area_means[static_cast<std::size_t>(index_of(e.variable))].at(static_cast<std::size_t>(e.area)) = e.mean;
    }
    return p;
}

Family family_for(Variable v) noexcept { return is_binary(v) ? Family::binomial_logit : Family::gaussian_area; }

Eigen::MatrixXd covariate_matrix(const SyntheticPopulation &population, Variable v) {
    const int H = population.strata_count();
    const auto k = static_cast<std::size_t>(index_of(v));
    Eigen::MatrixXd z(H, 3);
    for (int h = 0; h < H; ++h) {
        const auto &s = population.stratum(h);
        z(h, 0) = 1.0;
        z(h, 1) = s.covariate_means[k][0];
        z(h, 2) = s.covariate_means[k][1];
    }
    for (Eigen::Index j = 1; j < 3; ++j) {
        z.col(j).array() -= z.col(j).mean();
    }
    return z;
}

HBSpec make_spec(const SyntheticPopulation &population, Variable v, const PriorSetting &prior,
                 const ModelSettings &model, std::uint64_t seed) {
    HBSpec spec;
    spec.family = family_for(v);
    spec.z = covariate_matrix(population, v);
    spec.tau2_beta = model.tau2_beta;
    spec.nu = prior.nu;
    spec.s2 = prior.s2;
    spec.chains = model.chains;
    spec.iterations = model.iterations;
    spec.burn_in = model.burn_in;
    spec.seed = seed;
    return spec;
}

AreaData make_area_data(const Sample &sample, const SyntheticPopulation &population, Variable v, bool deff_in_psi) {
    AreaData data;
    data.domains = population.domain_count();
    const auto strata = stratum_estimates(sample, population, v, {deff_in_psi});
    for (const auto &s : strata) {
        data.weights.push_back(static_cast<double>(s.N));
        data.domain.push_back(s.domain);
        if (is_binary(v)) {
            data.trials.push_back(static_cast<double>(s.n));
            data.y.push_back(round_half_even(s.mean * static_cast<double>(s.n)));
        } else {
            data.theta_hat.push_back(s.mean);
            // A census stratum has psi = 0; keep it positive but negligible.
            data.psi.push_back(std::max(s.psi, 1e-12 * std::max(1.0, s.s2)));
        }
    }
    return data;
}

double between_variance_estimate(const AreaData &data, const Eigen::MatrixXd &z, Family family) {
    const Eigen::Index H = z.rows();
    const Eigen::Index p = z.cols();
    Eigen::VectorXd response(H);
    Eigen::VectorXd psi(H);
    for (Eigen::Index h = 0; h < H; ++h) {
        const auto hu = static_cast<std::size_t>(h);
        if (family == Family::binomial_logit) {
            const double pt = (data.y[hu] + 0.5) / (data.trials[hu] + 1.0);
            response(h) = logit(pt);
            psi(h) = 1.0 / (data.trials[hu] * pt * (1.0 - pt));
        } else {
            response(h) = data.theta_hat[hu];
            psi(h) = data.psi[hu];
        }
    }
    const double floor = 0.05 * psi.mean();
    if (H <= p) {
        return std::max(floor, psi.mean());
    }
    const Eigen::MatrixXd ztz_inv = (z.transpose() * z).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd hat = z * ztz_inv * z.transpose();
    const Eigen::VectorXd resid = response - hat * response;
    double adjust = 0.0;
    for (Eigen::Index h = 0; h < H; ++h) {
        adjust += (1.0 - hat(h, h)) * psi(h);
    }
    const double estimate = (resid.squaredNorm() - adjust) / static_cast<double>(H - p);
    return std::max(floor, estimate);
}

AreaMetrics area_metrics(const PosteriorSummary &summary, const TruthProxy &proxy, Variable v,
                         const PrecisionTargets &targets) {
    AreaMetrics m;
    const auto areas = summary.areas.size();
    const int k = index_of(v);
    m.worst_cv_margin = -std::numeric_limits<double>::infinity();
    double domain_sum = 0.0;
    for (std::size_t a = 0; a < areas; ++a) {
        const auto &s = summary.areas[a];
        const double truth = proxy.at(v, static_cast<int>(a));
        const double cv = s.mean > 0.0 ? s.sd / s.mean : std::numeric_limits<double>::infinity();
        const double are = std::abs(s.mean - truth) / std::abs(truth);
        m.estimate.push_back(s.mean);
        m.cv.push_back(cv);
        m.are.push_back(are);
        const bool covered = s.lower <= truth && truth <= s.upper;
        m.covered.push_back(covered);
        m.coverage += covered ? 1 : 0;
        const double target = targets(static_cast<int>(a), k);
        if (cv - target > m.worst_cv_margin) {
            m.worst_cv_margin = cv - target;
        }
        if (a == 0 || cv > m.worst_cv) {
            m.worst_cv = cv;
            m.worst_cv_area = static_cast<int>(a);
        }
        m.cv_pass = m.cv_pass && cv <= target;
        if (a == 0) {
            m.national_bias = (s.mean - truth) / truth;
        } else {
            domain_sum += are;
            m.max_are = std::max(m.max_are, are);
        }
    }
    m.mare = areas > 1 ? domain_sum / static_cast<double>(areas - 1) : 0.0;
    return m;
}

GateReport gate_report(Variable v, double alpha, std::int64_t sample_size, const PosteriorSummary &summary,
                       const TruthProxy &proxy, const GateThresholds &thresholds) {
    GateReport r;
    r.variable = v;
    r.alpha = alpha;
    r.sample_size = sample_size;
    r.metrics = area_metrics(summary, proxy, v, thresholds.targets);
    const auto &m = r.metrics;
    r.cv_pass = m.cv_pass;
    r.worst_cv = m.worst_cv;
    r.worst_cv_area = m.worst_cv_area;
    r.rhat_max = summary.rhat_max;
    r.convergence_pass = summary.rhat_max <= thresholds.rhat_limit;
    r.national_are = m.are.front();
    r.national_pass = r.national_are <= thresholds.national_are;
    r.mare = m.mare;
    r.max_are = m.max_are;
    r.domain_pass = m.mare <= thresholds.domain_mare && m.max_are <= thresholds.domain_max_are;
    r.coverage = m.coverage;
    r.national_bias = m.national_bias;
    r.eligible = r.cv_pass && r.convergence_pass && r.national_pass && r.domain_pass;
    return r;
}

GateReport evaluate_gates(Variable v, double alpha, const Sample &master, const SyntheticPopulation &population,
                          const TruthProxy &proxy, const PriorSetting &prior, const ModelSettings &model,
                          const GateThresholds &thresholds, RandomStream subsample_stream, std::uint64_t fit_seed) {
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("evaluate_gates: alpha must lie in [0, 1)");
    }
    const Sample sub = alpha == 0.0 ? master : nested_subsample(master, 1.0 - alpha, subsample_stream);
    try {
        const auto data = make_area_data(sub, population, v, model.deff_in_psi);
        const auto spec = make_spec(population, v, prior, model, fit_seed);
        const auto fit = fit_hb(spec, data);
        return gate_report(v, alpha, sub.total(), fit.summary, proxy, thresholds);
    } catch (const std::exception &e) {
        GateReport r;
        r.variable = v;
        r.alpha = alpha;
        r.sample_size = sub.total();
        r.rhat_max = std::numeric_limits<double>::infinity();
        r.failure = e.what();
        return r;
    }
}

AlphaSearch alpha_star_search(Variable v, std::span<const double> grid,
                              const std::function<GateReport(double)> &evaluate) {
    if (grid.empty()) {
        throw std::invalid_argument("alpha_star_search: empty grid");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0 && grid[i] < 1.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
            throw std::invalid_argument("alpha_star_search: grid must be ascending within [0, 1)");
        }
    }
    AlphaSearch out;
    out.variable = v;
    out.reports.resize(grid.size());
    tbb::parallel_for(std::size_t{0}, grid.size(), [&](std::size_t i) { out.reports[i] = evaluate(grid[i]); });
    bool seen_fail = false;
    bool any = false;
    for (const auto &r : out.reports) {
        if (r.eligible) {
            out.alpha_star = r.alpha;
            any = true;
            out.non_monotone = out.non_monotone || seen_fail;
        } else {
            seen_fail = true;
        }
    }
    const std::string name{variable_name(v)};
    if (!any) {
        out.none_eligible = true;
        out.alpha_star = 0.0;
        out.warnings.push_back(name + ": no grid point passes all gates; alpha* set to 0");
    }
    if (!out.reports.front().eligible && grid.front() == 0.0) {
        out.warnings.push_back(name + ": the unreduced master sample fails the gates");
    }
    if (out.non_monotone) {
        out.warnings.push_back(name + ": eligibility is not monotone in alpha");
    }
    return out;
}

MinimaxResult minimax_combine(std::span<const double> alphas, std::int64_t n_star) {
    if (alphas.empty()) {
        throw std::invalid_argument("minimax_combine: no variables");
    }
    MinimaxResult r;
    r.alpha = *std::min_element(alphas.begin(), alphas.end());
    r.n_hb = round_to_count((1.0 - r.alpha) * static_cast<double>(n_star));
    return r;
}

PriorGridResult select_prior(std::vector<PriorCandidate> candidates, int areas) {
    if (candidates.empty()) {
        throw std::invalid_argument("select_prior: no candidates");
    }
    PriorGridResult out;
    out.candidates = std::move(candidates);
    const int needed = static_cast<int>(std::ceil(0.95 * areas - 1e-9));
    auto better = [](const PriorCandidate &a, const PriorCandidate &b) {
        if (a.mare != b.mare) {
            return a.mare < b.mare;
        }
        if (a.max_are != b.max_are) {
            return a.max_are < b.max_are;
        }
        return a.prior.nu < b.prior.nu;
    };
    bool found = false;
    for (std::size_t i = 0; i < out.candidates.size(); ++i) {
        const auto &c = out.candidates[i];
        if (c.coverage >= needed && (!found || better(c, out.candidates[out.selected]))) {
            out.selected = i;
            found = true;
        }
    }
    if (!found) {
        out.fallback = true;
        for (std::size_t i = 1; i < out.candidates.size(); ++i) {
            const auto &c = out.candidates[i];
            const auto &s = out.candidates[out.selected];
            if (c.coverage > s.coverage || (c.coverage == s.coverage && better(c, s))) {
                out.selected = i;
            }
        }
        out.warning = "no prior candidate reaches " + std::to_string(needed) + "/" + std::to_string(areas) +
                      " coverage; selected the best-covering candidate";
    }
    return out;
}

PriorGridResult prior_grid_search(Variable v, std::span<const double> nu_grid, std::span<const double> s2_grid,
                                  int areas, const std::function<PriorCandidate(const PriorSetting &)> &evaluate) {
    if (nu_grid.empty() || s2_grid.empty()) {
        throw std::invalid_argument("prior_grid_search: empty grid");
    }
    std::vector<PriorSetting> settings;
    for (const double nu : nu_grid) {
        for (const double s2 : s2_grid) {
            settings.push_back({nu, s2});
        }
    }
    std::vector<PriorCandidate> candidates(settings.size());
    tbb::parallel_for(std::size_t{0}, settings.size(), [&](std::size_t i) { candidates[i] = evaluate(settings[i]); });
    auto out = select_prior(std::move(candidates), areas);
    out.variable = v;
    return out;
}

std::vector<double> log_spaced_grid(double centre, int points, double half_width) {
    if (!(centre > 0.0) || points < 1) {
        throw std::invalid_argument("log_spaced_grid: centre must be positive and points >= 1");
    }
    std::vector<double> out;
    const double step = points > 1 ? 2.0 * half_width / (points - 1) : 0.0;
    for (int i = 0; i < points; ++i) {
        const double e = points > 1 ? -half_width + step * i : 0.0;
        out.push_back(centre * std::pow(10.0, e));
    }
    return out;
}

std::vector<double> default_alpha_grid() {
    std::vector<double> out;
    for (int i = 0; i < 20; ++i) {
        out.push_back(i * 0.05);
    }
    return out;
}

const VariableReduction &ReductionResult::of(Variable v) const {
    for (const auto &r : variables) {
        if (r.variable == v) {
            return r;
        }
    }
    throw std::invalid_argument("reduction result has no entry for " + std::string{variable_name(v)});
}

namespace {

std::uint64_t fit_seed(std::uint64_t seed, Variable v, std::string_view phase, std::size_t index) {
    return RandomStream::derive(seed, "reduction/fit")
        .child(variable_name(v))
        .child(phase)
        .child(static_cast<std::uint64_t>(index))
        .key();
}

} // namespace

ReductionResult run_reduction(const Sample &master, const Sample &baseline, const SyntheticPopulation &population,
                              const TruthProxy &proxy, const ReductionSettings &settings) {
    settings.thresholds.validate();
    const auto &grid = settings.alpha_grid;
    const auto sub_stream = RandomStream::derive(settings.seed, "reduction/subsample");
    ReductionResult result;
    result.n_star = master.total();

    auto search = [&](Variable v, const PriorSetting &prior, std::string_view phase) {
        return alpha_star_search(v, grid, [&, phase](double alpha) {
            const auto idx = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), alpha) - grid.begin());
            return evaluate_gates(v, alpha, master, population, proxy, prior, settings.model, settings.thresholds,
                                  sub_stream, fit_seed(settings.seed, v, phase, idx));
        });
    };

    std::vector<double> initial_alphas;
    for (const auto v : settings.variables) {
        VariableReduction r;
        r.variable = v;
        const auto data = make_area_data(baseline, population, v, settings.model.deff_in_psi);
        r.s2_centre = between_variance_estimate(data, covariate_matrix(population, v), family_for(v));
        r.initial = search(v, {settings.default_nu, r.s2_centre}, "initial");
        initial_alphas.push_back(r.initial.alpha_star);
        result.variables.push_back(std::move(r));
    }
    result.initial_alpha = minimax_combine(initial_alphas, result.n_star).alpha;

    const int areas = population.domain_count() + 1;
    std::vector<double> final_alphas;
    for (auto &r : result.variables) {
        const auto s2_grid = log_spaced_grid(r.s2_centre, settings.s2_points, settings.s2_log10_half_width);
        const auto v = r.variable;
        std::vector<PriorSetting> order;
        for (const double nu : settings.nu_grid) {
            for (const double s2 : s2_grid) {
                order.push_back({nu, s2});
            }
        }
        r.priors = prior_grid_search(v, settings.nu_grid, s2_grid, areas, [&](const PriorSetting &prior) {
            std::size_t idx = 0;
            while (idx < order.size() && !(order[idx].nu == prior.nu && order[idx].s2 == prior.s2)) {
                ++idx;
            }
            const auto rep = evaluate_gates(v, result.initial_alpha, master, population, proxy, prior, settings.model,
                                            settings.thresholds, sub_stream, fit_seed(settings.seed, v, "prior", idx));
            return PriorCandidate{prior, rep.coverage, rep.national_bias, rep.mare, rep.max_are, rep.rhat_max,
                                  rep.failure};
        });
        if (!r.priors.warning.empty()) {
            result.warnings.push_back(std::string{variable_name(v)} + ": " + r.priors.warning);
        }
        r.final = search(v, r.priors.best().prior, "final");
        for (const auto &w : r.final.warnings) {
            result.warnings.push_back(w);
        }
        final_alphas.push_back(r.final.alpha_star);
    }
    result.alpha_star = minimax_combine(final_alphas, result.n_star).alpha;

    // Re-check every variable at the combined fraction; step down on failure.
    auto pos = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), result.alpha_star) - grid.begin());
    if (pos == grid.size()) {
        pos = 0;
    }
    while (true) {
        const double alpha = grid[pos];
        result.recheck.clear();
        bool ok = true;
        for (const auto &r : result.variables) {
            auto rep = evaluate_gates(r.variable, alpha, master, population, proxy, r.priors.best().prior,
                                      settings.model, settings.thresholds, sub_stream,
                                      fit_seed(settings.seed, r.variable, "final", pos));
            ok = ok && rep.eligible;
            result.recheck.push_back(std::move(rep));
        }
        if (ok || pos == 0) {
            result.alpha_star = alpha;
            result.recheck_pass = ok;
            break;
        }
        result.warnings.push_back("re-check failed at alpha = " + format_double(alpha) + "; stepping down");
        --pos;
    }
    if (!result.recheck_pass) {
        result.warnings.push_back("the combined re-check fails even at the smallest grid fraction");
    }
    result.n_hb = minimax_combine(std::vector<double>{result.alpha_star}, result.n_star).n_hb;
    return result;
}

std::string gate_reports_csv(std::span<const GateReport> reports) {
    CsvWriter csv({"variable", "alpha", "n", "cv_pass", "worst_cv", "worst_cv_area", "convergence_pass",
                   "rhat_max", "national_pass", "national_are", "domain_pass", "mare", "max_are", "coverage",
                   "eligible", "failure"});
    auto flag = [](bool b) { return std::string{b ? "1" : "0"}; };
    for (const auto &r : reports) {
        std::string failure = r.failure;
        std::replace(failure.begin(), failure.end(), ',', ';');
        csv.row({std::string{variable_name(r.variable)}, format_double(r.alpha), std::to_string(r.sample_size),
                 flag(r.cv_pass), format_double(r.worst_cv), std::to_string(r.worst_cv_area),
                 flag(r.convergence_pass), format_double(r.rhat_max), flag(r.national_pass),
                 format_double(r.national_are), flag(r.domain_pass), format_double(r.mare), format_double(r.max_are),
                 std::to_string(r.coverage), flag(r.eligible), failure});
    }
    return csv.str();
}

std::string prior_grid_csv(std::span<const PriorGridResult> grids) {
    CsvWriter csv({"variable", "nu", "s2", "coverage", "national_bias", "mare", "max_are", "rhat_max", "selected"});
    for (const auto &g : grids) {
        for (std::size_t i = 0; i < g.candidates.size(); ++i) {
            const auto &c = g.candidates[i];
            csv.row({std::string{variable_name(g.variable)}, format_double(c.prior.nu), format_double(c.prior.s2),
                     std::to_string(c.coverage), format_double(c.national_bias), format_double(c.mare),
                     format_double(c.max_are), format_double(c.rhat_max), i == g.selected ? "1" : "0"});
        }
    }
    return csv.str();
}

std::string reduction_json(const ReductionResult &result) {
    using nlohmann::json;
    auto finite = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    auto report_json = [&](const GateReport &r) {
        json areas = json::array();
        for (std::size_t a = 0; a < r.metrics.estimate.size(); ++a) {
            areas.push_back({{"area", a},
                             {"estimate", r.metrics.estimate[a]},
                             {"cv", finite(r.metrics.cv[a])},
                             {"are", r.metrics.are[a]},
                             {"covered", static_cast<bool>(r.metrics.covered[a])}});
        }
        return json{{"variable", variable_name(r.variable)},
                    {"alpha", r.alpha},
                    {"n", r.sample_size},
                    {"cv_pass", r.cv_pass},
                    {"worst_cv", finite(r.worst_cv)},
                    {"convergence_pass", r.convergence_pass},
                    {"rhat_max", finite(r.rhat_max)},
                    {"national_pass", r.national_pass},
                    {"national_are", r.national_are},
                    {"national_bias", r.national_bias},
                    {"domain_pass", r.domain_pass},
                    {"mare", r.mare},
                    {"max_are", r.max_are},
                    {"coverage", r.coverage},
                    {"eligible", r.eligible},
                    {"failure", r.failure},
                    {"areas", areas}};
    };
    json j;
    j["n_star"] = result.n_star;
    j["initial_alpha"] = result.initial_alpha;
    j["alpha_star"] = result.alpha_star;
    j["n_hb"] = result.n_hb;
    j["recheck_pass"] = result.recheck_pass;
    j["warnings"] = result.warnings;
    j["variables"] = json::array();
    for (const auto &r : result.variables) {
        const auto &best = r.priors.best();
        j["variables"].push_back({{"variable", variable_name(r.variable)},
                                  {"s2_centre", r.s2_centre},
                                  {"initial_alpha_star", r.initial.alpha_star},
                                  {"alpha_star", r.final.alpha_star},
                                  {"non_monotone", r.final.non_monotone},
                                  {"prior", {{"nu", best.prior.nu}, {"s2", best.prior.s2}}},
                                  {"prior_fallback", r.priors.fallback}});
    }
    j["recheck"] = json::array();
    for (const auto &r : result.recheck) {
        j["recheck"].push_back(report_json(r));
    }
    return j.dump(2);
}

} // namespace stratopt
