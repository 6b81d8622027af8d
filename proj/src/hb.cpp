#include "stratopt/hb.h"

#include "stratopt/numeric.h"
#include "stratopt/rng.h"
#include "stratopt/text_io.h"

#include <json.hpp>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stratopt {

std::string_view family_name(Family family) noexcept {
    return family == Family::binomial_logit ? "binomial-logit" : "gaussian-area";
}

void HBSpec::validate() const {
    if (z.rows() == 0 || z.cols() == 0) {
        throw std::invalid_argument("hb spec: covariate matrix needs at least one column");
    }
    if (!(tau2_beta > 0.0)) {
        throw std::invalid_argument("hb spec: tau2_beta must be positive");
    }
    if (!(nu > 0.0) || !(s2 > 0.0)) {
        throw std::invalid_argument("hb spec: nu and s2 must be positive");
    }
    if (fixed_sigma2 && !(*fixed_sigma2 >= 0.0)) {
        throw std::invalid_argument("hb spec: fixed sigma2 must be non-negative");
    }
    if (chains < 2) {
        throw std::invalid_argument("hb spec: at least two chains are required");
    }
    if (iterations < 10 || burn_in < 0) {
        throw std::invalid_argument("hb spec: need at least 10 retained iterations and a non-negative burn-in");
    }
}

void AreaData::validate(Family family) const {
    const auto H = weights.size();
    if (H == 0) {
        throw std::invalid_argument("area data: no strata");
    }
    if (domain.size() != H) {
        throw std::invalid_argument("area data: domain map size mismatch");
    }
    for (std::size_t h = 0; h < H; ++h) {
        if (!(weights[h] > 0.0)) {
            throw std::invalid_argument("area data: weights must be positive");
        }
        if (domain[h] < 1 || domain[h] > domains) {
            throw std::invalid_argument("area data: domain id out of range");
        }
    }
    if (family == Family::binomial_logit) {
        if (y.size() != H || trials.size() != H) {
            throw std::invalid_argument("area data: binomial counts size mismatch");
        }
        for (std::size_t h = 0; h < H; ++h) {
            if (!(trials[h] >= 1.0) || !(y[h] >= 0.0) || y[h] > trials[h]) {
                throw std::invalid_argument("area data: stratum " + std::to_string(h) +
                                            " needs 0 <= y <= n and n >= 1");
            }
        }
    } else {
        if (theta_hat.size() != H || psi.size() != H) {
            throw std::invalid_argument("area data: direct estimates size mismatch");
        }
        for (std::size_t h = 0; h < H; ++h) {
            if (!(psi[h] > 0.0) || !std::isfinite(theta_hat[h])) {
                throw std::invalid_argument("area data: stratum " + std::to_string(h) +
                                            " needs psi > 0 and a finite direct estimate");
            }
        }
    }
}

namespace {

constexpr int kAdaptBatch = 50;
constexpr double kTargetAcceptance = 0.44;

struct Start {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    Eigen::VectorXd step_v;
};

/// Weighted least squares on the working responses with weights 1 / (var_h + sigma2).
Start weighted_fit(const Eigen::MatrixXd &z, const Eigen::VectorXd &response, const Eigen::VectorXd &var,
                   double sigma2, double tau2) {
    const Eigen::Index p = z.cols();
    const Eigen::VectorXd w = (var.array() + sigma2).inverse();
    Eigen::MatrixXd a = z.transpose() * w.asDiagonal() * z;
    a.diagonal().array() += 1.0 / tau2;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    Start s;
    s.beta = ldlt.solve(z.transpose() * w.asDiagonal() * response);
    s.se = ldlt.solve(Eigen::MatrixXd::Identity(p, p)).diagonal().cwiseMax(0.0).cwiseSqrt();
    return s;
}

Eigen::VectorXd draw_gaussian(const Eigen::MatrixXd &precision, const Eigen::VectorXd &linear,
                              RandomStream &rng) {
    const Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("hb: regression precision matrix is not positive definite");
    }
    const Eigen::VectorXd mean = llt.solve(linear);
    Eigen::VectorXd e(mean.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        e(i) = rng.normal();
    }
    return mean + llt.matrixU().solve(e);
}

/// beta | eta under eta = z beta + v, v ~ N(0, sigma2 I).
Eigen::VectorXd draw_beta_centred(const Eigen::MatrixXd &z, const Eigen::MatrixXd &ztz, const Eigen::VectorXd &eta,
                                  double sigma2, double tau2, RandomStream &rng) {
    Eigen::MatrixXd prec = ztz / sigma2;
    prec.diagonal().array() += 1.0 / tau2;
    return draw_gaussian(prec, z.transpose() * eta / sigma2, rng);
}

double draw_sigma2(const Eigen::VectorXd &v, double nu, double s2, RandomStream &rng) {
    const double dof = nu + static_cast<double>(v.size());
    return (nu * s2 + v.squaredNorm()) / rng.chi_square(dof);
}

/// Random-walk step size tuned in batches toward the target acceptance.
struct Adaptive {
    double log_step{0.0};
    int batch_accepted{0};
    int batch_count{0};
    long accepted{0};
    long proposed{0};

    [[nodiscard]] double step() const { return std::exp(log_step); }
    void record(bool accept, bool retained) {
        batch_accepted += accept ? 1 : 0;
        ++batch_count;
        if (retained) {
            ++proposed;
            accepted += accept ? 1 : 0;
        }
    }
    void adapt(int batch_index) {
        const double rate = static_cast<double>(batch_accepted) / static_cast<double>(batch_count);
        const double delta = std::min(0.25, 1.0 / std::sqrt(static_cast<double>(batch_index)));
        log_step += rate > kTargetAcceptance ? delta : -delta;
        batch_accepted = 0;
        batch_count = 0;
    }
};

double binomial_loglik(double y, double n, double eta) { return y * eta - n * log1pexp(eta); }

ChainDraws run_binomial_chain(const HBSpec &spec, const AreaData &data, const Start &start, int chain,
                              RandomStream rng) {
    const Eigen::Index H = spec.z.rows();
    const Eigen::Index p = spec.z.cols();
    const Eigen::MatrixXd &z = spec.z;
    const Eigen::MatrixXd ztz = z.transpose() * z;
    const bool fixed = spec.fixed_sigma2.has_value();
    double sigma2 = fixed ? *spec.fixed_sigma2 : spec.s2;
    const bool random_effect = sigma2 > 0.0;

    // Dispersed starting values around the weighted fit.
    RandomStream init = rng.child("init");
    rng = rng.child("sampler");
    const double spread = spec.chains > 1 ? -1.0 + 2.0 * chain / (spec.chains - 1.0) : 0.0;
    Eigen::VectorXd beta = start.beta;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double sign = init.uniform() < 0.5 ? -1.0 : 1.0;
        beta(j) += 2.0 * spread * sign * start.se(j);
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd zb = z * beta;

    std::vector<double> ll(static_cast<std::size_t>(H));
    for (Eigen::Index h = 0; h < H; ++h) {
        ll[static_cast<std::size_t>(h)] = binomial_loglik(data.y[static_cast<std::size_t>(h)],
                                                          data.trials[static_cast<std::size_t>(h)], zb(h));
        if (!std::isfinite(ll[static_cast<std::size_t>(h)])) {
            throw std::runtime_error("hb: non-finite log-posterior at initialisation (stratum " +
                                     std::to_string(h) + ")");
        }
    }

    std::vector<Adaptive> adapt_v(static_cast<std::size_t>(H));
    std::vector<Adaptive> adapt_b(static_cast<std::size_t>(p));
    for (Eigen::Index h = 0; h < H; ++h) {
        adapt_v[static_cast<std::size_t>(h)].log_step = std::log(start.step_v(h));
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        adapt_b[static_cast<std::size_t>(j)].log_step = std::log(std::max(2.4 * start.se(j), 1e-6));
    }

    ChainDraws out;
    out.beta.resize(spec.iterations, p);
    out.v.resize(spec.iterations, H);
    out.mean.resize(spec.iterations, H);
    out.sigma2.resize(static_cast<std::size_t>(spec.iterations));

    const int total = spec.burn_in + spec.iterations;
    Eigen::VectorXd zb_prop(H);
    std::vector<double> ll_prop(static_cast<std::size_t>(H));
    for (int it = 0; it < total; ++it) {
        const bool retained = it >= spec.burn_in;
        if (random_effect) {
            for (Eigen::Index h = 0; h < H; ++h) {
                const auto hu = static_cast<std::size_t>(h);
                auto &a = adapt_v[hu];
                const double prop = v(h) + a.step() * rng.normal();
                const double ll_new = binomial_loglik(data.y[hu], data.trials[hu], zb(h) + prop);
                const double log_ratio = ll_new - ll[hu] - (prop * prop - v(h) * v(h)) / (2.0 * sigma2);
                const bool accept = std::log(rng.uniform()) < log_ratio;
                if (accept) {
                    v(h) = prop;
                    ll[hu] = ll_new;
                }
                a.record(accept, retained);
            }
        }
        // Regression coefficients with the random effects held fixed.
        for (Eigen::Index j = 0; j < p; ++j) {
            auto &a = adapt_b[static_cast<std::size_t>(j)];
            const double delta = a.step() * rng.normal();
            const double prop = beta(j) + delta;
            double log_ratio = -(prop * prop - beta(j) * beta(j)) / (2.0 * spec.tau2_beta);
            for (Eigen::Index h = 0; h < H; ++h) {
                const auto hu = static_cast<std::size_t>(h);
                zb_prop(h) = zb(h) + delta * z(h, j);
                ll_prop[hu] = binomial_loglik(data.y[hu], data.trials[hu], zb_prop(h) + v(h));
                log_ratio += ll_prop[hu] - ll[hu];
            }
            const bool accept = std::log(rng.uniform()) < log_ratio;
            if (accept) {
                beta(j) = prop;
                zb = zb_prop;
                ll = ll_prop;
            }
            a.record(accept, retained);
        }
        if (random_effect) {
            // Regression coefficients with the linear predictor held fixed.
            const Eigen::VectorXd eta = zb + v;
            beta = draw_beta_centred(z, ztz, eta, sigma2, spec.tau2_beta, rng);
            zb = z * beta;
            v = eta - zb;
            if (!fixed) {
                sigma2 = draw_sigma2(v, spec.nu, spec.s2, rng);
            }
        }
        if (!retained && (it + 1) % kAdaptBatch == 0) {
            const int batch = (it + 1) / kAdaptBatch;
            for (auto &a : adapt_v) {
                a.adapt(batch);
            }
            for (auto &a : adapt_b) {
                a.adapt(batch);
            }
        }
        if (retained) {
            const int r = it - spec.burn_in;
            out.beta.row(r) = beta.transpose();
            out.v.row(r) = v.transpose();
            for (Eigen::Index h = 0; h < H; ++h) {
                out.mean(r, h) = logistic(zb(h) + v(h));
            }
            out.sigma2[static_cast<std::size_t>(r)] = sigma2;
        }
    }
    auto rate = [](const std::vector<Adaptive> &as) {
        long acc = 0;
        long prop = 0;
        for (const auto &a : as) {
            acc += a.accepted;
            prop += a.proposed;
        }
        return prop > 0 ? static_cast<double>(acc) / static_cast<double>(prop) : 1.0;
    };
    out.acceptance_v = random_effect ? rate(adapt_v) : 1.0;
    out.acceptance_beta = rate(adapt_b);
    return out;
}

ChainDraws run_gaussian_chain(const HBSpec &spec, const AreaData &data, const Start &start, int chain,
                              RandomStream rng) {
    const Eigen::Index H = spec.z.rows();
    const Eigen::Index p = spec.z.cols();
    const Eigen::MatrixXd &z = spec.z;
    const Eigen::MatrixXd ztz = z.transpose() * z;
    const Eigen::Map<const Eigen::VectorXd> theta_hat(data.theta_hat.data(), H);
    const Eigen::Map<const Eigen::VectorXd> psi(data.psi.data(), H);
    const Eigen::VectorXd psi_inv = psi.cwiseInverse();
    Eigen::MatrixXd zt_psi_z = z.transpose() * psi_inv.asDiagonal() * z;
    zt_psi_z.diagonal().array() += 1.0 / spec.tau2_beta;

    const bool fixed = spec.fixed_sigma2.has_value();
    double sigma2 = fixed ? *spec.fixed_sigma2 : spec.s2;
    const bool random_effect = sigma2 > 0.0;

    RandomStream init = rng.child("init");
    rng = rng.child("sampler");
    const double spread = spec.chains > 1 ? -1.0 + 2.0 * chain / (spec.chains - 1.0) : 0.0;
    Eigen::VectorXd beta = start.beta;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double sign = init.uniform() < 0.5 ? -1.0 : 1.0;
        beta(j) += 2.0 * spread * sign * start.se(j);
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(H);

    ChainDraws out;
    out.beta.resize(spec.iterations, p);
    out.v.resize(spec.iterations, H);
    out.mean.resize(spec.iterations, H);
    out.sigma2.resize(static_cast<std::size_t>(spec.iterations));

    const int total = spec.burn_in + spec.iterations;
    for (int it = 0; it < total; ++it) {
        if (random_effect) {
            // theta | beta, sigma2
            Eigen::VectorXd zb = z * beta;
            for (Eigen::Index h = 0; h < H; ++h) {
                const double prec = psi_inv(h) + 1.0 / sigma2;
                const double m = (theta_hat(h) * psi_inv(h) + zb(h) / sigma2) / prec;
                v(h) = m + rng.normal() / std::sqrt(prec) - zb(h);
            }
            // beta | v, data
            beta = draw_gaussian(zt_psi_z, z.transpose() * psi_inv.asDiagonal() * (theta_hat - v), rng);
            // beta | theta
            const Eigen::VectorXd theta = z * beta + v;
            beta = draw_beta_centred(z, ztz, theta, sigma2, spec.tau2_beta, rng);
            v = theta - z * beta;
            if (!fixed) {
                sigma2 = draw_sigma2(v, spec.nu, spec.s2, rng);
            }
        } else {
            beta = draw_gaussian(zt_psi_z, z.transpose() * psi_inv.asDiagonal() * theta_hat, rng);
        }
        if (it >= spec.burn_in) {
            const int r = it - spec.burn_in;
            out.beta.row(r) = beta.transpose();
            out.v.row(r) = v.transpose();
            out.mean.row(r) = (z * beta + v).transpose();
            out.sigma2[static_cast<std::size_t>(r)] = sigma2;
        }
    }
    return out;
}

void check_dimensions(const HBSpec &spec, const AreaData &data) {
    spec.validate();
    data.validate(spec.family);
    if (spec.z.rows() != data.strata()) {
        throw std::invalid_argument("hb: covariate rows do not match the number of strata");
    }
}

template <typename Runner>
PosteriorDraws run_chains(const HBSpec &spec, const Start &start, Runner runner) {
    PosteriorDraws draws;
    draws.family = spec.family;
    draws.chains.resize(static_cast<std::size_t>(spec.chains));
    const auto root = RandomStream::derive(spec.seed, "hb/chains");
    tbb::parallel_for(0, spec.chains, [&](int c) {
        draws.chains[static_cast<std::size_t>(c)] = runner(spec, start, c, root.child(static_cast<std::uint64_t>(c)));
    });
    return draws;
}

} // namespace

HBFit fit_binomial_logit(const HBSpec &spec, const AreaData &data) {
    if (spec.family != Family::binomial_logit) {
        throw std::invalid_argument("fit_binomial_logit: spec family is not binomial-logit");
    }
    check_dimensions(spec, data);
    const Eigen::Index H = spec.z.rows();
    Eigen::VectorXd response(H);
    Eigen::VectorXd var(H);
    Eigen::VectorXd info(H);
    for (Eigen::Index h = 0; h < H; ++h) {
        const auto hu = static_cast<std::size_t>(h);
        const double pt = (data.y[hu] + 0.5) / (data.trials[hu] + 1.0);
        response(h) = logit(pt);
        info(h) = data.trials[hu] * pt * (1.0 - pt);
        var(h) = 1.0 / info(h);
    }
    const double sigma0 = spec.fixed_sigma2.value_or(spec.s2);
    Start start = weighted_fit(spec.z, response, var, sigma0, spec.tau2_beta);
    start.step_v.resize(H);
    for (Eigen::Index h = 0; h < H; ++h) {
        const double prec = info(h) + (sigma0 > 0.0 ? 1.0 / sigma0 : 0.0);
        start.step_v(h) = 2.4 / std::sqrt(prec);
    }
    HBFit fit;
    fit.draws = run_chains(spec, start, [&](const HBSpec &s, const Start &st, int c, RandomStream rng) {
        return run_binomial_chain(s, data, st, c, rng);
    });
    fit.summary = summarize_posterior(fit.draws, data, spec.fixed_sigma2.has_value());
    return fit;
}

HBFit fit_fay_herriot(const HBSpec &spec, const AreaData &data) {
    if (spec.family != Family::gaussian_area) {
        throw std::invalid_argument("fit_fay_herriot: spec family is not gaussian-area");
    }
    check_dimensions(spec, data);
    const Eigen::Index H = spec.z.rows();
    const Eigen::Map<const Eigen::VectorXd> theta_hat(data.theta_hat.data(), H);
    const Eigen::Map<const Eigen::VectorXd> psi(data.psi.data(), H);
    const Start start =
        weighted_fit(spec.z, theta_hat, psi, spec.fixed_sigma2.value_or(spec.s2), spec.tau2_beta);
    HBFit fit;
    fit.draws = run_chains(spec, start, [&](const HBSpec &s, const Start &st, int c, RandomStream rng) {
        return run_gaussian_chain(s, data, st, c, rng);
    });
    fit.summary = summarize_posterior(fit.draws, data, spec.fixed_sigma2.has_value());
    return fit;
}

HBFit fit_hb(const HBSpec &spec, const AreaData &data) {
    return spec.family == Family::binomial_logit ? fit_binomial_logit(spec, data) : fit_fay_herriot(spec, data);
}

RhatResult gelman_rubin(std::span<const std::vector<double>> chains) {
    if (chains.size() < 2) {
        throw std::invalid_argument("gelman_rubin: at least two chains are required");
    }
    const std::size_t L = chains.front().size();
    if (L < 2) {
        throw std::invalid_argument("gelman_rubin: chains need at least two draws");
    }
    const double m = static_cast<double>(chains.size());
    const double l = static_cast<double>(L);
    std::vector<double> means;
    double within = 0.0;
    for (const auto &c : chains) {
        if (c.size() != L) {
            throw std::invalid_argument("gelman_rubin: chains have different lengths");
        }
        means.push_back(mean(c));
        within += sample_variance(c);
    }
    within /= m;
    const double between = l * sample_variance(means);
    if (within == 0.0) {
        if (between == 0.0) {
            return {1.0, false};
        }
        return {std::numeric_limits<double>::infinity(), true};
    }
    return {std::sqrt(((l - 1.0) / l * within + between / l) / within), false};
}

Eigen::MatrixXd aggregate_domains(const Eigen::MatrixXd &stratum_draws, std::span<const double> weights,
                                  std::span<const int> domain, int domains) {
    const Eigen::Index H = stratum_draws.cols();
    if (static_cast<Eigen::Index>(weights.size()) != H || static_cast<Eigen::Index>(domain.size()) != H) {
        throw std::invalid_argument("aggregate_domains: weights or domain map size mismatch");
    }
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(H, domains + 1);
    for (Eigen::Index h = 0; h < H; ++h) {
        const auto hu = static_cast<std::size_t>(h);
        if (!(weights[hu] > 0.0)) {
            throw std::invalid_argument("aggregate_domains: weights must be positive");
        }
        if (domain[hu] < 1 || domain[hu] > domains) {
            throw std::invalid_argument("aggregate_domains: domain id out of range");
        }
        w(h, 0) = weights[hu];
        w(h, domain[hu]) = weights[hu];
    }
    const Eigen::RowVectorXd totals = w.colwise().sum();
    for (Eigen::Index a = 0; a < w.cols(); ++a) {
        if (totals(a) > 0.0) {
            w.col(a) /= totals(a);
        }
    }
    return stratum_draws * w;
}

AreaSummary summarize_draws(std::span<const double> pooled) {
    if (pooled.empty()) {
        throw std::invalid_argument("summarize_draws: no draws");
    }
    AreaSummary s;
    s.mean = mean(pooled);
    s.sd = population_sd(pooled);
    s.cv = s.mean != 0.0 ? s.sd / std::abs(s.mean) : 0.0;
    std::vector<double> sorted(pooled.begin(), pooled.end());
    std::sort(sorted.begin(), sorted.end());
    s.lower = sorted_quantile(sorted, 0.025);
    s.upper = sorted_quantile(sorted, 0.975);
    return s;
}

double hb_cv(const PosteriorSummary &summary, int area) {
    const auto &a = summary.areas.at(static_cast<std::size_t>(area));
    if (!(a.mean > 0.0)) {
        throw std::invalid_argument("hb_cv: posterior mean of area " + std::to_string(area) + " is not positive");
    }
    return a.sd / a.mean;
}

namespace {

std::vector<double> column_of(const Eigen::MatrixXd &m, Eigen::Index col) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    Eigen::Map<Eigen::VectorXd>(out.data(), m.rows()) = m.col(col);
    return out;
}

void add_rhat(PosteriorSummary &summary, std::string name, const std::vector<std::vector<double>> &chains) {
    const auto r = gelman_rubin(chains);
    summary.rhat.push_back({std::move(name), r.value, r.divergent});
    summary.rhat_max = std::max(summary.rhat_max, r.value);
}

} // namespace

PosteriorSummary summarize_posterior(const PosteriorDraws &draws, const AreaData &data, bool sigma2_fixed) {
    if (draws.chains.empty()) {
        throw std::invalid_argument("summarize_posterior: no chains");
    }
    const auto C = draws.chains.size();
    const Eigen::Index L = draws.chains.front().mean.rows();
    const Eigen::Index H = draws.chains.front().mean.cols();
    const Eigen::Index p = draws.chains.front().beta.cols();
    PosteriorSummary summary;
    summary.rhat_max = 0.0;

    std::vector<Eigen::MatrixXd> agg;
    for (const auto &c : draws.chains) {
        agg.push_back(aggregate_domains(c.mean, data.weights, data.domain, data.domains));
        summary.acceptance_min = std::min({summary.acceptance_min, c.acceptance_v, c.acceptance_beta});
    }
    summary.low_acceptance = summary.acceptance_min < 0.05;

    auto pooled = [&](auto &&get, Eigen::Index col) {
        std::vector<double> out;
        out.reserve(C * static_cast<std::size_t>(L));
        for (std::size_t c = 0; c < C; ++c) {
            const Eigen::MatrixXd &m = get(c);
            for (Eigen::Index r = 0; r < L; ++r) {
                out.push_back(m(r, col));
            }
        }
        return out;
    };
    for (Eigen::Index h = 0; h < H; ++h) {
        summary.strata.push_back(
            summarize_draws(pooled([&](std::size_t c) -> const Eigen::MatrixXd & { return draws.chains[c].mean; }, h)));
    }
    for (Eigen::Index a = 0; a <= data.domains; ++a) {
        summary.areas.push_back(summarize_draws(pooled([&](std::size_t c) -> const Eigen::MatrixXd & { return agg[c]; }, a)));
    }

    std::vector<std::vector<double>> per_chain(C);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (std::size_t c = 0; c < C; ++c) {
            per_chain[c] = column_of(draws.chains[c].beta, j);
        }
        add_rhat(summary, "beta[" + std::to_string(j) + "]", per_chain);
    }
    if (!sigma2_fixed) {
        for (std::size_t c = 0; c < C; ++c) {
            per_chain[c] = draws.chains[c].sigma2;
        }
        add_rhat(summary, "sigma2_v", per_chain);
    }
    for (Eigen::Index a = 0; a <= data.domains; ++a) {
        for (std::size_t c = 0; c < C; ++c) {
            per_chain[c] = column_of(agg[c], a);
        }
        add_rhat(summary, a == 0 ? std::string{"national"} : "domain[" + std::to_string(a) + "]", per_chain);
    }
    return summary;
}

std::string draws_csv(const PosteriorDraws &draws) {
    CsvWriter csv({"chain", "iteration", "parameter", "value"});
    for (std::size_t c = 0; c < draws.chains.size(); ++c) {
        const auto &ch = draws.chains[c];
        for (Eigen::Index r = 0; r < ch.mean.rows(); ++r) {
            const auto it = std::to_string(r);
            for (Eigen::Index j = 0; j < ch.beta.cols(); ++j) {
                csv.row({std::to_string(c), it, "beta[" + std::to_string(j) + "]", format_double(ch.beta(r, j))});
            }
            csv.row({std::to_string(c), it, "sigma2_v", format_double(ch.sigma2[static_cast<std::size_t>(r)])});
            for (Eigen::Index h = 0; h < ch.mean.cols(); ++h) {
                csv.row({std::to_string(c), it, "mean[" + std::to_string(h) + "]", format_double(ch.mean(r, h))});
            }
        }
    }
    return csv.str();
}

std::string fit_report_json(const HBFit &fit) {
    using nlohmann::json;
    auto area_json = [](const AreaSummary &a) {
        return json{{"mean", a.mean}, {"sd", a.sd}, {"cv", a.cv}, {"lower", a.lower}, {"upper", a.upper}};
    };
    json j;
    j["family"] = family_name(fit.draws.family);
    j["chains"] = fit.draws.chains.size();
    j["draws_per_chain"] = fit.draws.draws_per_chain();
    j["strata"] = json::array();
    for (const auto &s : fit.summary.strata) {
        j["strata"].push_back(area_json(s));
    }
    j["areas"] = json::array();
    for (const auto &a : fit.summary.areas) {
        j["areas"].push_back(area_json(a));
    }
    j["rhat"] = json::array();
    for (const auto &r : fit.summary.rhat) {
        j["rhat"].push_back({{"parameter", r.parameter},
                             {"value", std::isfinite(r.value) ? json(r.value) : json("inf")},
                             {"divergent", r.divergent}});
    }
    j["rhat_max"] = std::isfinite(fit.summary.rhat_max) ? json(fit.summary.rhat_max) : json("inf");
    j["acceptance"] = json::array();
    for (const auto &c : fit.draws.chains) {
        j["acceptance"].push_back({{"random_effects", c.acceptance_v}, {"coefficients", c.acceptance_beta}});
    }
    return j.dump(2);
}

} // namespace stratopt
