#include "oracles/hb_oracles.h"
#include "stratopt/hb.h"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using namespace stratopt;

AreaData gaussian_toy() {
    AreaData d;
    d.theta_hat = {10.0, 12.5, 9.0};
    d.psi = {1.0, 0.5, 2.0};
    d.weights = {100.0, 200.0, 150.0};
    d.domain = {1, 1, 2};
    d.domains = 2;
    return d;
}

Eigen::MatrixXd intercept_and_slope() {
    Eigen::MatrixXd z(3, 2);
    z << 1.0, -1.0, 1.0, 0.0, 1.0, 1.0;
    return z;
}

HBSpec gaussian_spec(double sigma2, double tau2, std::uint64_t seed) {
    HBSpec s;
    s.family = Family::gaussian_area;
    s.z = intercept_and_slope();
    s.tau2_beta = tau2;
    s.fixed_sigma2 = sigma2;
    s.iterations = 10'000;
    s.burn_in = 500;
    s.seed = seed;
    return s;
}

TEST(FayHerriot, FixedVarianceMatchesConjugatePosterior) {
    const auto data = gaussian_toy();
    const auto spec = gaussian_spec(1.5, 25.0, 11);
    const auto fit = fit_fay_herriot(spec, data);
    const auto exact =
        oracle::fay_herriot_conjugate(spec.z, Eigen::Map<const Eigen::VectorXd>(data.theta_hat.data(), 3),
                                      Eigen::Map<const Eigen::VectorXd>(data.psi.data(), 3), 1.5, 25.0);
    for (Eigen::Index h = 0; h < 3; ++h) {
        const auto mc = oracle::monte_carlo(oracle::chains_of(fit.draws, h));
        EXPECT_NEAR(mc.mean, exact.mean(h), 3.0 * mc.se_mean) << "area " << h;
        EXPECT_NEAR(mc.sd, exact.sd(h), 3.0 * mc.se_sd) << "area " << h;
    }
}

TEST(FayHerriot, TinyVarianceShrinksToRegression) {
    const auto data = gaussian_toy();
    auto spec = gaussian_spec(1e-8, 1e6, 12);
    spec.iterations = 2000;
    const auto fit = fit_fay_herriot(spec, data);
    // Full shrinkage: theta = z beta_hat with beta_hat the GLS fit weighted by 1 / psi.
    const Eigen::MatrixXd w = Eigen::Map<const Eigen::VectorXd>(data.psi.data(), 3).cwiseInverse().asDiagonal();
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.theta_hat.data(), 3);
    const Eigen::VectorXd beta = (spec.z.transpose() * w * spec.z).ldlt().solve(spec.z.transpose() * w * y);
    const Eigen::VectorXd fitted = spec.z * beta;
    for (Eigen::Index h = 0; h < 3; ++h) {
        const auto mc = oracle::monte_carlo(oracle::chains_of(fit.draws, h));
        EXPECT_NEAR(mc.mean, fitted(h), std::max(3.0 * mc.se_mean, 1e-3)) << "area " << h;
    }
}

TEST(FayHerriot, HugeVarianceKeepsDirectEstimates) {
    const auto data = gaussian_toy();
    auto spec = gaussian_spec(1e8, 1e6, 13);
    spec.iterations = 4000;
    const auto fit = fit_fay_herriot(spec, data);
    for (Eigen::Index h = 0; h < 3; ++h) {
        const auto mc = oracle::monte_carlo(oracle::chains_of(fit.draws, h));
        EXPECT_NEAR(mc.mean, data.theta_hat[static_cast<std::size_t>(h)], 3.0 * mc.se_mean + 1e-6);
        EXPECT_NEAR(mc.sd, std::sqrt(data.psi[static_cast<std::size_t>(h)]), 3.0 * mc.se_sd);
    }
}

TEST(FayHerriot, EstimatedVarianceConverges) {
    AreaData d;
    for (int h = 0; h < 20; ++h) {
        d.theta_hat.push_back(30.0 + 0.3 * h + (h % 3 == 0 ? 1.0 : -0.5));
        d.psi.push_back(0.5 + 0.05 * h);
        d.weights.push_back(100.0 + h);
        d.domain.push_back(1 + h / 5);
    }
    d.domains = 4;
    HBSpec s;
    s.family = Family::gaussian_area;
    s.z = Eigen::MatrixXd::Ones(20, 1);
    s.seed = 14;
    const auto fit = fit_hb(s, d);
    EXPECT_LE(fit.summary.rhat_max, 1.05);
    EXPECT_EQ(fit.summary.areas.size(), 5U);
    EXPECT_EQ(fit.draws.draws_per_chain(), 2000);
    EXPECT_EQ(fit.draws.chains.size(), 3U);
}

TEST(BinomialLogit, InterceptOnlyMatchesQuadrature) {
    AreaData d;
    d.y = {30.0};
    d.trials = {100.0};
    d.weights = {1000.0};
    d.domain = {1};
    d.domains = 1;
    HBSpec s;
    s.z = Eigen::MatrixXd::Ones(1, 1);
    s.fixed_sigma2 = 0.0;
    s.tau2_beta = 1e6;
    s.iterations = 10'000;
    s.seed = 21;
    const auto fit = fit_binomial_logit(s, d);
    const auto [m, sd] = oracle::binomial_quadrature(30.0, 100.0, 1e6);
    const auto mc = oracle::monte_carlo(oracle::chains_of(fit.draws, 0));
    EXPECT_NEAR(mc.mean, m, 3.0 * mc.se_mean);
    EXPECT_NEAR(mc.sd, sd, 3.0 * mc.se_sd);
    EXPECT_NEAR(m, 0.3, 0.01);
}

TEST(BinomialLogit, LikelihoodDominatesAtLargeN) {
    AreaData d;
    const std::vector<double> rate{0.05, 0.12, 0.3, 0.6};
    for (std::size_t h = 0; h < rate.size(); ++h) {
        d.trials.push_back(10'000.0);
        d.y.push_back(rate[h] * 10'000.0);
        d.weights.push_back(50'000.0);
        d.domain.push_back(1);
    }
    d.domains = 1;
    HBSpec s;
    s.z = Eigen::MatrixXd::Ones(4, 1);
    s.nu = 0.01;
    s.s2 = 1.0;
    s.seed = 22;
    const auto fit = fit_binomial_logit(s, d);
    for (std::size_t h = 0; h < rate.size(); ++h) {
        const auto &a = fit.summary.strata[h];
        EXPECT_NEAR(a.mean, rate[h], 3.0 * a.sd) << "stratum " << h;
        EXPECT_GT(a.lower, 0.0);
        EXPECT_LT(a.upper, 1.0);
    }
}

TEST(BinomialLogit, IdenticalStrataAreExchangeable) {
    AreaData d;
    d.y = {12.0, 12.0, 30.0};
    d.trials = {200.0, 200.0, 300.0};
    d.weights = {1000.0, 1000.0, 2000.0};
    d.domain = {1, 1, 2};
    d.domains = 2;
    HBSpec s;
    s.z = Eigen::MatrixXd::Ones(3, 1);
    s.iterations = 6000;
    s.seed = 23;
    const auto fit = fit_binomial_logit(s, d);
    const auto a = oracle::monte_carlo(oracle::chains_of(fit.draws, 0));
    const auto b = oracle::monte_carlo(oracle::chains_of(fit.draws, 1));
    EXPECT_NEAR(a.mean, b.mean, 3.0 * std::hypot(a.se_mean, b.se_mean));
    EXPECT_NEAR(a.sd, b.sd, 3.0 * std::hypot(a.se_sd, b.se_sd));
}

TEST(BinomialLogit, SameSeedSameDraws) {
    AreaData d;
    d.y = {3.0, 9.0, 20.0};
    d.trials = {50.0, 60.0, 70.0};
    d.weights = {1.0, 2.0, 3.0};
    d.domain = {1, 2, 2};
    d.domains = 2;
    HBSpec s;
    s.z = Eigen::MatrixXd::Ones(3, 1);
    s.iterations = 200;
    s.burn_in = 100;
    s.seed = 24;
    const auto a = fit_binomial_logit(s, d);
    const auto b = fit_binomial_logit(s, d);
    for (std::size_t c = 0; c < a.draws.chains.size(); ++c) {
        EXPECT_EQ(a.draws.chains[c].mean, b.draws.chains[c].mean);
        EXPECT_EQ(a.draws.chains[c].sigma2, b.draws.chains[c].sigma2);
    }
    EXPECT_EQ(fit_report_json(a), fit_report_json(b));
}

TEST(BinomialLogit, SeparatedDataStillRuns) {
    AreaData d;
    d.y = {0.0, 0.0, 0.0};
    d.trials = {40.0, 50.0, 60.0};
    d.weights = {1.0, 1.0, 1.0};
    d.domain = {1, 1, 1};
    d.domains = 1;
    HBSpec s;
    s.z = Eigen::MatrixXd::Ones(3, 1);
    s.iterations = 200;
    s.burn_in = 200;
    s.seed = 25;
    const auto fit = fit_binomial_logit(s, d);
    for (const auto &a : fit.summary.strata) {
        EXPECT_GT(a.mean, 0.0);
        EXPECT_LT(a.mean, 0.05);
    }
}

TEST(HBSpec, ValidateRejectsBadSettings) {
    HBSpec s;
    s.z = Eigen::MatrixXd::Ones(2, 1);
    s.chains = 1;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.chains = 3;
    s.nu = 0.0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    AreaData d;
    d.y = {5.0};
    d.trials = {4.0};
    d.weights = {1.0};
    d.domain = {1};
    d.domains = 1;
    EXPECT_THROW(d.validate(Family::binomial_logit), std::invalid_argument);
}

TEST(AggregateDomains, WeightedMeansPerDraw) {
    Eigen::MatrixXd draws(2, 3);
    draws << 1.0, 3.0, 10.0, 2.0, 4.0, 20.0;
    const std::vector<double> w{1.0, 1.0, 2.0};
    const std::vector<int> dom{1, 1, 2};
    const auto agg = aggregate_domains(draws, w, dom, 2);
    ASSERT_EQ(agg.cols(), 3);
    EXPECT_DOUBLE_EQ(agg(0, 1), 2.0);
    EXPECT_DOUBLE_EQ(agg(1, 1), 3.0);
    EXPECT_DOUBLE_EQ(agg(0, 2), 10.0);
    EXPECT_DOUBLE_EQ(agg(1, 2), 20.0);
    EXPECT_DOUBLE_EQ(agg(0, 0), (1.0 + 3.0 + 20.0) / 4.0);
}

TEST(AggregateDomains, DegenerateDrawsReproduceTruth) {
    Eigen::MatrixXd draws = Eigen::MatrixXd::Zero(5, 2);
    draws.col(0).setConstant(0.25);
    draws.col(1).setConstant(0.75);
    const std::vector<double> w{300.0, 100.0};
    const std::vector<int> dom{1, 2};
    const auto agg = aggregate_domains(draws, w, dom, 2);
    for (Eigen::Index r = 0; r < 5; ++r) {
        EXPECT_DOUBLE_EQ(agg(r, 0), (0.25 * 300.0 + 0.75 * 100.0) / 400.0);
    }
}

TEST(Summaries, HandComputedCv) {
    const std::vector<double> d{9.0, 10.0, 11.0};
    const auto s = summarize_draws(d);
    EXPECT_NEAR(s.cv, std::sqrt(2.0 / 3.0) / 10.0, 1e-15);
    EXPECT_NEAR(s.cv, 0.0816, 1e-4);
    EXPECT_LE(s.lower, s.upper);
    const std::vector<double> scaled{90.0, 100.0, 110.0};
    EXPECT_NEAR(summarize_draws(scaled).cv, s.cv, 1e-15);
    const std::vector<double> flat{2.0, 2.0, 2.0};
    EXPECT_EQ(summarize_draws(flat).cv, 0.0);
}

TEST(Summaries, HbCvRequiresPositiveMean) {
    PosteriorSummary s;
    s.areas = {AreaSummary{0.0, 1.0, 0.0, -1.0, 1.0}, AreaSummary{4.0, 1.0, 0.25, 2.0, 6.0}};
    EXPECT_THROW(hb_cv(s, 0), std::invalid_argument);
    EXPECT_DOUBLE_EQ(hb_cv(s, 1), 0.25);
}

} // namespace
