#include "stratopt/numeric.h"
#include "stratopt/rng.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

namespace {

using namespace stratopt;

TEST(Numeric, RoundHalfEven) {
    EXPECT_EQ(round_half_even(0.5), 0.0);
    EXPECT_EQ(round_half_even(1.5), 2.0);
    EXPECT_EQ(round_half_even(2.5), 2.0);
    EXPECT_EQ(round_half_even(-2.5), -2.0);
    EXPECT_EQ(round_half_even(18261.6), 18262.0);
    EXPECT_EQ(round_half_even(2.4999), 2.0);
    EXPECT_EQ(round_to_count(412.6), 413);
}

TEST(Numeric, LogisticAndLogitAreInverse) {
    for (const double p : {1e-9, 0.04, 0.5, 0.62, 1.0 - 1e-9}) {
        EXPECT_NEAR(logistic(logit(p)), p, 1e-12 * std::max(1.0, p));
    }
    EXPECT_DOUBLE_EQ(logistic(0.0), 0.5);
}

TEST(Numeric, Log1pexpIsStable) {
    EXPECT_NEAR(log1pexp(0.0), std::log(2.0), 1e-15);
    EXPECT_NEAR(log1pexp(800.0), 800.0, 1e-12);
    EXPECT_NEAR(log1pexp(-800.0), 0.0, 1e-300);
    EXPECT_NEAR(log1pexp(-3.0), std::log1p(std::exp(-3.0)), 1e-15);
}

TEST(Numeric, NormalQuantileInvertsCdf) {
    for (const double p : {1e-10, 0.001, 0.025, 0.3, 0.5, 0.8, 0.975, 1 - 1e-9}) {
        EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12 * std::max(1.0, 1.0 / (1.0 - p)) + 1e-15);
    }
    EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
}

/// Closed-form truncated normal mean: mu + sd (phi(a) - phi(b)) / (Phi(b) - Phi(a)).
double truncated_mean(double mu, double sd, double lo, double hi) {
    const auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
    const auto Phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    const double a = (lo - mu) / sd;
    const double b = (hi - mu) / sd;
    return mu + sd * (phi(a) - phi(b)) / (Phi(b) - Phi(a));
}

TEST(Numeric, TruncatedNormalMatchesClosedFormMean) {
    auto s = RandomStream::derive(5, "tn");
    const int n = 100000;
    for (const double mu : {37.5, 20.0, 58.0}) {
        double sum = 0.0;
        double sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = truncated_normal_from_uniform(s.uniform(), mu, 12.0, 15.0, 60.0);
            ASSERT_GE(x, 15.0);
            ASSERT_LE(x, 60.0);
            sum += x;
            sum2 += x * x;
        }
        const double m = sum / n;
        const double se = std::sqrt((sum2 / n - m * m) / n);
        EXPECT_NEAR(m, truncated_mean(mu, 12.0, 15.0, 60.0), 3.0 * se) << "mu " << mu;
    }
}

TEST(Numeric, TruncatedNormalFarTailStaysInside) {
    EXPECT_GE(truncated_normal_from_uniform(0.5, -100.0, 1.0, 15.0, 60.0), 15.0);
    EXPECT_LE(truncated_normal_from_uniform(0.5, 200.0, 1.0, 15.0, 60.0), 60.0);
}

TEST(Numeric, Moments) {
    const std::vector<double> h{20, 30, 40, 50};
    EXPECT_DOUBLE_EQ(mean(h), 35.0);
    EXPECT_NEAR(sample_variance(h), 500.0 / 3.0, 1e-12);
    const std::vector<double> d{9, 10, 11};
    EXPECT_NEAR(population_sd(d), std::sqrt(2.0 / 3.0), 1e-15);
    const std::vector<double> one{4.0};
    EXPECT_EQ(sample_variance(one), 0.0);
}

TEST(Numeric, Type7Quantile) {
    const std::vector<double> x{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(sorted_quantile(x, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(sorted_quantile(x, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(sorted_quantile(x, 0.5), 2.5);
    EXPECT_NEAR(sorted_quantile(x, 0.025), 1.075, 1e-12);
}

TEST(Numeric, LargestRemainderSumsExactly) {
    const std::vector<double> w{1.0, 1.0, 1.0};
    const auto r = largest_remainder(w, 10);
    EXPECT_EQ(r[0] + r[1] + r[2], 10);
    const std::vector<double> w2{2.0, 1.0};
    const auto r2 = largest_remainder(w2, 30);
    EXPECT_EQ(r2[0], 20);
    EXPECT_EQ(r2[1], 10);
}

} // namespace
