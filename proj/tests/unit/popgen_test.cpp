#include "stratopt/numeric.h"
#include "stratopt/popgen.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

namespace {

using namespace stratopt;

PopulationConfig small_config() {
    auto c = PopulationConfig::desk_scale();
    c.units = 20'000;
    c.strata = 20;
    c.domains = 4;
    return c;
}

TEST(PopulationConfig, ValidateNamesTheField) {
    auto c = PopulationConfig::desk_scale();
    c.deff_low = 0.9;
    try {
        c.validate();
        FAIL() << "expected std::invalid_argument";
    } catch (const std::invalid_argument &e) {
        EXPECT_NE(std::string{e.what()}.find("deff_range"), std::string::npos);
    }
    c = PopulationConfig::desk_scale();
    c.domains = 60;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(DesignEffects, DegenerateIntervalGivesConstant) {
    auto c = PopulationConfig{};
    c.deff_low = c.deff_high = 1.0;
    for (const double d : gen_design_effects(c, RandomStream::derive(1, "deff"))) {
        EXPECT_EQ(d, 1.0);
    }
}

TEST(DesignEffects, UniformRangeAndMean) {
    PopulationConfig c;
    c.strata = 100;
    const auto d = gen_design_effects(c, RandomStream::derive(2, "deff"));
    for (const double x : d) {
        EXPECT_GE(x, 1.1);
        EXPECT_LE(x, 1.2);
    }
    const double se = (0.1 / std::sqrt(12.0)) / std::sqrt(100.0);
    EXPECT_NEAR(mean(d), 1.15, 3.0 * se);
    EXPECT_EQ(d, gen_design_effects(c, RandomStream::derive(2, "deff")));
}

TEST(StratumSizes, SumToPopulationAndArePositive) {
    const auto c = PopulationConfig::desk_scale();
    const auto sizes = gen_stratum_sizes(c, RandomStream::derive(3, "sizes"));
    std::int64_t total = 0;
    for (const auto s : sizes) {
        EXPECT_GE(s, 1);
        total += s;
    }
    EXPECT_EQ(total, c.units);
}

TEST(Covariates, ZeroNoiseCopiesStratumValue) {
    auto c = small_config();
    c.unit_noise_sd = 0.0;
    const std::vector<std::int64_t> sizes(20, 1000);
    const auto cov = gen_covariates(c, sizes, RandomStream::derive(4, "cov"));
    for (std::size_t h = 0; h < 20; ++h) {
        for (std::int64_t i = 0; i < 1000; ++i) {
            ASSERT_EQ(cov.unit[0][0][h * 1000 + static_cast<std::size_t>(i)], cov.stratum[0][0][h]);
        }
        EXPECT_NEAR(cov.stratum_means[0][0][h], cov.stratum[0][0][h], 1e-12 * std::abs(cov.stratum[0][0][h]));
    }
}

TEST(Covariates, EmploymentDrawMeanMatchesLaw) {
    PopulationConfig c;
    c.strata = 10'000;
    c.units = 10'000;
    const std::vector<std::int64_t> sizes(10'000, 1);
    const auto cov = gen_covariates(c, sizes, RandomStream::derive(5, "cov"));
    EXPECT_NEAR(mean(cov.stratum[0][0]), 3.0, 3.0 / std::sqrt(10'000.0));
}

TEST(Covariates, StreamsAreIndependentAcrossVariables) {
    PopulationConfig c;
    c.strata = 1000;
    c.units = 1000;
    const std::vector<std::int64_t> sizes(1000, 1);
    const auto cov = gen_covariates(c, sizes, RandomStream::derive(6, "cov"));
    const auto &a = cov.stratum[0][0];
    const auto &b = cov.stratum[1][0];
    const double ma = mean(a);
    const double mb = mean(b);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    EXPECT_LT(std::abs(sab / std::sqrt(saa * sbb)), 0.1);
}

TEST(LatentModel, CentredCovariatesGiveTheRate) {
    const PopulationConfig c;
    EXPECT_NEAR(stratum_employment_prob(3.0, 4.0, 0.0, 0.0, c), 0.62, 1e-15);
    EXPECT_NEAR(stratum_unemployment_prob(3.0, 4.0, 0.0, 0.0, c), 0.04, 1e-15);
}

TEST(LatentModel, CoefficientShiftsLogitByOne) {
    const PopulationConfig c;
    const double base = logit(stratum_employment_prob(3.0, 4.0, 0.0, 0.0, c));
    const double moved = logit(stratum_employment_prob(3.0 + 1.0 / 0.15, 4.0, 0.0, 0.0, c));
    EXPECT_NEAR(moved - base, 1.0, 1e-12);
}

TEST(LatentModel, UnemploymentMonotoneInCoefficient) {
    PopulationConfig c;
    const double p0 = stratum_unemployment_prob(4.0, 4.0, 0.0, 0.0, c);
    c.unemployment.coef1 += 0.15;
    EXPECT_GT(stratum_unemployment_prob(4.0, 4.0, 0.0, 0.0, c), p0);
}

TEST(Overlap, NoOverlapIsNoOp) {
    std::vector<std::uint8_t> e{1, 0, 1, 0};
    std::vector<std::uint8_t> u{0, 1, 0, 0};
    const auto e0 = e;
    const auto u0 = u;
    EXPECT_EQ(resolve_overlap(e, u, 0.9, RandomStream::derive(1, "o")), 0);
    EXPECT_EQ(e, e0);
    EXPECT_EQ(u, u0);
}

TEST(Overlap, ReassignmentFollowsBinomialLaw) {
    const std::size_t n = 66'000;
    std::vector<std::uint8_t> e(n, 1);
    std::vector<std::uint8_t> u(n, 1);
    EXPECT_EQ(resolve_overlap(e, u, 62.0 / 66.0, RandomStream::derive(7, "o")), static_cast<std::int64_t>(n));
    std::int64_t employed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ASSERT_FALSE(e[i] && u[i]);
        ASSERT_TRUE(e[i] || u[i]);
        employed += e[i];
    }
    const double sd = std::sqrt(66000.0 * (62.0 / 66.0) * (4.0 / 66.0));
    EXPECT_NEAR(static_cast<double>(employed), 62'000.0, 3.0 * sd);
}

TEST(Hours, LinkAtZeroIsMidpoint) { EXPECT_DOUBLE_EQ(stratum_hours_mean(0.0, 0.0, HoursParams{}), 37.5); }

TEST(Hours, DrawsMatchTruncatedNormalMean) {
    const HoursParams p;
    const auto x = gen_hours(37.5, 100'000, p, RandomStream::derive(8, "hours"));
    double lo = 1e9;
    double hi = -1e9;
    for (const double v : x) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_GE(lo, 15.0);
    EXPECT_LE(hi, 60.0);
    const auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };
    const auto Phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    const double a = (15.0 - 37.5) / 12.0;
    const double b = (60.0 - 37.5) / 12.0;
    const double truth = 37.5 + 12.0 * (phi(a) - phi(b)) / (Phi(b) - Phi(a));
    const double se = std::sqrt(sample_variance(x) / static_cast<double>(x.size()));
    EXPECT_NEAR(mean(x), truth, 3.0 * se);
}

TEST(Synthesize, LatentRatesBeforeOverlapResolution) {
    const auto s = synthesize(PopulationConfig{});
    double e = 0.0;
    double u = 0.0;
    for (const auto &st : s.population.strata()) {
        e += static_cast<double>(st.size) * st.p_employed;
        u += static_cast<double>(st.size) * st.p_unemployed;
    }
    const auto n = static_cast<double>(s.population.size());
    EXPECT_NEAR(e / n, 0.62, 0.01);
    EXPECT_NEAR(u / n, 0.04, 0.005);
}

TEST(Synthesize, DefaultConfigNationalMeans) {
    const auto s = synthesize(PopulationConfig{});
    EXPECT_EQ(s.population.size(), 1'000'000);
    const double e = s.truth.national(Variable::employed).mean;
    const double u = s.truth.national(Variable::unemployed).mean;
    const double h = s.truth.national(Variable::hours).mean;
    EXPECT_GE(e, 0.60);
    EXPECT_LE(e, 0.64);
    EXPECT_GE(u, 0.035);
    EXPECT_LE(u, 0.045);
    EXPECT_GE(h, 36.0);
    EXPECT_LE(h, 38.0);
    for (std::int64_t i = 0; i < s.population.size(); ++i) {
        ASSERT_FALSE(s.population.employed()[static_cast<std::size_t>(i)] &&
                     s.population.unemployed()[static_cast<std::size_t>(i)]);
    }
}

TEST(Synthesize, TruthLevelsAreConsistent) {
    const auto s = synthesize(small_config());
    for (const auto v : kAllVariables) {
        double national = 0.0;
        for (int d = 1; d <= 4; ++d) {
            national += s.truth.area(d, v).total;
        }
        EXPECT_DOUBLE_EQ(national, s.truth.national(v).total);
    }
}

TEST(Synthesize, OneUnitPerStratum) {
    auto c = small_config();
    c.units = 20;
    const auto s = synthesize(c);
    for (int h = 0; h < 20; ++h) {
        const auto &info = s.population.stratum(h);
        ASSERT_EQ(info.size, 1);
        EXPECT_EQ(s.truth.stratum(h, Variable::hours).mean, s.population.value(Variable::hours, info.first_unit));
    }
}

TEST(Synthesize, SameSeedSamePopulation) {
    const auto a = synthesize(small_config());
    const auto b = synthesize(small_config());
    EXPECT_EQ(a.population.hours(), b.population.hours());
    EXPECT_EQ(a.population.employed(), b.population.employed());
    auto c = small_config();
    c.seed += 1;
    EXPECT_NE(synthesize(c).population.hours(), a.population.hours());
}

TEST(DomainOfStratum, BalancedBlocks) {
    EXPECT_EQ(domain_of_stratum(0, 50, 10), 1);
    EXPECT_EQ(domain_of_stratum(4, 50, 10), 1);
    EXPECT_EQ(domain_of_stratum(5, 50, 10), 2);
    EXPECT_EQ(domain_of_stratum(49, 50, 10), 10);
}

} // namespace
