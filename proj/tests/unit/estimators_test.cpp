#include "stratopt/estimators.h"
#include "unit/test_support.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace {

using namespace stratopt;
using stratopt::testing::make_population;

/// Sample holding the first n[h] units of each stratum.
Sample leading_units(const SyntheticPopulation &pop, const std::vector<std::int64_t> &n) {
    Sample s;
    s.strata.resize(n.size());
    for (std::size_t h = 0; h < n.size(); ++h) {
        const auto first = pop.stratum(static_cast<int>(h)).first_unit;
        for (std::int64_t i = 0; i < n[h]; ++i) {
            s.strata[h].units.push_back(first + i);
            s.strata[h].keys.push_back(0.0);
        }
    }
    s.allocation.sizes = n;
    return s;
}

std::vector<double> toy_hours() {
    // 25 sampled values with mean 10 and S^2 = 4, then 75 out-of-sample units.
    std::vector<double> v(12, 8.0);
    v.insert(v.end(), 12, 12.0);
    v.push_back(10.0);
    v.insert(v.end(), 75, 10.0);
    return v;
}

TEST(StratumEstimates, HandComputedPsiAndCv) {
    const auto pop = make_population({100}, {1}, {toy_hours()});
    const auto sample = leading_units(pop, {25});
    const auto est = stratum_estimates(sample, pop, Variable::hours);
    ASSERT_EQ(est.size(), 1U);
    EXPECT_NEAR(est[0].mean, 10.0, 1e-12);
    EXPECT_NEAR(est[0].s2, 4.0, 1e-12);
    EXPECT_NEAR(est[0].psi, 0.12, 1e-12);
    const auto areas = area_estimates(est, 1, Variable::hours);
    EXPECT_NEAR(areas[0].total, 1000.0, 1e-9);
    EXPECT_NEAR(areas[0].cv, std::sqrt(0.12 * 100.0 * 100.0) / 1000.0, 1e-12);
    EXPECT_NEAR(areas[0].cv, 0.0346, 1e-4);
}

TEST(StratumEstimates, DeffInflatesPsi) {
    const auto pop = make_population({100}, {1}, {toy_hours()}, {}, 1.5);
    const auto sample = leading_units(pop, {25});
    EXPECT_NEAR(stratum_estimates(sample, pop, Variable::hours)[0].psi, 0.18, 1e-12);
    EXPECT_NEAR(stratum_estimates(sample, pop, Variable::hours, {false})[0].psi, 0.12, 1e-12);
}

TEST(StratumEstimates, CensusEqualsTruthWithZeroCv) {
    const auto s = synthesize([] {
        auto c = PopulationConfig::desk_scale();
        c.units = 3000;
        c.strata = 6;
        c.domains = 2;
        return c;
    }());
    const auto sample = leading_units(s.population, [&] {
        std::vector<std::int64_t> n;
        for (const auto &st : s.population.strata()) {
            n.push_back(st.size);
        }
        return n;
    }());
    const auto all = direct_estimates(sample, s.population, kAllVariables);
    for (const auto &e : all) {
        EXPECT_NEAR(e.mean, s.truth.area(e.area, e.variable).mean, 1e-12);
        EXPECT_NEAR(e.total, s.truth.area(e.area, e.variable).total, 1e-6);
        EXPECT_EQ(e.cv, 0.0);
    }
}

TEST(AreaEstimates, NationalIsSumOfDomains) {
    std::vector<double> a(50);
    std::vector<double> b(40);
    std::iota(a.begin(), a.end(), 1.0);
    std::iota(b.begin(), b.end(), 20.0);
    const auto pop = make_population({50, 40}, {1, 2}, {a, b});
    const auto sample = leading_units(pop, {10, 8});
    const auto est = area_estimates(stratum_estimates(sample, pop, Variable::hours), 2, Variable::hours);
    ASSERT_EQ(est.size(), 3U);
    EXPECT_NEAR(est[0].total, est[1].total + est[2].total, 1e-9);
    EXPECT_NEAR(est[0].variance, est[1].variance + est[2].variance, 1e-9);
    EXPECT_NEAR(est[0].mean, est[0].total / 90.0, 1e-12);
}

TEST(StratumEstimates, EmptyStratumIsRejected) {
    const auto pop = make_population({10, 10}, {1, 1}, {std::vector<double>(10, 1.0), std::vector<double>(10, 2.0)});
    const auto sample = leading_units(pop, {5, 0});
    EXPECT_THROW(stratum_estimates(sample, pop, Variable::hours), std::invalid_argument);
}

TEST(StratumEstimates, ConstantBinaryStratumIsFloored) {
    const auto pop = make_population({40}, {1}, {std::vector<double>(40, 30.0)},
                                     {std::vector<std::uint8_t>(40, 1)});
    const auto sample = leading_units(pop, {10});
    const auto est = stratum_estimates(sample, pop, Variable::employed);
    EXPECT_TRUE(est[0].degenerate);
    EXPECT_GT(est[0].psi, 0.0);
}

TEST(CvTable, WorstDomainAndFlags) {
    std::vector<DirectEstimate> areas(3);
    areas[0].cv = 0.02;
    areas[1].cv = 0.09;
    areas[2].cv = 0.05;
    for (int a = 0; a < 3; ++a) {
        areas[static_cast<std::size_t>(a)].area = a;
        areas[static_cast<std::size_t>(a)].variable = Variable::unemployed;
    }
    const auto row = cv_row(areas, 0.03, 0.08);
    EXPECT_EQ(row.worst_domain, 1);
    EXPECT_DOUBLE_EQ(row.worst_domain_cv, 0.09);
    EXPECT_TRUE(row.national_pass());
    EXPECT_FALSE(row.domain_pass());
    const std::vector<CvTableRow> rows{row};
    const auto csv = cv_table_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "Variable,National CV,National Target,National Pass,Worst-Domain CV,Worst Domain,Domain Target,Domain Pass");
    EXPECT_NE(csv.find("Unemployed"), std::string::npos);
}

} // namespace
