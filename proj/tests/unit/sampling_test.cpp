#include "stratopt/sampling.h"
#include "stratopt/text_io.h"
#include "unit/test_support.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

namespace {

using namespace stratopt;
using stratopt::testing::constant_population;
using stratopt::testing::make_population;

TEST(BaselineAllocation, FractionFloorAndClamp) {
    const auto pop = constant_population({10'000, 20, 2}, {1, 1, 2}, {1.0, 2.0, 3.0});
    const auto a = baseline_allocation(pop, 0.05);
    EXPECT_EQ(a.sizes, (std::vector<std::int64_t>{500, 2, 2}));
    EXPECT_EQ(a.provenance.kind, AllocationKind::baseline);
    EXPECT_THROW(baseline_allocation(pop, 0.0), std::invalid_argument);
}

TEST(DrawStratified, CensusStratumEqualsTruth) {
    const auto pop = make_population({4, 6}, {1, 2}, {{20, 30, 40, 50}, {1, 2, 3, 4, 5, 6}});
    Allocation a{{4, 2}, {}};
    const auto s = draw_stratified(pop, a, RandomStream::derive(1, "s"));
    std::set<std::int64_t> units(s.strata[0].units.begin(), s.strata[0].units.end());
    EXPECT_EQ(units, (std::set<std::int64_t>{0, 1, 2, 3}));
    const auto summary = summarize_baseline(s, pop);
    EXPECT_DOUBLE_EQ(summary.strata[0].mean[index_of(Variable::hours)], 35.0);
    EXPECT_NEAR(summary.strata[0].sd[index_of(Variable::hours)], std::sqrt(500.0 / 3.0), 1e-12);
    EXPECT_EQ(s.strata[1].units.size(), 2U);
    for (const auto u : s.strata[1].units) {
        EXPECT_GE(u, 4);
        EXPECT_LT(u, 10);
    }
}

TEST(DrawStratified, ZeroSizeStratumIsEmpty) {
    const auto pop = constant_population({5, 5}, {1, 1}, {1.0, 2.0});
    const auto s = draw_stratified(pop, Allocation{{0, 3}, {}}, RandomStream::derive(2, "s"));
    EXPECT_TRUE(s.strata[0].units.empty());
    EXPECT_EQ(s.total(), 3);
}

TEST(DrawStratified, RejectsOversizedAllocation) {
    const auto pop = constant_population({5}, {1}, {1.0});
    EXPECT_THROW(draw_stratified(pop, Allocation{{6}, {}}, RandomStream::derive(2, "s")), std::invalid_argument);
}

TEST(DrawStratified, InclusionProbability) {
    const auto pop = constant_population({1000}, {1}, {1.0});
    const Allocation a{{50}, {}};
    const auto root = RandomStream::derive(3, "inclusion");
    int hits = 0;
    const int draws = 10'000;
    for (int r = 0; r < draws; ++r) {
        const auto s = draw_stratified(pop, a, root.child(static_cast<std::uint64_t>(r)));
        hits += std::count(s.strata[0].units.begin(), s.strata[0].units.end(), 123) > 0 ? 1 : 0;
    }
    const double p = 0.05;
    EXPECT_NEAR(hits / static_cast<double>(draws), p, 3.0 * std::sqrt(p * (1 - p) / draws));
}

TEST(DrawStratified, BinaryAllZeroGivesZeroSd) {
    const auto pop = make_population({10}, {1}, {std::vector<double>(10, 40.0)},
                                     {std::vector<std::uint8_t>(10, 0)});
    const auto s = draw_stratified(pop, Allocation{{5}, {}}, RandomStream::derive(4, "s"));
    const auto summary = summarize_baseline(s, pop);
    EXPECT_EQ(summary.strata[0].sd[index_of(Variable::employed)], 0.0);
    EXPECT_EQ(summary.strata[0].mean[index_of(Variable::employed)], 0.0);
}

TEST(EffectiveSampleSize, HandArithmetic) {
    EXPECT_EQ(effective_sample_size(500, 10'000, 1.15), 413);
    EXPECT_EQ(effective_sample_size(100, 100'000'000, 1.0), 100);
    EXPECT_EQ(effective_sample_size(50, 50, 1.1), 1);
}

TEST(NestedSubsample, IdentityAndExactRounding) {
    const auto pop = constant_population({500, 300}, {1, 2}, {1.0, 2.0});
    const auto master = draw_stratified(pop, Allocation{{100, 7}, {}}, RandomStream::derive(5, "m"));
    const auto stream = RandomStream::derive(5, "sub");
    const auto same = nested_subsample(master, 1.0, stream);
    for (std::size_t h = 0; h < 2; ++h) {
        std::set<std::int64_t> a(master.strata[h].units.begin(), master.strata[h].units.end());
        std::set<std::int64_t> b(same.strata[h].units.begin(), same.strata[h].units.end());
        EXPECT_EQ(a, b);
    }
    const auto sub = nested_subsample(master, 0.2, stream);
    EXPECT_EQ(sub.strata[0].units.size(), 20U);
    EXPECT_EQ(sub.strata[1].units.size(), 1U);
    EXPECT_EQ(sub.floored_strata, std::vector<int>{});
    const auto tiny = nested_subsample(master, 0.05, stream);
    EXPECT_EQ(tiny.strata[1].units.size(), 1U);
    EXPECT_EQ(tiny.floored_strata, std::vector<int>{1});
}

TEST(NestedSubsample, LadderIsNested) {
    const auto pop = constant_population({2000}, {1}, {1.0});
    const auto master = draw_stratified(pop, Allocation{{400}, {}}, RandomStream::derive(6, "m"));
    const auto stream = RandomStream::derive(6, "sub");
    const auto s8 = nested_subsample(master, 0.8, stream);
    const auto s5 = nested_subsample(master, 0.5, stream);
    std::set<std::int64_t> big(s8.strata[0].units.begin(), s8.strata[0].units.end());
    for (const auto u : s5.strata[0].units) {
        EXPECT_TRUE(big.contains(u));
    }
    EXPECT_EQ(s5.strata[0].units.size(), 200U);
}

TEST(SampleManifest, RoundTrip) {
    const auto pop = constant_population({50, 40}, {1, 2}, {1.0, 2.0});
    const auto s = draw_stratified(pop, Allocation{{10, 5}, {}}, RandomStream::derive(7, "m"));
    const auto path = std::filesystem::temp_directory_path() / "stratopt_manifest_test.csv";
    write_text_file(path, sample_manifest_csv(s));
    const auto back = read_sample_manifest(path.string(), 2);
    EXPECT_EQ(back.allocation.sizes, s.allocation.sizes);
    for (std::size_t h = 0; h < 2; ++h) {
        EXPECT_EQ(back.strata[h].units, s.strata[h].units);
    }
    std::filesystem::remove(path);
}

TEST(BaselineSummary, CsvRoundTrip) {
    const auto s = synthesize([] {
        auto c = PopulationConfig::desk_scale();
        c.units = 4000;
        c.strata = 8;
        c.domains = 2;
        return c;
    }());
    const auto sample = draw_stratified(s.population, baseline_allocation(s.population, 0.05),
                                        RandomStream::derive(8, "b"));
    const auto summary = summarize_baseline(sample, s.population);
    const auto path = std::filesystem::temp_directory_path() / "stratopt_summary_test.csv";
    write_text_file(path, baseline_summary_csv(summary));
    const auto back = read_baseline_summary_csv(path.string());
    ASSERT_EQ(back.strata.size(), summary.strata.size());
    EXPECT_EQ(back.domains, 2);
    for (std::size_t h = 0; h < back.strata.size(); ++h) {
        EXPECT_EQ(back.strata[h].n, summary.strata[h].n);
        EXPECT_EQ(back.strata[h].N, summary.strata[h].N);
        EXPECT_EQ(back.strata[h].deff, summary.strata[h].deff);
        EXPECT_EQ(back.strata[h].mean, summary.strata[h].mean);
        EXPECT_EQ(back.strata[h].sd, summary.strata[h].sd);
    }
    std::filesystem::remove(path);
}

} // namespace
