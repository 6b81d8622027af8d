#include "stratopt/rng.h"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

namespace {

using stratopt::RandomStream;

TEST(RandomStream, SameKeyGivesSameSequence) {
    auto a = RandomStream::derive(7, "popgen/deff");
    auto b = RandomStream::derive(7, "popgen/deff");
    for (int i = 0; i < 100; ++i) {
        ASSERT_EQ(a(), b());
    }
}

TEST(RandomStream, DistinctPathsAndSeedsDiffer) {
    std::set<std::uint64_t> keys{RandomStream::derive(7, "a").key(), RandomStream::derive(7, "b").key(),
                                 RandomStream::derive(8, "a").key(), RandomStream::derive(7, "a").child(0).key(),
                                 RandomStream::derive(7, "a").child(1).key(),
                                 RandomStream::derive(7, "a").child("x").key()};
    EXPECT_EQ(keys.size(), 6U);
}

TEST(RandomStream, ChildDoesNotConsumeParentDraws) {
    auto a = RandomStream::derive(3, "p");
    auto b = RandomStream::derive(3, "p");
    (void)a.child("c");
    (void)a.child(5);
    EXPECT_EQ(a(), b());
}

TEST(RandomStream, UniformMomentsAndRange) {
    auto s = RandomStream::derive(11, "uniform");
    const int n = 200000;
    double sum = 0.0;
    double sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sum2 += u * u;
    }
    const double m = sum / n;
    EXPECT_NEAR(m, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n));
    EXPECT_NEAR(sum2 / n - m * m, 1.0 / 12.0, 0.002);
}

TEST(RandomStream, NormalMoments) {
    auto s = RandomStream::derive(12, "normal");
    const int n = 200000;
    double sum = 0.0;
    double sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = s.normal();
        sum += z;
        sum2 += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 3.0 / std::sqrt(n));
    EXPECT_NEAR(sum2 / n, 1.0, 3.0 * std::sqrt(2.0 / n));
}

TEST(RandomStream, ChiSquareMean) {
    auto s = RandomStream::derive(13, "chi");
    for (const double dof : {0.5, 3.0, 25.0}) {
        const int n = 50000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = s.chi_square(dof);
            ASSERT_GE(x, 0.0);
            sum += x;
        }
        EXPECT_NEAR(sum / n, dof, 4.0 * std::sqrt(2.0 * dof / n)) << "dof " << dof;
    }
}

TEST(RandomStream, ChiSquareRejectsNonPositiveDof) {
    auto s = RandomStream::derive(1, "chi");
    EXPECT_THROW(s.chi_square(0.0), std::invalid_argument);
}

} // namespace
