#include "threadscope/error.hpp"
#include "threadscope/stats.hpp"
#include "threadscope/util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace threadscope {
namespace {

std::vector<std::string> labels_from_confusion(const std::vector<std::vector<int>>& m, bool first_rater) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m[i].size(); ++j) {
            for (int k = 0; k < m[i][j]; ++k) out.push_back("c" + std::to_string(first_rater ? i : j));
        }
    }
    return out;
}

std::vector<double> random_values(Rng& rng, std::size_t n, int levels) {
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng.below(levels));
    return v;
}

TEST(Pearson, AffineAndReflection) {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    std::vector<double> y(x.size()), z(x.size());
    std::transform(x.begin(), x.end(), y.begin(), [](double v) { return 2 * v + 1; });
    std::transform(x.begin(), x.end(), z.begin(), [](double v) { return -v; });
    EXPECT_NEAR(pearson(x, y), 1.0, 1e-12);
    EXPECT_NEAR(pearson(x, z), -1.0, 1e-12);
}

TEST(Pearson, HandEvaluatedFixture) {
    const std::vector<double> x = {1, 2, 3, 4}, y = {1, 3, 2, 4};
    EXPECT_NEAR(pearson(x, y), 0.8, 1e-12);
}

TEST(Pearson, Errors) {
    const std::vector<double> x = {1, 2, 3}, flat = {2, 2, 2}, shorter = {1, 2};
    EXPECT_THROW(pearson(x, flat), Error);
    EXPECT_THROW(pearson(x, shorter), Error);
    EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST(AverageRanks, TiesShareTheMeanRank) {
    EXPECT_EQ(average_ranks(std::vector<double>{2, 2, 3}), std::vector<double>({1.5, 1.5, 3}));
    EXPECT_EQ(average_ranks(std::vector<double>{5, 1, 5, 5}), std::vector<double>({3, 1, 3, 3}));
}

TEST(Spearman, MonotoneFixtures) {
    const std::vector<double> x = {1, 2, 3, 4, 5}, up = {10, 20, 25, 70, 71}, down = {9, 7, 3, 2, -4};
    EXPECT_DOUBLE_EQ(spearman(x, up), 1.0);
    EXPECT_DOUBLE_EQ(spearman(x, down), -1.0);
}

TEST(Spearman, TiedFixture) {
    // Ranks (1,2,3) vs (1.5,1.5,3): r = 1.5 / sqrt(2 * 1.5) = sqrt(3)/2.
    EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 3}), std::sqrt(3.0) / 2, 1e-12);
    EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 3}), 0.866, 1e-3);
}

TEST(Spearman, AllTiedIsAnError) {
    EXPECT_THROW(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{4, 4, 4}), Error);
}

TEST(Spearman, InvariantUnderMonotoneTransforms) {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const auto x = random_values(rng, 40, 5);
        const auto y = random_values(rng, 40, 7);
        if (std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end()) continue;
        if (std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end()) continue;
        std::vector<double> tx(x.size()), ty(y.size());
        std::transform(x.begin(), x.end(), tx.begin(), [](double v) { return std::exp(v) - 3.0; });
        std::transform(y.begin(), y.end(), ty.begin(), [](double v) { return v * v * v + 4 * v; });
        const double base = spearman(x, y);
        EXPECT_NEAR(spearman(tx, ty), base, 1e-12);
        EXPECT_NEAR(spearman(y, x), base, 1e-12);
        EXPECT_LE(std::fabs(base), 1.0 + 1e-12);
    }
}

TEST(CohenKappa, ConfusionFixture) {
    // p_o = 35/50 = 0.7; marginals (25,25) and (30,20) give p_e = 0.5.
    const auto a = labels_from_confusion({{20, 5}, {10, 15}}, true);
    const auto b = labels_from_confusion({{20, 5}, {10, 15}}, false);
    EXPECT_NEAR(cohen_kappa(a, b), 0.40, 1e-9);
    EXPECT_NEAR(exact_match(a, b), 0.70, 1e-12);
}

TEST(CohenKappa, IdenticalListsAgreeFully) {
    const std::vector<std::string> a = {"x", "y", "z", "x", "y"};
    EXPECT_DOUBLE_EQ(cohen_kappa(a, a), 1.0);
    EXPECT_DOUBLE_EQ(exact_match(a, a), 1.0);
}

TEST(CohenKappa, ChanceLevelAgreementIsNearZero) {
    // Outer product of identical marginals (40/30/30 over 100 items): agreement equals chance.
    const auto a = labels_from_confusion({{16, 12, 12}, {12, 9, 9}, {12, 9, 9}}, true);
    const auto b = labels_from_confusion({{16, 12, 12}, {12, 9, 9}, {12, 9, 9}}, false);
    EXPECT_NEAR(cohen_kappa(a, b), 0.0, 0.05);
}

TEST(CohenKappa, SingleCategoryMarginalsAreDegenerate) {
    const std::vector<std::string> a = {"x", "x", "x"};
    try {
        cohen_kappa(a, a);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
    }
}

TEST(CohenKappa, BoundedAndOneOnlyForPerfectAgreement) {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> a(20), b(20);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = std::string(1, static_cast<char>('a' + rng.below(3)));
            b[i] = rng.bernoulli(0.5) ? a[i] : std::string(1, static_cast<char>('a' + rng.below(3)));
        }
        double k = 0.0;
        try {
            k = cohen_kappa(a, b);
        } catch (const Error&) {
            continue;
        }
        EXPECT_GE(k, -1.0 - 1e-12);
        EXPECT_LE(k, 1.0 + 1e-12);
        EXPECT_EQ(std::fabs(k - 1.0) < 1e-12, exact_match(a, b) == 1.0);
    }
}

TEST(Summarize, NearestRankQuantiles) {
    const auto s = summarize(std::vector<double>{3, 1, 2});
    EXPECT_EQ(s.median, 2);
    EXPECT_EQ(s.min, 1);
    EXPECT_EQ(s.max, 3);
    const auto one = summarize(std::vector<double>{7.5});
    EXPECT_EQ(one.p5, 7.5);
    EXPECT_EQ(one.median, 7.5);
    EXPECT_EQ(one.p95, 7.5);
}

TEST(Summarize, HundredPointFixture) {
    std::vector<double> v(100);
    for (int i = 0; i < 100; ++i) v[i] = (i * 37) % 100 + 0.5;  // permutation of 0.5..99.5
    const auto s = summarize(v);
    EXPECT_EQ(s.p95, 94.5);  // 95th smallest
    EXPECT_EQ(s.p5, 4.5);
    EXPECT_EQ(s.median, 49.5);
    EXPECT_DOUBLE_EQ(s.mean, 50.0);
    EXPECT_LE(s.min, s.p5);
    EXPECT_LE(s.p95, s.max);
}

TEST(Summarize, HalfOpenBins) {
    const auto edges = uniform_edges(0.0, 1.0, 4);
    ASSERT_EQ(edges.size(), 5u);
    const auto s = summarize(std::vector<double>{0.0, 0.25, 0.3, 0.99, 1.0, 1.5, -0.1}, edges);
    EXPECT_EQ(s.counts, std::vector<std::size_t>({1, 2, 0, 2}));
}

TEST(Summarize, EmptyIsAnError) {
    try {
        summarize(std::vector<double>{});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
    }
}

TEST(Quantile, OrderedInvariantOnRandomFixtures) {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(1 + rng.below(50));
        for (auto& x : v) x = rng.unit();
        const auto s = summarize(v);
        EXPECT_LE(s.min, s.p5);
        EXPECT_LE(s.p5, s.median);
        EXPECT_LE(s.median, s.p95);
        EXPECT_LE(s.p95, s.max);
    }
}

}  // namespace
}  // namespace threadscope
