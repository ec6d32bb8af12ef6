#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <set>
#include <span>
#include <vector>

#include "geoedit/random.hpp"

namespace geoedit {
namespace {

// Published reference values: FNV-1a 64 test vectors and the first output
// of SplitMix64 from state 0.
TEST(Hashing, Fnv1aMatchesReferenceVectors) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Hashing, Mix64MatchesSplitMixFirstOutput) { EXPECT_EQ(mix64(0), 0xe220a8397b1dcdafULL); }

TEST(Hashing, DeriveSeedIsDeterministicAndNameSensitive) {
    EXPECT_EQ(derive_seed(7, "data"), derive_seed(7, "data"));
    EXPECT_EQ(derive_seed(7, "data"), mix64(7 ^ fnv1a64("data")));
    std::set<std::uint64_t> seen;
    for (const char* name : {"data", "init", "pretrain", "ft_old", "ft_new", "ae", "tsne"}) {
        seen.insert(derive_seed(7, name));
    }
    EXPECT_EQ(seen.size(), 7u);
    EXPECT_NE(derive_seed(7, "data"), derive_seed(8, "data"));
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, DifferentSeedsDiffer) {
    Rng a(1);
    Rng b(2);
    int equal = 0;
    for (int i = 0; i < 100; ++i) equal += a.next() == b.next();
    EXPECT_LT(equal, 2);
}

TEST(Rng, UniformStaysInHalfOpenInterval) {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double v = rng.uniform(-2.0, 5.0);
        ASSERT_GE(v, -2.0);
        ASSERT_LT(v, 5.0);
    }
}

TEST(Rng, BelowIsInRangeAndRoughlyUniform) {
    Rng rng(4);
    std::array<int, 7> counts{};
    const int draws = 70000;
    for (int i = 0; i < draws; ++i) {
        const auto k = rng.below(7);
        ASSERT_LT(k, 7u);
        ++counts[k];
    }
    // Chi-square with 6 degrees of freedom; 22.46 is the 0.999 quantile.
    double chi2 = 0.0;
    for (const int c : counts) chi2 += (c - draws / 7.0) * (c - draws / 7.0) / (draws / 7.0);
    EXPECT_LT(chi2, 22.46);
}

TEST(Rng, NormalHasUnitMoments) {
    Rng rng(5);
    const int n = 200000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> v(1 + rng.below(30));
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
        rng.shuffle(std::span<int>(v));
        std::vector<int> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < v.size(); ++i) ASSERT_EQ(sorted[i], static_cast<int>(i));
    }
}

}  // namespace
}  // namespace geoedit
