// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "declab/common/error.hpp"
#include "declab/common/rng.hpp"
#include "declab/decoder/search.hpp"
#include "declab/decoder/transforms.hpp"
#include "declab/lm/model.hpp"
#include "declab/stats/stats.hpp"

namespace declab::stats {
namespace {

RankedDistribution random_dist(CounterRng& rng, std::size_t n) {
    std::vector<double> w(n);
    for (auto& x : w) x = 0.01 + rng.uniform();
    double s = 0.0;
    for (double x : w) s += x;
    for (auto& x : w) x /= s;
    return RankedDistribution::from_dense(w);
}

RankedDistribution empirical(const RankedDistribution& d, std::size_t n, std::uint64_t seed) {
    CounterRng rng(seed);
    std::map<TokenId, double> tally;
    for (std::size_t i = 0; i < n; ++i) tally[decoding::sample_token(d, rng)] += 1.0;
    std::vector<lm::TokenProb> entries;
    for (const auto& [t, c] : tally) entries.push_back({t, c / static_cast<double>(n)});
    return RankedDistribution::normalize(entries);
}

TEST(Ks, IdenticalSamplesGiveZeroDistance) {
    const auto ranking = RankedDistribution::from_dense({0.5, 0.3, 0.2});
    const std::vector<TokenId> a{0, 0, 1, 2, 1, 0};
    const auto r = ks_two_sample(a, a, ranking);
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_NEAR(r.p_value, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(r.effective_n, 3.0);
}

TEST(Ks, DisjointSupportsGiveUnitDistance) {
    const auto ranking = RankedDistribution::from_dense({0.25, 0.25, 0.25, 0.25});
    const std::vector<TokenId> a(500, 0), b(500, 3);
    const auto r = ks_two_sample(a, b, ranking);
    EXPECT_DOUBLE_EQ(r.statistic, 1.0);
    EXPECT_LT(r.p_value, 1e-50);
}

TEST(Ks, RejectsEmptySamples) {
    const auto ranking = RankedDistribution::from_dense({0.5, 0.5});
    EXPECT_THROW(ks_two_sample({}, {0}, ranking), Error);
}

TEST(Ks, PValueMonotoneInDistance) {
    double last = 1.0;
    for (double lambda = 0.0; lambda < 3.0; lambda += 0.01) {
        const double q = kolmogorov_q(lambda);
        EXPECT_LE(q, last + 1e-15);
        last = q;
    }
    // Both series agree where they meet.
    EXPECT_NEAR(kolmogorov_q(1.1799999), kolmogorov_q(1.18), 1e-6);
    // Standard table: Q(1.36) is about 0.049.
    EXPECT_NEAR(kolmogorov_q(1.36), 0.0494, 5e-4);
}

TEST(Ks, MatchedQuantileSamplesPass) {
    CounterRng rng(3);
    const auto d = random_dist(rng, 30);
    const auto report = compare(d, d, 1000);
    EXPECT_NEAR(report.ks.p_value, 1.0, 1e-12);
    EXPECT_TRUE(report.match());
}

TEST(Kl, HandEvaluatedExample) {
    const auto p = RankedDistribution::from_dense({0.5, 0.5});
    const auto q = RankedDistribution::from_dense({0.9, 0.1});
    const double expected = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
    EXPECT_NEAR(kl_divergence(p, q), expected, 1e-15);
    EXPECT_NEAR(kl_divergence(p, q), 0.5108, 1e-4);
}

TEST(Kl, IdenticalIsZero) {
    CounterRng rng(9);
    const auto d = random_dist(rng, 20);
    EXPECT_EQ(kl_divergence(d, d), 0.0);
}

TEST(Kl, SupportViolationWithoutSmoothing) {
    const auto p = RankedDistribution::from_dense({0.5, 0.5});
    const auto q = RankedDistribution::point_mass(0);
    try {
        kl_divergence(p, q);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SupportMismatch);
    }
    EXPECT_GT(kl_divergence(p, q, {.smoothing = true}), 1.0);
}

TEST(Kl, NonNegativeAndZeroOnlyWhenEqual) {
    CounterRng rng(10);
    for (int trial = 0; trial < 500; ++trial) {
        const auto p = random_dist(rng, 12);
        const auto q = random_dist(rng, 12);
        EXPECT_GT(kl_divergence(p, q), 0.0);
        EXPECT_GT(kl_divergence(p, q, {.smoothing = true}), 0.0);
        EXPECT_EQ(kl_divergence(p, p), 0.0);
    }
}

TEST(Kl, SameConfigSmallDifferentConfigLarge) {
    lm::SyntheticModelSpec spec;
    spec.vocab_size = 1000;
    const lm::SyntheticModel model(spec);
    const auto logits = model.logits({17, 4, 256});
    decoding::SamplerParams a, b;
    a.temperature = 0.8;
    a.top_k = 30;
    b.temperature = 1.3;
    b.top_p = 0.95;
    const auto exact_a = decoding::final_distribution(a, logits);
    const auto exact_b = decoding::final_distribution(b, logits);
    const std::size_t n = 100000;
    const double same = kl_divergence(empirical(exact_a, n, 1), empirical(exact_a, n, 2), {.smoothing = true});
    const double different = kl_divergence(empirical(exact_a, n, 3), empirical(exact_b, n, 4), {.smoothing = true});
    EXPECT_LT(same, 0.0017 + 0.0007);
    EXPECT_GT(different, 0.1);
}

TEST(Kurtosis, UniformMatchesClosedForm) {
    // Discrete uniform on 1..n: excess kurtosis -6(n^2 + 1) / (5(n^2 - 1)).
    for (int n : {2, 4, 10}) {
        const auto d = RankedDistribution::from_dense(std::vector<double>(n, 1.0 / n));
        const double nn = static_cast<double>(n) * n;
        EXPECT_NEAR(kurtosis(d), -6.0 * (nn + 1.0) / (5.0 * (nn - 1.0)), 1e-12);
    }
}

TEST(Kurtosis, PeakedFarAboveUniform) {
    const auto peaked = RankedDistribution::from_dense({0.97, 0.01, 0.01, 0.01});
    const auto uniform = RankedDistribution::from_dense({0.25, 0.25, 0.25, 0.25});
    EXPECT_GT(kurtosis(peaked), kurtosis(uniform) + 10.0);
}

TEST(Kurtosis, InvariantUnderRelabeling) {
    const auto a = RankedDistribution::from_entries({{0, 0.5}, {1, 0.3}, {2, 0.2}});
    const auto b = RankedDistribution::from_entries({{7, 0.3}, {4, 0.5}, {9, 0.2}});
    EXPECT_EQ(kurtosis(a), kurtosis(b));
    EXPECT_THROW(kurtosis(RankedDistribution::point_mass(3)), Error);
}

TEST(Entropy, UniformIsLogN) {
    const auto d = RankedDistribution::from_dense(std::vector<double>(8, 0.125));
    EXPECT_NEAR(entropy(d), std::log(8.0), 1e-15);
    EXPECT_EQ(entropy(RankedDistribution::point_mass(1)), 0.0);
}

TEST(Perplexity, UniformModelGivesVocabularySize) {
    const lm::TableModel m(lm::Vocabulary(100), std::vector<double>(100, 0.0));
    const auto r = perplexity(m, {3, 99, 0, 42});
    EXPECT_FALSE(r.infinite);
    EXPECT_NEAR(r.value, 100.0, 1e-9);
}

TEST(Perplexity, HalfProbabilityStepsGiveTwo) {
    const lm::TableModel m(lm::Vocabulary(2), {0.0, 0.0});
    EXPECT_NEAR(perplexity(m, {0, 1}).value, 2.0, 1e-12);
}

TEST(Perplexity, ZeroProbabilityIsFlagged) {
    const lm::TableModel m(lm::Vocabulary(2), {0.0, -INFINITY});
    const auto r = perplexity(m, {0, 1});
    EXPECT_TRUE(r.infinite);
    EXPECT_TRUE(std::isinf(r.value));
    EXPECT_THROW(perplexity(m, {}), Error);
}

TEST(Perplexity, GreedyOutputBeatsRandomTokens) {
    lm::SyntheticModelSpec spec;
    spec.vocab_size = 300;
    const lm::SyntheticModel m(spec);
    CounterRng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Tokens prompt{static_cast<TokenId>(rng.below(300)), static_cast<TokenId>(rng.below(300))};
        const auto greedy = decoding::greedy_decode(m, prompt, 20);
        Tokens random(20);
        for (auto& t : random) t = static_cast<TokenId>(rng.below(300));
        EXPECT_LE(perplexity(m, greedy, prompt).value, perplexity(m, random, prompt).value);
    }
}

TEST(IdenticalOutput, Examples) {
    EXPECT_NEAR(identical_output_probability(0.99, 50, 20), 4.31e-5, 1e-7);
    EXPECT_EQ(identical_output_probability(1.0, 50, 20), 1.0);
    EXPECT_EQ(identical_output_probability(0.5, 1, 1), 0.5);
    EXPECT_THROW(identical_output_probability(0.0, 1, 1), Error);
}

TEST(IdenticalOutput, Multiplicative) {
    CounterRng rng(2);
    for (int i = 0; i < 100; ++i) {
        const double p = 0.5 + 0.5 * rng.uniform();
        const double a = 1.0 + static_cast<double>(rng.below(60));
        const double b = 1.0 + static_cast<double>(rng.below(30));
        EXPECT_NEAR(identical_output_probability(p, a, b), identical_output_probability(p, a * b, 1), 1e-14);
    }
}

TEST(QuantileSample, ApproximatesDistribution) {
    const auto d = RankedDistribution::from_dense({0.5, 0.3, 0.2});
    const auto s = quantile_sample(d, 10);
    EXPECT_EQ(std::count(s.begin(), s.end(), 0u), 5);
    EXPECT_EQ(std::count(s.begin(), s.end(), 1u), 3);
    EXPECT_EQ(std::count(s.begin(), s.end(), 2u), 2);
}

TEST(TotalVariation, HalfL1) {
    const auto p = RankedDistribution::from_dense({0.5, 0.5});
    const auto q = RankedDistribution::from_dense({0.9, 0.1});
    EXPECT_NEAR(total_variation(p, q), 0.4, 1e-15);
}

}  // namespace
}  // namespace declab::stats
