// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "declab/common/error.hpp"
#include "declab/decoder/config.hpp"
#include "declab/decoder/search.hpp"
#include "declab/decoder/transforms.hpp"
#include "declab/lm/model.hpp"

namespace declab::decoding {
namespace {

using lm::TokenProb;
using lm::Tokens;

const std::vector<double> kD4{0.4, 0.3, 0.2, 0.1};

LogitVector log_of(const std::vector<double>& probs) {
    LogitVector out;
    for (double p : probs) out.push_back(std::log(p));
    return out;
}

void expect_probs(const RankedDistribution& d, const std::vector<double>& expected, double tol) {
    ASSERT_EQ(d.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(d[i].prob, expected[i], tol) << "rank " << i;
}

LogitVector random_logits(CounterRng& rng, std::size_t n, double scale) {
    LogitVector out(n);
    for (auto& l : out) l = scale * (2.0 * rng.uniform() - 1.0);
    return out;
}

SamplerParams random_case(CounterRng& rng, int c, std::size_t vocab) {
    auto p = case_components(c);
    if (p.temperature) p.temperature = 0.3 + 1.2 * rng.uniform();
    if (p.top_k) p.top_k = 1 + static_cast<int>(rng.below(vocab));
    if (p.top_p) p.top_p = 0.05 + 0.9 * rng.uniform();
    return p;
}

// Wilson-Hilferty upper quantile of chi-square at the given normal z.
double chi_square_quantile(double df, double z) {
    const double a = 2.0 / (9.0 * df);
    return df * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

TEST(Temperature, UnitTemperatureIsSoftmax) { expect_probs(apply_temperature(log_of(kD4), 1.0), kD4, 1e-15); }

TEST(Temperature, HalfSquaresAndRenormalizes) {
    // 0.4^2 : 0.3^2 : 0.2^2 : 0.1^2 over 0.30.
    expect_probs(apply_temperature(log_of(kD4), 0.5), {0.16 / 0.3, 0.09 / 0.3, 0.04 / 0.3, 0.01 / 0.3}, 1e-12);
    expect_probs(apply_temperature(log_of(kD4), 0.5), {0.5333, 0.3000, 0.1333, 0.0333}, 5e-5);
}

TEST(Temperature, EqualLogitsStayUniform) {
    for (double tau : {0.1, 0.7, 3.0}) expect_probs(apply_temperature({2.0, 2.0, 2.0}, tau), {1 / 3.0, 1 / 3.0, 1 / 3.0}, 1e-15);
}

TEST(Temperature, RejectsNonPositive) {
    EXPECT_THROW(apply_temperature(log_of(kD4), 0.0), Error);
    EXPECT_THROW(apply_temperature(log_of(kD4), -1.0), Error);
    EXPECT_THROW(apply_temperature(log_of(kD4), INFINITY), Error);
}

TEST(TopK, Examples) {
    const auto d = lm::RankedDistribution::from_dense(kD4);
    expect_probs(truncate_top_k(d, 4), kD4, 0.0);
    expect_probs(truncate_top_k(d, 2), {0.4 / 0.7, 0.3 / 0.7}, 1e-15);
    expect_probs(truncate_top_k(d, 2), {0.5714, 0.4286}, 5e-5);
    const auto one = truncate_top_k(d, 1);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one.top(), 0u);
    EXPECT_EQ(one[0].prob, 1.0);
    expect_probs(truncate_top_k(d, 50), kD4, 0.0);
    EXPECT_THROW(truncate_top_k(d, 0), Error);
}

TEST(TopK, TieBreakKeepsLowerTokenId) {
    const auto d = lm::RankedDistribution::from_dense({0.2, 0.4, 0.2, 0.2});
    const auto t = truncate_top_k(d, 2);
    EXPECT_EQ(t[0].token, 1u);
    EXPECT_EQ(t[1].token, 0u);
}

TEST(Nucleus, Examples) {
    const auto d = lm::RankedDistribution::from_dense(kD4);
    expect_probs(truncate_nucleus(d, 1.0), kD4, 0.0);
    expect_probs(truncate_nucleus(d, 0.65), {0.4 / 0.7, 0.3 / 0.7}, 1e-15);
    // The prefix mass 0.4 reaches p = 0.4 under the >= convention.
    expect_probs(truncate_nucleus(d, 0.4), {1.0}, 0.0);
    EXPECT_THROW(truncate_nucleus(d, 0.0), Error);
    EXPECT_THROW(truncate_nucleus(d, 1.5), Error);
}

TEST(Nucleus, AchievedMassWithinOvershootBound) {
    CounterRng rng(21);
    for (int trial = 0; trial < 500; ++trial) {
        const auto d = lm::softmax(random_logits(rng, 40, 3.0));
        const double p = 0.05 + 0.9 * rng.uniform();
        const auto kept = truncate_nucleus(d, p).size();
        const double mass = d.prefix_mass(kept);
        EXPECT_GE(mass, p - 1e-12);
        EXPECT_LT(mass, p + d[kept - 1].prob);
    }
}

TEST(FinalDistribution, PureSamplingIsSoftmax) {
    const LogitVector logits{2.0, 1.0, 0.0, -1.0};
    const auto a = final_distribution(DecodingConfig::sampling({}), logits);
    const auto b = lm::softmax(logits);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(FinalDistribution, TemperatureThenTopK) {
    SamplerParams p;
    p.temperature = 0.5;
    p.top_k = 2;
    // [0.16, 0.09] / 0.25.
    expect_probs(final_distribution(p, log_of(kD4)), {0.64, 0.36}, 1e-12);
}

TEST(FinalDistribution, TopKThenNucleus) {
    SamplerParams p;
    p.top_k = 4;
    p.top_p = 0.8;
    // S_k = 0.92; nucleus keeps 3 tokens with mass 0.8 / 0.92 >= 0.8.
    expect_probs(final_distribution(p, log_of({0.35, 0.25, 0.2, 0.12, 0.08})), {0.4375, 0.3125, 0.25}, 1e-12);
}

TEST(FinalDistribution, ExclusiveFlagDropsTopPUnderTemperature) {
    SamplerParams p;
    p.temperature = 0.5;
    p.top_p = 0.5;
    p.exclusive_temp_topp = true;
    expect_probs(final_distribution(p, log_of(kD4)), {0.16 / 0.3, 0.09 / 0.3, 0.04 / 0.3, 0.01 / 0.3}, 1e-12);
    p.temperature = 1.0;
    expect_probs(final_distribution(p, log_of(kD4)), {0.4 / 0.7, 0.3 / 0.7}, 1e-12);
}

TEST(FinalDistribution, RejectsDeterministicConfigs) {
    EXPECT_THROW(final_distribution(DecodingConfig::greedy(), log_of(kD4)), Error);
}

TEST(Pipeline, RatioPreservationAllCases) {
    CounterRng rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto logits = random_logits(rng, 30, 4.0);
        for (int c = 1; c <= 8; ++c) {
            const auto p = random_case(rng, c, logits.size());
            const auto d = final_distribution(p, logits);
            const double tau = p.temperature.value_or(1.0);
            for (std::size_t i = 1; i < d.size(); ++i) {
                const double ratio = d[0].prob / d[i].prob;
                const double expected = std::exp((logits[d[0].token] - logits[d[i].token]) / tau);
                ASSERT_NEAR(ratio / expected, 1.0, 1e-9) << "case " << c;
            }
        }
    }
}

TEST(Pipeline, SupportSizeIsMinOfCuts) {
    CounterRng rng(8);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto logits = random_logits(rng, 25, 3.0);
        const auto p = random_case(rng, 8, logits.size());
        const auto tempered = apply_temperature(logits, *p.temperature);
        const auto after_k = truncate_top_k(tempered, *p.top_k);
        const std::size_t nucleus_len = truncate_nucleus(after_k, *p.top_p).size();
        const auto d = final_distribution(p, logits);
        EXPECT_EQ(d.size(), std::min({static_cast<std::size_t>(*p.top_k), nucleus_len, tempered.size()}));
        EXPECT_GE(d.size(), 1u);
    }
}

TEST(Pipeline, IdentityTruncations) {
    CounterRng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto d = lm::softmax(random_logits(rng, 20, 3.0));
        const auto a = truncate_top_k(d, static_cast<int>(d.size()));
        const auto b = truncate_nucleus(d, 1.0);
        for (std::size_t i = 0; i < d.size(); ++i) {
            EXPECT_EQ(a[i], d[i]);
            EXPECT_EQ(b[i], d[i]);
        }
    }
}

TEST(Pipeline, SupportMonotoneInKAndP) {
    CounterRng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const auto d = lm::softmax(random_logits(rng, 30, 3.0));
        std::size_t last = 0;
        for (int k = 1; k <= 30; ++k) {
            const auto s = truncate_top_k(d, k).size();
            EXPECT_GE(s, last);
            last = s;
        }
        last = 0;
        for (double p = 0.05; p <= 1.0; p += 0.05) {
            const auto s = truncate_nucleus(d, p).size();
            EXPECT_GE(s, last);
            last = s;
        }
    }
}

TEST(Sampling, PointMassAlwaysReturnsItsToken) {
    CounterRng rng(1);
    const auto d = lm::RankedDistribution::point_mass(7);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_token(d, rng), 7u);
}

TEST(Sampling, SameSeedSameDraws) {
    const auto d = lm::RankedDistribution::from_dense(kD4);
    CounterRng a(99, 3), b(99, 3);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_token(d, a), sample_token(d, b));
}

TEST(Sampling, FrequenciesMatchTopTwo) {
    const auto d = truncate_top_k(lm::RankedDistribution::from_dense(kD4), 2);
    CounterRng rng(2024);
    const int n = 1000000;
    int first = 0;
    for (int i = 0; i < n; ++i) first += sample_token(d, rng) == 0 ? 1 : 0;
    EXPECT_NEAR(first / static_cast<double>(n), 0.4 / 0.7, 0.002);
}

TEST(Sampling, ChiSquareGoodnessOfFit) {
    SamplerParams p;
    p.temperature = 0.8;
    p.top_k = 12;
    p.top_p = 0.95;
    CounterRng logit_rng(6);
    const auto d = final_distribution(p, random_logits(logit_rng, 40, 2.0));
    ASSERT_GE(d.size(), 3u);
    CounterRng rng(77);
    const int n = 1000000;
    std::map<lm::TokenId, int> counts;
    for (int i = 0; i < n; ++i) ++counts[sample_token(d, rng)];
    double chi2 = 0.0;
    for (const auto& e : d) {
        const double expected = e.prob * n;
        const double diff = counts[e.token] - expected;
        chi2 += diff * diff / expected;
    }
    EXPECT_EQ(counts.size(), d.size());
    // Upper 1e-3 point of the chi-square law.
    EXPECT_LT(chi2, chi_square_quantile(static_cast<double>(d.size() - 1), 3.0902));
}

// "Students opened their doors" continues greedily with "to", but "for the
// first time" scores higher as a whole: beam search revises its first token.
class DoorsModel {
public:
    DoorsModel() : model_(lm::Vocabulary(labels()), LogitVector(labels().size(), 0.0)) {
        model_.add_rule_probs({id("doors")}, {{id("to"), 0.5}, {id("for"), 0.4}});
        model_.add_rule_probs({id("for")}, {{id("the"), 0.9}});
        model_.add_rule_probs({id("for"), id("the")}, {{id("first"), 0.9}});
        model_.add_rule_probs({id("the"), id("first")}, {{id("time"), 0.9}});
        model_.add_rule_probs({id("first"), id("time")}, {{id("."), 0.9}});
    }
    static std::vector<std::string> labels() {
        return {"Students", "opened", "their", "doors", "to", "for", "the", "first", "time", "."};
    }
    lm::TokenId id(const std::string& w) const { return *model_.vocabulary().find(w); }
    Tokens words(std::initializer_list<const char*> ws) const {
        Tokens out;
        for (const char* w : ws) out.push_back(id(w));
        return out;
    }
    const lm::TableModel& model() const { return model_; }

private:
    lm::TableModel model_;
};

TEST(Beam, DoorsExampleRevisesEarlierToken) {
    const DoorsModel doors;
    const auto prompt = doors.words({"Students", "opened", "their", "doors"});
    EXPECT_EQ(beam_decode(doors.model(), prompt, 2, 1), doors.words({"to"}));
    EXPECT_EQ(beam_decode(doors.model(), prompt, 2, 4), doors.words({"for", "the", "first", "time"}));
    // Greedy keeps its first choice.
    EXPECT_EQ(greedy_decode(doors.model(), prompt, 4)[0], doors.id("to"));
}

TEST(Greedy, FollowsHandSetArgmaxes) {
    lm::TableModel m(lm::Vocabulary(4), {3.0, 0.0, 0.0, 0.0});
    m.add_rule({0}, {0.0, 0.0, 2.0, 0.0});
    m.add_rule({2}, {0.0, 0.0, 0.0, 1.0});
    m.add_rule({3}, {0.0, 4.0, 0.0, 0.0});
    EXPECT_EQ(greedy_decode(m, {1}, 4), (Tokens{0, 2, 3, 1}));
}

TEST(Greedy, PrefixStableAndEqualToBeamOne) {
    lm::SyntheticModelSpec spec;
    spec.vocab_size = 60;
    const lm::SyntheticModel m(spec);
    for (lm::TokenId start = 0; start < 10; ++start) {
        const Tokens prompt{start, 3};
        const auto longer = greedy_decode(m, prompt, 6);
        const auto shorter = greedy_decode(m, prompt, 5);
        EXPECT_TRUE(std::equal(shorter.begin(), shorter.end(), longer.begin()));
        EXPECT_EQ(beam_decode(m, prompt, 1, 6), longer);
    }
}

TEST(Beam, EmittedTokensRankWithinBeam) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        lm::SyntheticModelSpec spec;
        spec.seed = seed;
        spec.vocab_size = 40;
        const lm::SyntheticModel m(spec);
        for (int beam = 2; beam <= 10; ++beam) {
            const Tokens prompt{static_cast<lm::TokenId>(seed), static_cast<lm::TokenId>(beam)};
            const auto out = beam_decode(m, prompt, beam, 6);
            Tokens ctx = prompt;
            for (lm::TokenId t : out) {
                const auto rank = m.inner_distribution(ctx).rank_of(t);
                ASSERT_TRUE(rank.has_value());
                EXPECT_LT(*rank, static_cast<std::size_t>(beam)) << "seed " << seed << " beam " << beam;
                ctx.push_back(t);
            }
        }
    }
}

TEST(Config, CasesRoundTripAndValidation) {
    for (int c = 1; c <= 8; ++c) EXPECT_EQ(sampler_case(case_components(c)), c);
    EXPECT_THROW(case_components(0), Error);
    SamplerParams bad;
    bad.top_p = 0.0;
    EXPECT_THROW(DecodingConfig::sampling(bad).validate(), Error);
    bad.top_p.reset();
    bad.top_k = 0;
    EXPECT_THROW(DecodingConfig::sampling(bad).validate(), Error);
    EXPECT_THROW(DecodingConfig::beam(0).validate(), Error);
}

TEST(Config, EffectiveFoldsNeutralValues) {
    SamplerParams p;
    p.temperature = 1.0;
    p.top_p = 1.0;
    EXPECT_EQ(sampler_case(DecodingConfig::sampling(p).effective()), 4);
    p.temperature = 0.7;
    p.top_p = 0.9;
    p.exclusive_temp_topp = true;
    EXPECT_EQ(sampler_case(DecodingConfig::sampling(p).effective()), 1);
}

}  // namespace
}  // namespace declab::decoding
