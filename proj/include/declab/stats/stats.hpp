// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "declab/lm/model.hpp"

namespace declab::stats {

using lm::RankedDistribution;
using lm::TokenId;
using lm::Tokens;

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double effective_n = 0.0;
};

// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2).
double kolmogorov_q(double lambda);

// Two-sample KS test on token samples laid out in the order of `ranking`.
// Tokens missing from the ranking go last, by ascending id.
KsResult ks_two_sample(const std::vector<TokenId>& a, const std::vector<TokenId>& b,
                       const RankedDistribution& ranking);

struct KlOptions {
    // Adds epsilon to every entry of the union support before comparing, so
    // empirical distributions with unseen tokens stay finite.
    bool smoothing = false;
    double epsilon = 1e-9;
};

// KL(p || q) in nats. Without smoothing, support(p) must lie in support(q).
double kl_divergence(const RankedDistribution& p, const RankedDistribution& q, KlOptions options = {});

double total_variation(const RankedDistribution& p, const RankedDistribution& q);

// Excess kurtosis of the rank variable R with P(R = r) = p_r. Peaked
// next-token distributions score high, flat ones low.
double kurtosis(const RankedDistribution& dist);

// Shannon entropy in nats.
double entropy(const RankedDistribution& dist);

struct PerplexityResult {
    double value = 0.0;
    // Set when some token had zero probability; value is then +inf.
    bool infinite = false;
};

// exp(-mean ln p(token_i | context ++ tokens[0..i))).
PerplexityResult perplexity(const lm::ContextModel& model, const Tokens& tokens, const Tokens& context = {});

// Probability that `repeats` generations of `length` tokens all coincide
// when each step repeats with probability p.
double identical_output_probability(double p_per_token, double length, double repeats);

// Deterministic sample of size n: draw j is the token at CDF quantile
// (j + 0.5) / n over the ranked order. Its empirical distribution is the
// closest n-point approximation of `dist`.
std::vector<TokenId> quantile_sample(const RankedDistribution& dist, std::size_t n);

struct ComparisonThresholds {
    double min_p_value = 0.9;
    double max_kl = 0.02;
};

struct ComparisonReport {
    KsResult ks;
    double kl_nats = 0.0;
    bool ks_pass = false;
    bool kl_pass = false;
    bool match() const { return ks_pass && kl_pass; }
};

// KS on quantile samples of size n (ordered by `a`) plus smoothed KL(a || b).
ComparisonReport compare(const RankedDistribution& a, const RankedDistribution& b,
                         std::size_t n = 1000, ComparisonThresholds thresholds = {});

}  // namespace declab::stats
