// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

// Pure estimators over collected observations. Nothing here issues queries.

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "declab/attack/inner_source.hpp"
#include "declab/attack/observation.hpp"

namespace declab::attack {

// Beam size is the largest inner rank (one-based) of any emitted token.
int beam_size_from_ranks(const std::vector<std::size_t>& ranks);

// tau = ln(p_i / p_j) / ln(p'_i / p'_j) for one token pair.
double stage3_estimate_temperature(double inner_i, double inner_j, double final_i, double final_j);

// Averages the pairwise formula over inner-rank pairs (1,2), (1,3), (2,3)
// that are present in the final observation with distinct probabilities.
double temperature_from_top_pairs(const InnerView& inner, const FinalObservation& final_obs);

struct TemperatureFit {
    double temperature = 1.0;
    // Tokens that entered the fit, summed over prompts.
    std::size_t tokens = 0;
};

// Maximum-likelihood temperature pooled over prompts. For each prompt the
// fit uses the longest run of top inner ranks that were all observed, and
// maximizes the likelihood of their counts conditional on landing in that
// run: count_i ~ p_i^(1/tau) / sum_run p_j^(1/tau). With a run of two
// tokens this is exactly the pairwise formula.
//
// With `through_deepest` the window instead runs to the deepest observed
// rank, unseen ranks inside it counting as zero. That is only valid once the
// output is known to keep a prefix of the ranking at least that deep, which
// holds for every sampler pipeline; it uses far more of the tail.
TemperatureFit fit_temperature(const std::vector<InnerView>& inner, const std::vector<FinalObservation>& finals,
                               bool through_deepest = false);

// Probabilities proportional to p_i^(1/tau).
RankedDistribution detemper(const RankedDistribution& inner, double tau);

// Stage-4 rule: when every prompt shows the same number of distinct tokens,
// that number is k.
std::optional<std::size_t> top_k_from_unique_counts(const std::vector<std::size_t>& unique_counts);

// Ratio of summed detempered inner mass to summed final mass over the top
// `tokens` inner ranks. Equals the nucleus mass actually kept.
double stage5_estimate_p_ratio(const RankedDistribution& inner_detempered, const FinalObservation& final_obs,
                               std::size_t tokens = 3);

// Detempered inner mass of the observed final support.
double stage5_estimate_p_sum(const RankedDistribution& inner_detempered, const std::vector<TokenId>& support);

// Per-prompt inputs to the nucleus and top-k-before-nucleus decisions.
struct NucleusEvidence {
    // Kept mass estimate (stage-5 ratio over the leading inner ranks).
    double kept_mass = 1.0;
    // Detempered probability of the last observed inner rank: the kept mass
    // exceeds p by less than this under pure nucleus truncation.
    double overshoot = 0.0;
    // Standard error of kept_mass; zero for exact observations.
    double noise = 0.0;
    // Distinct tokens observed.
    std::size_t support = 0;
    std::size_t tokens_used = 0;
};

// `mass_target` sets how many leading ranks enter the ratio: ranks are added
// until their detempered mass reaches it (at least three).
NucleusEvidence nucleus_evidence(const RankedDistribution& inner_detempered, const FinalObservation& final_obs,
                                 double mass_target = 0.4);

// Top-k precedes nucleus when no single p fits every prompt: pure nucleus
// truncation keeps a mass in [p, p + overshoot) at each prompt. `z` widens
// the test by that many standard errors of the difference.
struct OrderTest {
    bool top_k_first = false;
    double spread = 0.0;
    // max(kept - overshoot) - min(kept); positive means inconsistent.
    double violation = 0.0;
    double tolerance = 0.0;
};
OrderTest test_top_k_before_nucleus(const std::vector<NucleusEvidence>& evidence, double z = 4.5);

struct JointEstimate {
    std::size_t k = 0;
    double p = 0.0;
    // Interval of nucleus thresholds consistent with every prompt at k.
    double p_low = 0.0;
    double p_high = 0.0;
    // Other cut-offs that also explain every prompt.
    std::size_t alternatives = 0;
};

struct SupportEvidence {
    RankedDistribution inner_detempered;
    // Deepest detempered rank (1-based) seen in the output. For exact
    // observations this is the support size.
    std::size_t support = 0;
    // Number of draws behind the observation; weights the profile loss.
    double draws = 1.0;
};

// Searches k = 1..|V|-1 for a top-k cut under which one nucleus threshold
// reproduces every observed support size. A prompt with support s admits
// p in (C_{s-1}/C_k, C_s/C_k], C_j being the top-j detempered mass; k must
// cut deeper than the nucleus on at least one prompt, otherwise top-k alone
// explains the data. Among consistent k returns the one with the widest
// threshold interval, or nullopt when only
// k = |V| (no top-k) fits. `slack` tolerates that much interval overlap
// deficit from estimated temperatures.
std::optional<JointEstimate> consistent_top_k(const std::vector<SupportEvidence>& evidence,
                                              std::size_t vocab_size, double slack = 1e-12);

struct ProfileFit {
    // Best top-k cut below |V|, if any prompt constrains one.
    std::optional<JointEstimate> top_k;
    JointEstimate nucleus_only;
    // Profile negative log-likelihood of each model, up to a shared constant.
    double loss_top_k = INFINITY;
    double loss_nucleus_only = 0.0;
};

// Sampled counterpart of consistent_top_k. For a given k the output
// probabilities depend on p only through each prompt's support, and the
// likelihood of the draws is largest for the smallest supports. Taking p just
// above the tightest lower bound max C_{r-1}/C_k (r the deepest seen rank)
// keeps every prompt feasible; each prompt then pays draws * ln(C_s / C_r)
// for the unseen ranks its support s is forced to include. The k with the
// least total loss wins; k = |V| is the nucleus-only model.
ProfileFit profile_top_k(const std::vector<SupportEvidence>& evidence, std::size_t vocab_size);

// Nucleus-only threshold interval from supports (the k = |V| case); k is
// left at zero.
JointEstimate nucleus_interval(const std::vector<SupportEvidence>& evidence);

// Coupon bound: expected draws to see a token of probability p_min once.
double expected_queries_for_rarest(double p_min);

}  // namespace declab::attack
