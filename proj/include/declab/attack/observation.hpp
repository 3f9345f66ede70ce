// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <unordered_map>

#include "declab/victim/api.hpp"
#include "declab/victim/victim.hpp"

namespace declab::attack {

using lm::RankedDistribution;
using lm::TokenId;
using lm::TokenProb;
using lm::Tokens;

// Token counts from repeated single-step generations.
class EmpiricalDistribution {
public:
    void add(TokenId token, std::uint64_t n = 1);

    std::uint64_t total_draws() const noexcept { return total_; }
    std::uint64_t count(TokenId token) const;
    std::size_t unique_tokens() const noexcept { return counts_.size(); }
    const std::unordered_map<TokenId, std::uint64_t>& counts() const noexcept { return counts_; }
    // counts / N, descending with TokenId tie-break.
    RankedDistribution ranked() const;

private:
    std::unordered_map<TokenId, std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

// What the estimators see of the final distribution at one prompt.
struct FinalObservation {
    RankedDistribution dist;
    // Number of draws behind `dist`; infinite for an exact oracle.
    double draws = std::numeric_limits<double>::infinity();

    bool exact() const noexcept { return draws == std::numeric_limits<double>::infinity(); }
};

// N single-token generations from `prompt`, tallied.
EmpiricalDistribution estimate_final_distribution(victim::GenerationApi& api, const Tokens& prompt,
                                                  std::uint64_t n);

// Source of final-distribution observations for the estimation stages.
class FinalObserver {
public:
    virtual ~FinalObserver() = default;
    // Observation built from at least `draws` samples; repeated calls for
    // the same prompt reuse earlier samples and only top up.
    virtual FinalObservation observe(const Tokens& prompt, std::uint64_t draws) = 0;
    virtual std::size_t support_size(const Tokens& prompt, std::uint64_t draws) {
        return observe(prompt, draws).dist.size();
    }
};

class SamplingObserver final : public FinalObserver {
public:
    explicit SamplingObserver(victim::GenerationApi& api) : api_(api) {}
    FinalObservation observe(const Tokens& prompt, std::uint64_t draws) override;
    const EmpiricalDistribution& tally(const Tokens& prompt) { return tallies_[prompt]; }

private:
    victim::GenerationApi& api_;
    std::map<Tokens, EmpiricalDistribution> tallies_;
};

// White-box observer backed by the victim's exact final distribution.
class ExactObserver final : public FinalObserver {
public:
    explicit ExactObserver(const victim::Victim& victim) : victim_(victim) {}
    FinalObservation observe(const Tokens& prompt, std::uint64_t draws) override;

private:
    const victim::Victim& victim_;
};

}  // namespace declab::attack
