// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/attack/observation.hpp"

#include "declab/common/error.hpp"

namespace declab::attack {

void EmpiricalDistribution::add(TokenId token, std::uint64_t n) {
    counts_[token] += n;
    total_ += n;
}

std::uint64_t EmpiricalDistribution::count(TokenId token) const {
    auto it = counts_.find(token);
    return it == counts_.end() ? 0 : it->second;
}

RankedDistribution EmpiricalDistribution::ranked() const {
    require(total_ > 0, ErrorKind::InvalidInput, "empirical distribution has no draws");
    std::vector<TokenProb> entries;
    entries.reserve(counts_.size());
    for (const auto& [token, c] : counts_) entries.push_back({token, static_cast<double>(c)});
    return RankedDistribution::normalize(std::move(entries));
}

namespace {

void draw_into(victim::GenerationApi& api, const Tokens& prompt, std::uint64_t n, EmpiricalDistribution& tally) {
    const victim::GenerationRequest request{prompt, 1, false};
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto response = api.generate(request);
        require(!response.tokens.empty(), ErrorKind::Transport, "victim returned no tokens");
        tally.add(response.tokens.front());
    }
}

}  // namespace

EmpiricalDistribution estimate_final_distribution(victim::GenerationApi& api, const Tokens& prompt,
                                                  std::uint64_t n) {
    require(n >= 1, ErrorKind::InvalidInput, "need at least one draw");
    EmpiricalDistribution tally;
    draw_into(api, prompt, n, tally);
    return tally;
}

FinalObservation SamplingObserver::observe(const Tokens& prompt, std::uint64_t draws) {
    require(draws >= 1, ErrorKind::InvalidInput, "need at least one draw");
    auto& tally = tallies_[prompt];
    if (tally.total_draws() < draws) draw_into(api_, prompt, draws - tally.total_draws(), tally);
    return {tally.ranked(), static_cast<double>(tally.total_draws())};
}

FinalObservation ExactObserver::observe(const Tokens& prompt, std::uint64_t /*draws*/) {
    return {victim_.exact_final_distribution(prompt, victim::OracleAccess{}),
            std::numeric_limits<double>::infinity()};
}

}  // namespace declab::attack
