// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "declab/attack/attack.hpp"

namespace declab::harness {

struct CostModel {
    std::string name;
    double price_per_1k_tokens = 0.0;

    // ada, babbage, curie or davinci.
    static CostModel preset(const std::string& name);
    static std::vector<CostModel> presets();
};

// tokens / 1000 * price.
double cost_estimate(std::uint64_t tokens, const CostModel& model);

struct Budget {
    std::uint64_t queries = 0;
    std::uint64_t tokens = 0;
};

// Published worst case: about 400,000 queries of five tokens each.
Budget worst_case_budget();

// Queries and tokens a full sampler run (through stage 6) spends under
// `settings`, counting per-prompt top-ups the way the sampling observer
// does. Greedy, beam and early-exit runs spend no more than this. Token
// counts take the prompts in the given order, so they are exact when the
// prompts share one length.
Budget planned_budget(const attack::AttackSettings& settings);

}  // namespace declab::harness
