// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/harness/cost.hpp"

#include <algorithm>

#include "declab/common/error.hpp"

namespace declab::harness {

std::vector<CostModel> CostModel::presets() {
    return {{"ada", 0.0004}, {"babbage", 0.0005}, {"curie", 0.002}, {"davinci", 0.02}};
}

CostModel CostModel::preset(const std::string& name) {
    for (auto& model : presets()) {
        if (model.name == name) return model;
    }
    throw Error(ErrorKind::Config, "unknown cost preset '" + name + "'");
}

double cost_estimate(std::uint64_t tokens, const CostModel& model) {
    require(model.price_per_1k_tokens >= 0.0, ErrorKind::InvalidInput, "price must be non-negative");
    return static_cast<double>(tokens) / 1000.0 * model.price_per_1k_tokens;
}

Budget worst_case_budget() { return {400000, 2000000}; }

Budget planned_budget(const attack::AttackSettings& settings) {
    settings.validate();
    const auto& prompts = settings.prompts;
    const auto n = prompts.size();
    auto billed = [](const attack::Tokens& prompt, std::uint64_t generated) {
        return static_cast<std::uint64_t>(prompt.size()) + generated;
    };
    Budget budget;

    const auto repeats = static_cast<std::uint64_t>(settings.stage1_repeats);
    budget.queries += repeats;
    budget.tokens += repeats * billed(prompts.front(), static_cast<std::uint64_t>(settings.stage1_length));

    auto clip = [n](int count) { return std::min<std::size_t>(static_cast<std::size_t>(count), n); };
    const std::size_t s3 = clip(settings.stage3_prompts);
    const std::size_t s4 = clip(settings.stage4_prompts);
    const std::size_t s6 = clip(std::max(settings.stage6_prompts, 2));

    // One logprobs query per prompt whose inner distribution is read: the whole
    // pool when prompts are ranked, otherwise just the ones the stages use.
    const std::size_t inner_reads = settings.select_flat_prompts ? n : std::max({s3, s4, s6});
    for (std::size_t i = 0; i < inner_reads; ++i) {
        budget.queries += 1;
        budget.tokens += billed(prompts[i], 1);
    }

    // The observer tops each prompt up to the largest draw count any stage asks for.
    const std::uint64_t stage45 = std::max(settings.stage4_queries, settings.stage5_queries);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t draws = 0;
        if (i < s3) draws = std::max(draws, settings.stage3_queries);
        if (i < s4) draws = std::max(draws, stage45);
        if (i < s6) draws = std::max(draws, settings.stage6_queries);
        budget.queries += draws;
        budget.tokens += draws * billed(prompts[i], 1);
    }
    return budget;
}

}  // namespace declab::harness
