// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <variant>
#include <vector>

#include "declab/common/rng.hpp"
#include "declab/decoder/config.hpp"
#include "declab/lm/model.hpp"

namespace declab::victim {

using lm::RankedDistribution;
using lm::TokenId;
using lm::TokenProb;
using lm::Tokens;

using ModelSpec = std::variant<lm::SyntheticModelSpec, lm::NGramModelSpec>;

std::shared_ptr<const lm::ContextModel> build_model(const ModelSpec& spec);

struct DefenseConfig {
    double rho = 0.1;
    // Replacement pool size; unset means the whole final support.
    std::optional<int> top_m;
};

struct VictimConfig {
    ModelSpec model = lm::SyntheticModelSpec{};
    decoding::DecodingConfig decoding;
    int top_logprobs = 0;
    Tokens hidden_prefix;
    std::optional<DefenseConfig> defense;
    std::uint64_t seed = 0;
};

struct GenerationRequest {
    Tokens prompt;
    int max_tokens = 1;
    // Lets bulk samplers skip the inner_top payload.
    bool logprobs = true;
};

struct Usage {
    std::uint64_t queries = 0;
    std::uint64_t tokens = 0;

    Usage& operator+=(const Usage& o) {
        queries += o.queries;
        tokens += o.tokens;
        return *this;
    }
    bool operator==(const Usage&) const = default;
};

using QueryLedger = Usage;

struct GenerationResponse {
    Tokens tokens;
    // One list per generated position, most probable first.
    std::optional<std::vector<std::vector<TokenProb>>> inner_top;
    Usage usage;
};

// Emitted token after the countermeasure: with probability rho a uniform
// draw from the top_m entries of `final_dist` replaces `sampled`.
TokenId defended_emit(const RankedDistribution& final_dist, TokenId sampled,
                      const DefenseConfig& defense, CounterRng& rng);
// (1 - rho) * final + rho * Uniform(top_m).
RankedDistribution defended_distribution(const RankedDistribution& final_dist,
                                         const DefenseConfig& defense);

// Marker argument for white-box calls that the service never exposes.
struct OracleAccess {
    explicit OracleAccess() = default;
};

class Victim {
public:
    explicit Victim(VictimConfig config);
    Victim(VictimConfig config, std::shared_ptr<const lm::ContextModel> model);

    GenerationResponse generate(const GenerationRequest& request);

    // Exact next-step emission distribution for a sampler victim, defense
    // mixture included.
    RankedDistribution exact_final_distribution(const Tokens& prompt, OracleAccess) const;
    // Undefended inner distribution at hidden_prefix ++ prompt.
    RankedDistribution inner_distribution(const Tokens& prompt, OracleAccess) const;

    QueryLedger ledger() const;
    const VictimConfig& config() const noexcept { return config_; }
    const lm::ContextModel& model() const noexcept { return *model_; }
    std::size_t vocab_size() const noexcept { return model_->vocabulary().size(); }

private:
    struct StepPlan {
        RankedDistribution inner;
        std::optional<RankedDistribution> final;
        std::vector<double> cdf;
    };

    struct TokensHash {
        std::size_t operator()(const Tokens& t) const noexcept;
    };

    std::shared_ptr<const StepPlan> plan(const Tokens& context) const;
    TokenId draw(const StepPlan& step, CounterRng& rng) const;

    VictimConfig config_;
    std::shared_ptr<const lm::ContextModel> model_;
    decoding::SamplerParams sampler_;

    mutable std::mutex cache_mutex_;
    mutable std::unordered_map<Tokens, std::shared_ptr<const StepPlan>, TokensHash> cache_;

    std::atomic<std::uint64_t> ordinal_{0};
    std::atomic<std::uint64_t> queries_{0};
    std::atomic<std::uint64_t> tokens_{0};
};

}  // namespace declab::victim
