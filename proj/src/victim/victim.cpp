// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/victim/victim.hpp"

#include <algorithm>

#include "declab/common/error.hpp"
#include "declab/decoder/search.hpp"
#include "declab/decoder/transforms.hpp"

namespace declab::victim {

namespace {

// Entries beyond this are evicted wholesale; contexts repeat heavily within
// a stage and rarely across stages.
constexpr std::size_t kCacheCapacity = 4096;

std::size_t pool_size(const RankedDistribution& final_dist, const DefenseConfig& defense) {
    const std::size_t support = final_dist.size();
    if (!defense.top_m) return support;
    return std::min<std::size_t>(support, static_cast<std::size_t>(*defense.top_m));
}

void validate_defense(const DefenseConfig& d) {
    require(d.rho >= 0.0 && d.rho <= 1.0, ErrorKind::InvalidInput, "rho must lie in [0,1]");
    require(!d.top_m || *d.top_m >= 1, ErrorKind::InvalidInput, "top_m must be at least 1");
}

}  // namespace

std::shared_ptr<const lm::ContextModel> build_model(const ModelSpec& spec) {
    if (const auto* s = std::get_if<lm::SyntheticModelSpec>(&spec)) {
        return std::make_shared<lm::SyntheticModel>(*s);
    }
    return std::make_shared<lm::NGramModel>(lm::NGramModel::from_spec(std::get<lm::NGramModelSpec>(spec)));
}

TokenId defended_emit(const RankedDistribution& final_dist, TokenId sampled,
                      const DefenseConfig& defense, CounterRng& rng) {
    validate_defense(defense);
    if (defense.rho == 0.0 || rng.uniform() >= defense.rho) return sampled;
    return final_dist[rng.below(pool_size(final_dist, defense))].token;
}

RankedDistribution defended_distribution(const RankedDistribution& final_dist,
                                         const DefenseConfig& defense) {
    validate_defense(defense);
    const std::size_t m = pool_size(final_dist, defense);
    std::vector<TokenProb> mixed;
    mixed.reserve(final_dist.size());
    for (std::size_t r = 0; r < final_dist.size(); ++r) {
        double p = (1.0 - defense.rho) * final_dist[r].prob;
        if (r < m) p += defense.rho / static_cast<double>(m);
        mixed.push_back({final_dist[r].token, p});
    }
    return RankedDistribution::normalize(std::move(mixed));
}

std::size_t Victim::TokensHash::operator()(const Tokens& t) const noexcept {
    std::uint64_t h = t.size();
    for (TokenId id : t) h = mix64(h, id);
    return static_cast<std::size_t>(h);
}

Victim::Victim(VictimConfig config)
    : Victim(config, build_model(config.model)) {}

Victim::Victim(VictimConfig config, std::shared_ptr<const lm::ContextModel> model)
    : config_(std::move(config)), model_(std::move(model)) {
    require(model_ != nullptr, ErrorKind::InvalidInput, "victim needs a model");
    config_.decoding.validate();
    sampler_ = config_.decoding.sampler;
    const std::size_t vocab = model_->vocabulary().size();
    require(config_.top_logprobs >= 0 && static_cast<std::size_t>(config_.top_logprobs) <= vocab,
            ErrorKind::InvalidInput, "top_logprobs must lie in [0, vocabulary size]");
    for (TokenId t : config_.hidden_prefix) {
        require(t < vocab, ErrorKind::InvalidInput, "hidden prefix token outside vocabulary");
    }
    if (config_.defense) validate_defense(*config_.defense);
}

std::shared_ptr<const Victim::StepPlan> Victim::plan(const Tokens& context) const {
    {
        std::lock_guard lock(cache_mutex_);
        auto it = cache_.find(context);
        if (it != cache_.end()) return it->second;
    }
    const auto logits = model_->logits(context);
    std::optional<RankedDistribution> final_dist;
    std::vector<double> cdf;
    if (!config_.decoding.deterministic()) {
        final_dist = decoding::final_distribution(sampler_, logits);
        cdf.reserve(final_dist->size());
        double c = 0.0;
        for (const auto& e : *final_dist) cdf.push_back(c += e.prob);
    }
    auto step = std::make_shared<const StepPlan>(
        StepPlan{lm::softmax(logits), std::move(final_dist), std::move(cdf)});
    std::lock_guard lock(cache_mutex_);
    if (cache_.size() >= kCacheCapacity) cache_.clear();
    cache_.emplace(context, step);
    return step;
}

TokenId Victim::draw(const StepPlan& step, CounterRng& rng) const {
    const auto& dist = *step.final;
    const double u = rng.uniform();
    auto it = std::upper_bound(step.cdf.begin(), step.cdf.end(), u);
    const std::size_t rank = std::min<std::size_t>(it - step.cdf.begin(), dist.size() - 1);
    TokenId token = dist[rank].token;
    if (config_.defense) token = defended_emit(dist, token, *config_.defense, rng);
    return token;
}

GenerationResponse Victim::generate(const GenerationRequest& request) {
    require(!request.prompt.empty(), ErrorKind::InvalidInput, "prompt must be non-empty");
    require(request.max_tokens >= 1, ErrorKind::InvalidInput, "max_tokens must be at least 1");
    const std::size_t vocab = vocab_size();
    for (TokenId t : request.prompt) {
        if (t >= vocab) throw Error(ErrorKind::InvalidInput, "prompt token " + std::to_string(t) + " outside vocabulary");
    }
    CounterRng rng(config_.seed, ordinal_.fetch_add(1, std::memory_order_relaxed));

    Tokens context = config_.hidden_prefix;
    context.insert(context.end(), request.prompt.begin(), request.prompt.end());
    const std::size_t start = context.size();

    GenerationResponse response;
    const bool expose = config_.top_logprobs > 0 && request.logprobs;
    if (expose) response.inner_top.emplace();
    auto record_inner = [&](const StepPlan& step) {
        if (!expose) return;
        const auto n = std::min<std::size_t>(config_.top_logprobs, step.inner.size());
        response.inner_top->emplace_back(step.inner.begin(), step.inner.begin() + static_cast<std::ptrdiff_t>(n));
    };

    const auto algorithm = config_.decoding.algorithm;
    if (algorithm == decoding::Algorithm::Beam) {
        decoding::InnerFn inner = [this](const Tokens& ctx) {
            auto step = plan(ctx);
            return std::shared_ptr<const RankedDistribution>(step, &step->inner);
        };
        const auto out = decoding::beam_decode(inner, context, config_.decoding.beam_size, request.max_tokens);
        for (TokenId t : out) {
            if (expose) record_inner(*plan(context));
            context.push_back(t);
        }
    } else {
        for (int i = 0; i < request.max_tokens; ++i) {
            const auto step = plan(context);
            record_inner(*step);
            context.push_back(algorithm == decoding::Algorithm::Greedy ? step->inner.top() : draw(*step, rng));
        }
    }
    response.tokens.assign(context.begin() + static_cast<std::ptrdiff_t>(start), context.end());
    response.usage = {1, request.prompt.size() + response.tokens.size()};
    queries_.fetch_add(response.usage.queries, std::memory_order_relaxed);
    tokens_.fetch_add(response.usage.tokens, std::memory_order_relaxed);
    return response;
}

RankedDistribution Victim::exact_final_distribution(const Tokens& prompt, OracleAccess) const {
    require(!config_.decoding.deterministic(), ErrorKind::Unsupported,
            "exact final distribution requires a sampler victim");
    Tokens context = config_.hidden_prefix;
    context.insert(context.end(), prompt.begin(), prompt.end());
    const auto step = plan(context);
    if (config_.defense) return defended_distribution(*step->final, *config_.defense);
    return *step->final;
}

RankedDistribution Victim::inner_distribution(const Tokens& prompt, OracleAccess) const {
    Tokens context = config_.hidden_prefix;
    context.insert(context.end(), prompt.begin(), prompt.end());
    return plan(context)->inner;
}

QueryLedger Victim::ledger() const {
    return {queries_.load(), tokens_.load()};
}

}  // namespace declab::victim
