// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <string>

#include "declab/attack/observation.hpp"
#include "declab/lm/model.hpp"

namespace declab::attack {

// Inner probabilities at one context, most probable first. `complete`
// means the entries cover the whole distribution; otherwise they are the
// top-n slice an API exposes.
struct InnerView {
    std::vector<TokenProb> entries;
    bool complete = false;

    double prob_of(TokenId token) const;
    // One-based rank, or nullopt if the token is not listed.
    std::optional<std::size_t> rank_of(TokenId token) const;
    RankedDistribution distribution() const;
};

enum class InnerSourceKind { ApiLogprobs, ReferenceModel };

// Where the attacker gets inner probabilities. Degraded attacks run with no
// source at all, so they cannot read inner probabilities by construction.
class InnerProbSource {
public:
    virtual ~InnerProbSource() = default;
    virtual InnerSourceKind kind() const = 0;
    virtual InnerView inner(const Tokens& context) = 0;
    // Lets the source reuse inner_top lists that came back with responses
    // the attack requested anyway.
    virtual void absorb(const Tokens& /*prompt*/, const victim::GenerationResponse& /*response*/) {}
};

// Reads the victim's exposed logprobs (one max_tokens=1 query per new
// context, memoized).
class ApiLogprobsSource final : public InnerProbSource {
public:
    explicit ApiLogprobsSource(victim::GenerationApi& api) : api_(api) {}
    InnerSourceKind kind() const override { return InnerSourceKind::ApiLogprobs; }
    InnerView inner(const Tokens& context) override;
    void absorb(const Tokens& prompt, const victim::GenerationResponse& response) override;

private:
    victim::GenerationApi& api_;
    std::map<Tokens, InnerView> memo_;
};

// Softmax of the attacker's own base model, standing in for a victim whose
// context carries an unseen prefix.
RankedDistribution reference_inner_distribution(const lm::ContextModel& base, const Tokens& query);

class ReferenceModelSource final : public InnerProbSource {
public:
    explicit ReferenceModelSource(std::shared_ptr<const lm::ContextModel> base) : base_(std::move(base)) {}
    InnerSourceKind kind() const override { return InnerSourceKind::ReferenceModel; }
    InnerView inner(const Tokens& context) override;

private:
    std::shared_ptr<const lm::ContextModel> base_;
};

std::string to_string(InnerSourceKind kind);

}  // namespace declab::attack
