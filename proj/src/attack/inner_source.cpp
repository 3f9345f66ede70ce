// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/attack/inner_source.hpp"

#include <cmath>

#include "declab/common/error.hpp"

namespace declab::attack {

double InnerView::prob_of(TokenId token) const {
    for (const auto& e : entries) {
        if (e.token == token) return e.prob;
    }
    return 0.0;
}

std::optional<std::size_t> InnerView::rank_of(TokenId token) const {
    for (std::size_t r = 0; r < entries.size(); ++r) {
        if (entries[r].token == token) return r + 1;
    }
    return std::nullopt;
}

RankedDistribution InnerView::distribution() const {
    require(!entries.empty(), ErrorKind::InvalidInput, "empty inner view");
    // Renormalizing a partial slice keeps the ratios, which is all the
    // estimators read from it.
    return RankedDistribution::normalize(entries);
}

namespace {

InnerView view_of(std::vector<TokenProb> entries) {
    double total = 0.0;
    for (const auto& e : entries) total += e.prob;
    InnerView view{std::move(entries), false};
    view.complete = std::abs(total - 1.0) <= 1e-9;
    return view;
}

}  // namespace

InnerView ApiLogprobsSource::inner(const Tokens& context) {
    auto it = memo_.find(context);
    if (it != memo_.end()) return it->second;
    const auto response = api_.generate({context, 1, true});
    require(response.inner_top.has_value() && !response.inner_top->empty(), ErrorKind::Unsupported,
            "victim does not expose inner probabilities");
    require(response.inner_top->front().size() >= 2, ErrorKind::Unsupported,
            "victim exposes fewer than two inner probabilities");
    absorb(context, response);
    return memo_.at(context);
}

void ApiLogprobsSource::absorb(const Tokens& prompt, const victim::GenerationResponse& response) {
    if (!response.inner_top) return;
    Tokens context = prompt;
    for (std::size_t i = 0; i < response.inner_top->size() && i < response.tokens.size(); ++i) {
        if (!memo_.count(context)) memo_.emplace(context, view_of((*response.inner_top)[i]));
        context.push_back(response.tokens[i]);
    }
}

RankedDistribution reference_inner_distribution(const lm::ContextModel& base, const Tokens& query) {
    return lm::softmax(base.logits(query));
}

InnerView ReferenceModelSource::inner(const Tokens& context) {
    const auto dist = reference_inner_distribution(*base_, context);
    return {dist.entries(), true};
}

std::string to_string(InnerSourceKind kind) {
    switch (kind) {
    case InnerSourceKind::ApiLogprobs: return "api";
    case InnerSourceKind::ReferenceModel: return "reference";
    }
    return "unknown";
}

}  // namespace declab::attack
