// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/lm/distribution.hpp"

#include <algorithm>
#include <cmath>

#include "declab/common/error.hpp"

namespace declab::lm {

Vocabulary::Vocabulary(std::size_t size) : size_(size) {
    require(size >= 2, ErrorKind::InvalidInput, "vocabulary needs at least two tokens");
}

Vocabulary::Vocabulary(std::vector<std::string> labels)
    : size_(labels.size()), labels_(std::move(labels)) {
    require(size_ >= 2, ErrorKind::InvalidInput, "vocabulary needs at least two tokens");
}

const std::string& Vocabulary::label(TokenId id) const {
    require(contains(id), ErrorKind::InvalidInput, "token id out of range");
    require(has_labels(), ErrorKind::InvalidInput, "vocabulary has no labels");
    return labels_[id];
}

std::optional<TokenId> Vocabulary::find(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<TokenId>(it - labels_.begin());
}

void sort_ranked(std::vector<TokenProb>& entries) {
    std::sort(entries.begin(), entries.end(), [](const TokenProb& a, const TokenProb& b) {
        if (a.prob != b.prob) return a.prob > b.prob;
        return a.token < b.token;
    });
}

namespace {

void check_unique(const std::vector<TokenProb>& sorted) {
    TokenId max_token = 0;
    for (const auto& e : sorted) max_token = std::max(max_token, e.token);
    std::vector<char> seen(static_cast<std::size_t>(max_token) + 1, 0);
    for (const auto& e : sorted) {
        if (seen[e.token]) throw Error(ErrorKind::InvalidInput, "duplicate token " + std::to_string(e.token));
        seen[e.token] = 1;
    }
}

}  // namespace

RankedDistribution RankedDistribution::from_entries(std::vector<TokenProb> entries) {
    double total = 0.0;
    for (const auto& e : entries) {
        require(std::isfinite(e.prob) && e.prob >= 0.0 && e.prob <= 1.0 + kSumTolerance,
                ErrorKind::InvalidInput, "probability outside [0,1]");
        total += e.prob;
    }
    require(std::abs(total - 1.0) <= kSumTolerance, ErrorKind::InvalidInput,
            "probabilities sum to " + std::to_string(total));
    std::erase_if(entries, [](const TokenProb& e) { return e.prob == 0.0; });
    sort_ranked(entries);
    check_unique(entries);
    return RankedDistribution(std::move(entries));
}

RankedDistribution RankedDistribution::normalize(std::vector<TokenProb> weights) {
    double total = 0.0;
    for (const auto& e : weights) {
        require(std::isfinite(e.prob) && e.prob >= 0.0, ErrorKind::InvalidInput,
                "weights must be finite and non-negative");
        total += e.prob;
    }
    require(total > 0.0 && std::isfinite(total), ErrorKind::InvalidInput,
            "weights have no positive mass");
    std::erase_if(weights, [](const TokenProb& e) { return e.prob == 0.0; });
    for (auto& e : weights) e.prob /= total;
    sort_ranked(weights);
    check_unique(weights);
    return RankedDistribution(std::move(weights));
}

RankedDistribution RankedDistribution::from_dense(const std::vector<double>& probs) {
    std::vector<TokenProb> entries;
    entries.reserve(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        entries.push_back({static_cast<TokenId>(i), probs[i]});
    }
    return from_entries(std::move(entries));
}

RankedDistribution RankedDistribution::point_mass(TokenId token) {
    return RankedDistribution({{token, 1.0}});
}

double RankedDistribution::prob_of(TokenId token) const {
    for (const auto& e : entries_) {
        if (e.token == token) return e.prob;
    }
    return 0.0;
}

std::optional<std::size_t> RankedDistribution::rank_of(TokenId token) const {
    for (std::size_t r = 0; r < entries_.size(); ++r) {
        if (entries_[r].token == token) return r;
    }
    return std::nullopt;
}

double RankedDistribution::prefix_mass(std::size_t n) const {
    double total = 0.0;
    for (std::size_t r = 0; r < n && r < entries_.size(); ++r) total += entries_[r].prob;
    return total;
}

std::vector<double> RankedDistribution::to_dense(std::size_t vocab_size) const {
    std::vector<double> dense(vocab_size, 0.0);
    for (const auto& e : entries_) {
        require(e.token < vocab_size, ErrorKind::InvalidInput, "token outside vocabulary");
        dense[e.token] = e.prob;
    }
    return dense;
}

RankedDistribution softmax(const LogitVector& logits) {
    require(!logits.empty(), ErrorKind::InvalidInput, "empty logit vector");
    double max_logit = -INFINITY;
    for (double l : logits) {
        require(std::isfinite(l), ErrorKind::InvalidInput, "non-finite logit");
        max_logit = std::max(max_logit, l);
    }
    std::vector<TokenProb> weights(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        weights[i] = {static_cast<TokenId>(i), std::exp(logits[i] - max_logit)};
    }
    return RankedDistribution::normalize(std::move(weights));
}

}  // namespace declab::lm
