// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace declab::lm {

using TokenId = std::uint32_t;
using Tokens = std::vector<TokenId>;

class Vocabulary {
public:
    explicit Vocabulary(std::size_t size);
    explicit Vocabulary(std::vector<std::string> labels);

    std::size_t size() const noexcept { return size_; }
    bool has_labels() const noexcept { return !labels_.empty(); }
    const std::string& label(TokenId id) const;
    std::optional<TokenId> find(const std::string& label) const;
    bool contains(TokenId id) const noexcept { return id < size_; }

private:
    std::size_t size_;
    std::vector<std::string> labels_;
};

// One logit per vocabulary entry, indexed by TokenId.
using LogitVector = std::vector<double>;

struct TokenProb {
    TokenId token;
    double prob;

    bool operator==(const TokenProb&) const = default;
};

// Probabilities sorted descending, ties by ascending TokenId. Zero-mass
// tokens are never stored and the entries sum to one within 1e-9.
class RankedDistribution {
public:
    static constexpr double kSumTolerance = 1e-9;

    // Validates entries that are already normalized (any order).
    static RankedDistribution from_entries(std::vector<TokenProb> entries);
    // Scales non-negative weights to unit mass. Zero weights are dropped.
    static RankedDistribution normalize(std::vector<TokenProb> weights);
    static RankedDistribution from_dense(const std::vector<double>& probs);
    static RankedDistribution point_mass(TokenId token);

    std::size_t size() const noexcept { return entries_.size(); }
    const TokenProb& operator[](std::size_t rank) const { return entries_[rank]; }
    const std::vector<TokenProb>& entries() const noexcept { return entries_; }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    TokenId top() const { return entries_.front().token; }
    // Zero when the token is outside the support.
    double prob_of(TokenId token) const;
    // Zero-based rank, or nullopt outside the support.
    std::optional<std::size_t> rank_of(TokenId token) const;
    // Sum of the first n entries.
    double prefix_mass(std::size_t n) const;
    std::vector<double> to_dense(std::size_t vocab_size) const;

private:
    explicit RankedDistribution(std::vector<TokenProb> sorted) : entries_(std::move(sorted)) {}

    std::vector<TokenProb> entries_;
};

// Descending by probability, then ascending TokenId.
void sort_ranked(std::vector<TokenProb>& entries);

RankedDistribution softmax(const LogitVector& logits);

}  // namespace declab::lm
