// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "declab/lm/distribution.hpp"

namespace declab::lm {

// A next-token model. logits() must be a pure function of the context.
class ContextModel {
public:
    virtual ~ContextModel() = default;
    virtual const Vocabulary& vocabulary() const = 0;
    virtual LogitVector logits(const Tokens& context) const = 0;

    RankedDistribution inner_distribution(const Tokens& context) const {
        return softmax(logits(context));
    }

protected:
    void check_context(const Tokens& context) const;
};

struct SyntheticModelSpec {
    std::uint64_t seed = 0;
    std::size_t vocab_size = 1000;
    // Standard deviation of the logits at unit sharpness.
    double spread = 3.0;
    // Weight of the token at distance j from the end is (1+j)^-decay, so
    // recent tokens dominate and distant ones fade without vanishing.
    double context_decay = 1.0;
    // Log-scale deviation of a per-context sharpness multiplier; makes some
    // contexts flat and others peaked.
    double sharpness = 0.5;
    // Tokens further back than this are ignored.
    std::size_t max_context = 4096;

    bool operator==(const SyntheticModelSpec&) const = default;
};

// Pseudo-random logits: every (distance, token at that distance, candidate)
// triple owns a standard normal deviate, and a candidate's logit is the
// decay-weighted sum over the context, scaled to unit variance.
class SyntheticModel final : public ContextModel {
public:
    explicit SyntheticModel(const SyntheticModelSpec& spec);

    const Vocabulary& vocabulary() const override { return vocab_; }
    LogitVector logits(const Tokens& context) const override;
    const SyntheticModelSpec& spec() const noexcept { return spec_; }

private:
    SyntheticModelSpec spec_;
    Vocabulary vocab_;
    std::uint64_t key_;
    std::vector<double> weights_;

    // Deviates per (distance, token), which neighbouring contexts share.
    // Shared between copies; the contents are a pure function of the spec.
    struct DeviateCache {
        std::mutex mutex;
        std::unordered_map<std::uint64_t, std::shared_ptr<const std::vector<double>>> rows;
        std::size_t doubles = 0;
    };
    std::shared_ptr<const std::vector<double>> deviates(std::size_t distance, TokenId token) const;
    std::shared_ptr<DeviateCache> cache_ = std::make_shared<DeviateCache>();
};

struct NGramModelSpec {
    int order = 3;
    double smoothing_alpha = 0.1;
    std::filesystem::path corpus_path;
};

// Add-alpha smoothed n-gram model over whitespace tokens. A history never
// seen in training backs off to the next shorter one, down to unigrams.
class NGramModel final : public ContextModel {
public:
    NGramModel(int order, double alpha, const std::string& corpus_text);
    static NGramModel from_spec(const NGramModelSpec& spec);

    const Vocabulary& vocabulary() const override { return vocab_; }
    LogitVector logits(const Tokens& context) const override;

    Tokens encode(const std::string& text) const;
    int order() const noexcept { return order_; }

private:
    struct Counts {
        std::uint64_t total = 0;
        std::unordered_map<TokenId, std::uint64_t> next;
    };

    int order_;
    double alpha_;
    Vocabulary vocab_{2};
    std::map<Tokens, Counts> table_;
};

// Hand-written transitions for tests: the longest rule whose suffix matches
// the end of the context supplies the logits.
class TableModel final : public ContextModel {
public:
    TableModel(Vocabulary vocab, LogitVector fallback);

    void add_rule(Tokens suffix, LogitVector logits);
    // Logits are ln(prob); tokens not listed share the leftover mass evenly.
    void add_rule_probs(Tokens suffix, const std::vector<TokenProb>& probs);

    const Vocabulary& vocabulary() const override { return vocab_; }
    LogitVector logits(const Tokens& context) const override;

private:
    Vocabulary vocab_;
    LogitVector fallback_;
    std::vector<std::pair<Tokens, LogitVector>> rules_;
};

}  // namespace declab::lm
