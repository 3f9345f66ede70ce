// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "declab/common/error.hpp"
#include "declab/common/rng.hpp"
#include "declab/lm/model.hpp"

namespace declab::lm {

void ContextModel::check_context(const Tokens& context) const {
    const auto& vocab = vocabulary();
    for (TokenId t : context) {
        if (!vocab.contains(t)) {
            throw Error(ErrorKind::InvalidInput, "context token " + std::to_string(t) + " outside vocabulary");
        }
    }
}

namespace {

constexpr TokenId kStartSentinel = 0xFFFFFFFFu;
constexpr std::uint64_t kSharpnessSalt = 0xD1B54A32D192ED03ULL;

// Two independent standard normals from one 64-bit hash (Box-Muller).
inline void normal_pair(std::uint64_t h, double& z0, double& z1) {
    const double u1 = (static_cast<double>(h >> 32) + 0.5) * 0x1.0p-32;
    const double u2 = static_cast<double>(h & 0xFFFFFFFFULL) * 0x1.0p-32;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    z0 = r * std::cos(angle);
    z1 = r * std::sin(angle);
}

}  // namespace

SyntheticModel::SyntheticModel(const SyntheticModelSpec& spec)
    : spec_(spec),
      vocab_(spec.vocab_size),
      key_(mix64(spec.seed, 0x53594E5448ULL)) {
    require(spec.spread > 0.0 && std::isfinite(spec.spread), ErrorKind::InvalidInput,
            "spread must be positive");
    require(spec.context_decay >= 0.0 && spec.sharpness >= 0.0, ErrorKind::InvalidInput,
            "decay and sharpness must be non-negative");
    require(spec.max_context >= 1, ErrorKind::InvalidInput, "max_context must be positive");
    weights_.resize(spec.max_context + 1);
    for (std::size_t j = 0; j < weights_.size(); ++j) {
        weights_[j] = std::pow(1.0 + static_cast<double>(j), -spec.context_decay);
    }
}

std::shared_ptr<const std::vector<double>> SyntheticModel::deviates(std::size_t distance, TokenId token) const {
    // Rows hold one deviate per candidate plus the sharpness deviate last.
    constexpr std::size_t kCacheDoubles = std::size_t{1} << 23;
    const std::uint64_t id = (static_cast<std::uint64_t>(distance) << 32) | token;
    {
        std::lock_guard lock(cache_->mutex);
        if (auto it = cache_->rows.find(id); it != cache_->rows.end()) return it->second;
    }
    const std::size_t vocab = vocab_.size();
    const std::size_t pairs = (vocab + 1) / 2;
    // Padded to an even length so the pair loop needs no bounds check.
    auto row = std::make_shared<std::vector<double>>(2 * pairs + 1);
    const std::uint64_t base = mix64(key_, id);
    double s0 = 0.0, s1 = 0.0;
    normal_pair(mix64(base ^ kSharpnessSalt), s0, s1);
    (*row)[2 * pairs] = s0;
    for (std::size_t q = 0; q < pairs; ++q) normal_pair(mix64(base, q), (*row)[2 * q], (*row)[2 * q + 1]);

    std::lock_guard lock(cache_->mutex);
    if (cache_->doubles + row->size() > kCacheDoubles) {
        cache_->rows.clear();
        cache_->doubles = 0;
    }
    cache_->doubles += row->size();
    cache_->rows.emplace(id, row);
    return row;
}

LogitVector SyntheticModel::logits(const Tokens& context) const {
    check_context(context);
    const std::size_t vocab = vocab_.size();
    const std::size_t used = std::min(context.size(), spec_.max_context);

    std::vector<double> acc(vocab, 0.0);
    double sharp = 0.0;
    double weight_sq = 0.0;

    // Distance `used` holds a start-of-text sentinel so that the empty
    // context is still a proper distribution.
    for (std::size_t j = 0; j <= used; ++j) {
        const TokenId token = j < used ? context[context.size() - 1 - j] : kStartSentinel;
        const double w = weights_[j];
        weight_sq += w * w;
        const auto row = deviates(j, token);
        const double* z = row->data();
        sharp += w * z[row->size() - 1];
        for (std::size_t t = 0; t < vocab; ++t) acc[t] += w * z[t];
    }

    const double norm = std::sqrt(weight_sq);
    const double scale = spec_.spread * std::exp(spec_.sharpness * sharp / norm) / norm;
    for (auto& a : acc) a *= scale;
    return acc;
}

namespace {

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(std::move(w));
    return words;
}

}  // namespace

NGramModel::NGramModel(int order, double alpha, const std::string& corpus_text)
    : order_(order), alpha_(alpha) {
    require(order >= 1 && order <= 5, ErrorKind::InvalidInput, "n-gram order must be in [1,5]");
    require(alpha > 0.0 && std::isfinite(alpha), ErrorKind::InvalidInput,
            "smoothing alpha must be positive");
    const auto words = split_words(corpus_text);
    require(!words.empty(), ErrorKind::Training, "corpus is empty");

    std::vector<std::string> labels;
    std::unordered_map<std::string, TokenId> index;
    Tokens ids;
    ids.reserve(words.size());
    for (const auto& w : words) {
        auto [it, inserted] = index.emplace(w, static_cast<TokenId>(labels.size()));
        if (inserted) labels.push_back(w);
        ids.push_back(it->second);
    }
    // A one-word corpus still needs a valid two-token vocabulary.
    if (labels.size() < 2) labels.push_back("<unk>");
    vocab_ = Vocabulary(std::move(labels));

    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (int h = 0; h < order_ && static_cast<std::size_t>(h) <= i; ++h) {
            Tokens history(ids.begin() + static_cast<std::ptrdiff_t>(i - h),
                           ids.begin() + static_cast<std::ptrdiff_t>(i));
            auto& counts = table_[history];
            ++counts.total;
            ++counts.next[ids[i]];
        }
    }
}

NGramModel NGramModel::from_spec(const NGramModelSpec& spec) {
    std::ifstream in(spec.corpus_path);
    require(static_cast<bool>(in), ErrorKind::Training,
            "cannot read corpus " + spec.corpus_path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return NGramModel(spec.order, spec.smoothing_alpha, buffer.str());
}

Tokens NGramModel::encode(const std::string& text) const {
    Tokens out;
    for (const auto& w : split_words(text)) {
        auto id = vocab_.find(w);
        require(id.has_value(), ErrorKind::InvalidInput, "word not in vocabulary: " + w);
        out.push_back(*id);
    }
    return out;
}

LogitVector NGramModel::logits(const Tokens& context) const {
    check_context(context);
    const std::size_t vocab = vocab_.size();
    std::size_t h = std::min(context.size(), static_cast<std::size_t>(order_ - 1));
    for (;; --h) {
        Tokens history(context.end() - static_cast<std::ptrdiff_t>(h), context.end());
        auto it = table_.find(history);
        if (it != table_.end() && it->second.total > 0) {
            const auto& counts = it->second;
            const double denom = static_cast<double>(counts.total) + alpha_ * static_cast<double>(vocab);
            LogitVector out(vocab, std::log(alpha_ / denom));
            for (const auto& [token, c] : counts.next) {
                out[token] = std::log((static_cast<double>(c) + alpha_) / denom);
            }
            return out;
        }
        if (h == 0) break;
    }
    throw Error(ErrorKind::Training, "n-gram table has no unigram counts");
}

TableModel::TableModel(Vocabulary vocab, LogitVector fallback)
    : vocab_(std::move(vocab)), fallback_(std::move(fallback)) {
    require(fallback_.size() == vocab_.size(), ErrorKind::InvalidInput,
            "fallback logits must cover the vocabulary");
}

void TableModel::add_rule(Tokens suffix, LogitVector logits) {
    require(logits.size() == vocab_.size(), ErrorKind::InvalidInput,
            "rule logits must cover the vocabulary");
    rules_.emplace_back(std::move(suffix), std::move(logits));
}

void TableModel::add_rule_probs(Tokens suffix, const std::vector<TokenProb>& probs) {
    double listed = 0.0;
    for (const auto& e : probs) listed += e.prob;
    require(listed <= 1.0 + 1e-12 && probs.size() <= vocab_.size(), ErrorKind::InvalidInput,
            "rule probabilities exceed one");
    const std::size_t rest = vocab_.size() - probs.size();
    const double leftover = rest > 0 ? std::max(1.0 - listed, 1e-12) / static_cast<double>(rest) : 0.0;
    LogitVector logits(vocab_.size(), rest > 0 ? std::log(leftover) : 0.0);
    for (const auto& e : probs) logits.at(e.token) = std::log(e.prob);
    add_rule(std::move(suffix), std::move(logits));
}

LogitVector TableModel::logits(const Tokens& context) const {
    check_context(context);
    const LogitVector* best = &fallback_;
    std::size_t best_len = 0;
    bool matched = false;
    for (const auto& [suffix, logits] : rules_) {
        if (suffix.size() > context.size()) continue;
        if (matched && suffix.size() <= best_len) continue;
        if (std::equal(suffix.begin(), suffix.end(), context.end() - static_cast<std::ptrdiff_t>(suffix.size()))) {
            best = &logits;
            best_len = suffix.size();
            matched = true;
        }
    }
    return *best;
}

}  // namespace declab::lm
