// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/stats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "declab/common/error.hpp"

namespace declab::stats {

double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    if (lambda < 1.18) {
        // Jacobi-transformed series; converges fast for small lambda.
        const double y = std::exp(-pi2 / (8.0 * lambda * lambda));
        const double y8 = std::pow(y, 8.0);
        const double sum = y + std::pow(y, 9.0) + std::pow(y, 25.0) + std::pow(y, 49.0) * (1.0 + y8 * y8 * y8);
        const double cdf = std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * term;
        if (term < 1e-17) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(const std::vector<TokenId>& a, const std::vector<TokenId>& b,
                       const RankedDistribution& ranking) {
    require(!a.empty() && !b.empty(), ErrorKind::InvalidInput, "KS needs two non-empty samples");
    // Position of every token in the common order.
    std::unordered_map<TokenId, std::size_t> position;
    for (std::size_t r = 0; r < ranking.size(); ++r) position.emplace(ranking[r].token, r);
    std::vector<TokenId> extra;
    for (const auto* sample : {&a, &b}) {
        for (TokenId t : *sample) {
            if (!position.count(t)) extra.push_back(t);
        }
    }
    std::sort(extra.begin(), extra.end());
    extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
    for (TokenId t : extra) position.emplace(t, position.size());

    std::vector<double> diff(position.size(), 0.0);
    const double wa = 1.0 / static_cast<double>(a.size());
    const double wb = 1.0 / static_cast<double>(b.size());
    for (TokenId t : a) diff[position[t]] += wa;
    for (TokenId t : b) diff[position[t]] -= wb;
    double cumulative = 0.0;
    double d = 0.0;
    for (double x : diff) {
        cumulative += x;
        d = std::max(d, std::abs(cumulative));
    }
    // Sums of 1/n terms can land a hair off the exact extremes.
    if (d < 1e-12) d = 0.0;
    d = std::min(d, 1.0);

    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ne = na * nb / (na + nb);
    const double root = std::sqrt(ne);
    const double lambda = (root + 0.12 + 0.11 / root) * d;
    return {d, kolmogorov_q(lambda), ne};
}

double kl_divergence(const RankedDistribution& p, const RankedDistribution& q, KlOptions options) {
    std::unordered_map<TokenId, double> q_of;
    q_of.reserve(q.size());
    for (const auto& e : q) q_of.emplace(e.token, e.prob);

    if (!options.smoothing) {
        double kl = 0.0;
        for (const auto& e : p) {
            auto it = q_of.find(e.token);
            if (it == q_of.end()) {
                throw Error(ErrorKind::SupportMismatch,
                            "token " + std::to_string(e.token) + " has mass under p but not under q");
            }
            kl += e.prob * std::log(e.prob / it->second);
        }
        return std::max(kl, 0.0);
    }

    require(options.epsilon > 0.0, ErrorKind::InvalidInput, "smoothing epsilon must be positive");
    std::unordered_map<TokenId, double> p_of;
    for (const auto& e : p) p_of.emplace(e.token, e.prob);
    std::vector<TokenId> support;
    for (const auto& e : p) support.push_back(e.token);
    for (const auto& e : q) {
        if (!p_of.count(e.token)) support.push_back(e.token);
    }
    const double denom = 1.0 + options.epsilon * static_cast<double>(support.size());
    double kl = 0.0;
    for (TokenId t : support) {
        const double pi = (p_of.count(t) ? p_of[t] : 0.0) + options.epsilon;
        const double qi = (q_of.count(t) ? q_of[t] : 0.0) + options.epsilon;
        kl += pi / denom * std::log(pi / qi);
    }
    return std::max(kl, 0.0);
}

double total_variation(const RankedDistribution& p, const RankedDistribution& q) {
    std::unordered_map<TokenId, double> diff;
    for (const auto& e : p) diff[e.token] += e.prob;
    for (const auto& e : q) diff[e.token] -= e.prob;
    double tv = 0.0;
    for (const auto& [t, d] : diff) tv += std::abs(d);
    return 0.5 * tv;
}

double kurtosis(const RankedDistribution& dist) {
    require(dist.size() >= 2, ErrorKind::Undefined, "kurtosis needs at least two support points");
    double mean = 0.0;
    for (std::size_t r = 0; r < dist.size(); ++r) mean += static_cast<double>(r + 1) * dist[r].prob;
    double m2 = 0.0, m4 = 0.0;
    for (std::size_t r = 0; r < dist.size(); ++r) {
        const double d = static_cast<double>(r + 1) - mean;
        const double d2 = d * d;
        m2 += d2 * dist[r].prob;
        m4 += d2 * d2 * dist[r].prob;
    }
    require(m2 > 0.0, ErrorKind::Undefined, "kurtosis of a degenerate distribution");
    return m4 / (m2 * m2) - 3.0;
}

double entropy(const RankedDistribution& dist) {
    double h = 0.0;
    for (const auto& e : dist) {
        if (e.prob > 0.0) h -= e.prob * std::log(e.prob);
    }
    return h;
}

PerplexityResult perplexity(const lm::ContextModel& model, const Tokens& tokens, const Tokens& context) {
    require(!tokens.empty(), ErrorKind::InvalidInput, "perplexity needs at least one token");
    Tokens history = context;
    double total_log = 0.0;
    for (TokenId t : tokens) {
        const auto logits = model.logits(history);
        require(t < logits.size(), ErrorKind::InvalidInput, "token outside vocabulary");
        // log-softmax with max subtraction.
        const double max_logit = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double l : logits) z += std::exp(l - max_logit);
        const double log_p = logits[t] - max_logit - std::log(z);
        if (!std::isfinite(log_p)) return {INFINITY, true};
        total_log += log_p;
        history.push_back(t);
    }
    return {std::exp(-total_log / static_cast<double>(tokens.size())), false};
}

double identical_output_probability(double p_per_token, double length, double repeats) {
    require(p_per_token > 0.0 && p_per_token <= 1.0 && length > 0.0 && repeats > 0.0,
            ErrorKind::InvalidInput, "inputs must be positive with p in (0,1]");
    return std::pow(p_per_token, length * repeats);
}

std::vector<TokenId> quantile_sample(const RankedDistribution& dist, std::size_t n) {
    require(n >= 1, ErrorKind::InvalidInput, "sample size must be positive");
    std::vector<TokenId> out;
    out.reserve(n);
    std::size_t rank = 0;
    double cumulative = dist[0].prob;
    for (std::size_t j = 0; j < n; ++j) {
        const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
        while (u >= cumulative && rank + 1 < dist.size()) cumulative += dist[++rank].prob;
        out.push_back(dist[rank].token);
    }
    return out;
}

ComparisonReport compare(const RankedDistribution& a, const RankedDistribution& b,
                         std::size_t n, ComparisonThresholds thresholds) {
    ComparisonReport report;
    report.ks = ks_two_sample(quantile_sample(a, n), quantile_sample(b, n), a);
    report.kl_nats = kl_divergence(a, b, {.smoothing = true});
    report.ks_pass = report.ks.p_value >= thresholds.min_p_value;
    report.kl_pass = report.kl_nats <= thresholds.max_kl;
    return report;
}

}  // namespace declab::stats
