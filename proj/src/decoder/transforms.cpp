// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/decoder/transforms.hpp"

#include <cmath>

#include "declab/common/error.hpp"

namespace declab::decoding {

namespace {

// Guards the >= comparison against rounding in the running sum.
constexpr double kMassSlack = 1e-12;

RankedDistribution renormalized_prefix(const RankedDistribution& dist, std::size_t n) {
    std::vector<lm::TokenProb> kept(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(n));
    return RankedDistribution::normalize(std::move(kept));
}

}  // namespace

RankedDistribution apply_temperature(const LogitVector& logits, double temperature) {
    require(std::isfinite(temperature) && temperature > 0.0, ErrorKind::InvalidInput,
            "temperature must be positive and finite");
    if (temperature == 1.0) return lm::softmax(logits);
    LogitVector scaled(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
    return lm::softmax(scaled);
}

RankedDistribution truncate_top_k(const RankedDistribution& dist, int k) {
    require(k >= 1, ErrorKind::InvalidInput, "k must be at least 1");
    if (static_cast<std::size_t>(k) >= dist.size()) return dist;
    return renormalized_prefix(dist, static_cast<std::size_t>(k));
}

RankedDistribution truncate_nucleus(const RankedDistribution& dist, double p) {
    require(p > 0.0 && p <= 1.0, ErrorKind::InvalidInput, "p must lie in (0, 1]");
    double cumulative = 0.0;
    std::size_t kept = dist.size();
    for (std::size_t r = 0; r < dist.size(); ++r) {
        cumulative += dist[r].prob;
        if (cumulative >= p - kMassSlack) {
            kept = r + 1;
            break;
        }
    }
    if (kept == dist.size()) return dist;
    return renormalized_prefix(dist, kept);
}

RankedDistribution final_distribution(const SamplerParams& params, const LogitVector& logits) {
    RankedDistribution dist = apply_temperature(logits, params.temperature.value_or(1.0));
    if (params.top_k) dist = truncate_top_k(dist, *params.top_k);
    const bool skip_p = params.exclusive_temp_topp && params.temperature && *params.temperature != 1.0;
    if (params.top_p && !skip_p) dist = truncate_nucleus(dist, *params.top_p);
    return dist;
}

RankedDistribution final_distribution(const DecodingConfig& config, const LogitVector& logits) {
    require(config.algorithm == Algorithm::Sampler, ErrorKind::Unsupported,
            "final distribution is defined for sampler configs only");
    config.validate();
    return final_distribution(config.sampler, logits);
}

TokenId sample_token(const RankedDistribution& dist, CounterRng& rng) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    for (const auto& e : dist) {
        cumulative += e.prob;
        if (u < cumulative) return e.token;
    }
    // u landed in the rounding gap above the last partial sum.
    return dist[dist.size() - 1].token;
}

}  // namespace declab::decoding
