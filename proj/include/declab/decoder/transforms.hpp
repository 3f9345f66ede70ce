// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "declab/common/rng.hpp"
#include "declab/decoder/config.hpp"
#include "declab/lm/distribution.hpp"

namespace declab::decoding {

using lm::LogitVector;
using lm::RankedDistribution;
using lm::TokenId;

// Probabilities proportional to exp(l / temperature).
RankedDistribution apply_temperature(const LogitVector& logits, double temperature);
// Keeps the k most probable entries; k beyond the support is clamped.
RankedDistribution truncate_top_k(const RankedDistribution& dist, int k);
// Keeps the shortest prefix whose mass reaches p (>= convention).
RankedDistribution truncate_nucleus(const RankedDistribution& dist, double p);

// Temperature, then top-k, then nucleus, honouring the exclusive flag.
RankedDistribution final_distribution(const DecodingConfig& config, const LogitVector& logits);
RankedDistribution final_distribution(const SamplerParams& params, const LogitVector& logits);

// Inverse CDF over the descending order.
TokenId sample_token(const RankedDistribution& dist, CounterRng& rng);

}  // namespace declab::decoding
