// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>

#include "declab/lm/model.hpp"

namespace declab::decoding {

using lm::Tokens;

// Supplies the inner distribution for a full context. Lets callers plug in a
// cache in front of the model.
using InnerFn = std::function<std::shared_ptr<const lm::RankedDistribution>(const Tokens&)>;

InnerFn inner_of(const lm::ContextModel& model);

// Appends the argmax token (lowest id among ties) `length` times.
Tokens greedy_decode(const lm::ContextModel& model, const Tokens& prompt, int length);
Tokens greedy_decode(const InnerFn& inner, const Tokens& prompt, int length);

// Beam search on summed log-probabilities without length normalization.
// Every hypothesis expands to its beam_size best successors and the best
// beam_size candidates survive, ordered by score then lexicographically.
// Returns only the generated tokens.
Tokens beam_decode(const lm::ContextModel& model, const Tokens& prompt, int beam_size, int length);
Tokens beam_decode(const InnerFn& inner, const Tokens& prompt, int beam_size, int length);

}  // namespace declab::decoding
