// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/decoder/search.hpp"

#include <algorithm>
#include <cmath>

#include "declab/common/error.hpp"

namespace declab::decoding {

InnerFn inner_of(const lm::ContextModel& model) {
    return [&model](const Tokens& context) {
        return std::make_shared<const lm::RankedDistribution>(model.inner_distribution(context));
    };
}

Tokens greedy_decode(const InnerFn& inner, const Tokens& prompt, int length) {
    require(length >= 1, ErrorKind::InvalidInput, "length must be at least 1");
    Tokens context = prompt;
    for (int step = 0; step < length; ++step) context.push_back(inner(context)->top());
    return Tokens(context.begin() + static_cast<std::ptrdiff_t>(prompt.size()), context.end());
}

Tokens greedy_decode(const lm::ContextModel& model, const Tokens& prompt, int length) {
    return greedy_decode(inner_of(model), prompt, length);
}

namespace {

struct Hypothesis {
    Tokens tokens;
    double score = 0.0;
};

bool better(const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
}

}  // namespace

Tokens beam_decode(const InnerFn& inner, const Tokens& prompt, int beam_size, int length) {
    require(beam_size >= 1, ErrorKind::InvalidInput, "beam size must be at least 1");
    require(length >= 1, ErrorKind::InvalidInput, "length must be at least 1");
    const auto width = static_cast<std::size_t>(beam_size);
    std::vector<Hypothesis> beams{Hypothesis{}};
    Tokens context;
    for (int step = 0; step < length; ++step) {
        std::vector<Hypothesis> candidates;
        candidates.reserve(beams.size() * width);
        for (const auto& hyp : beams) {
            context = prompt;
            context.insert(context.end(), hyp.tokens.begin(), hyp.tokens.end());
            const auto dist = inner(context);
            const std::size_t n = std::min(width, dist->size());
            for (std::size_t r = 0; r < n; ++r) {
                Hypothesis next{hyp.tokens, hyp.score + std::log((*dist)[r].prob)};
                next.tokens.push_back((*dist)[r].token);
                candidates.push_back(std::move(next));
            }
        }
        const std::size_t keep = std::min(width, candidates.size());
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                          candidates.end(), better);
        candidates.resize(keep);
        beams = std::move(candidates);
    }
    return beams.front().tokens;
}

Tokens beam_decode(const lm::ContextModel& model, const Tokens& prompt, int beam_size, int length) {
    return beam_decode(inner_of(model), prompt, beam_size, length);
}

}  // namespace declab::decoding
