// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>

namespace declab::decoding {

struct SamplerParams {
    std::optional<double> temperature;
    std::optional<int> top_k;
    std::optional<double> top_p;
    // Some deployed APIs silently ignore top_p whenever a temperature other
    // than one is supplied.
    bool exclusive_temp_topp = false;

    bool operator==(const SamplerParams&) const = default;
};

enum class Algorithm { Greedy, Beam, Sampler };

struct DecodingConfig {
    Algorithm algorithm = Algorithm::Sampler;
    int beam_size = 1;
    SamplerParams sampler;

    static DecodingConfig greedy() { return {Algorithm::Greedy, 1, {}}; }
    static DecodingConfig beam(int size) { return {Algorithm::Beam, size, {}}; }
    static DecodingConfig sampling(SamplerParams params) {
        return {Algorithm::Sampler, 1, params};
    }

    bool deterministic() const noexcept { return algorithm != Algorithm::Sampler; }
    void validate() const;
    // Parameters as actually applied: unit temperature, p = 1 and the
    // exclusive-flag rule are folded away.
    SamplerParams effective() const;

    bool operator==(const DecodingConfig&) const = default;
};

// The eight sampler stacks, numbered as in the attack's case table:
// 1 temperature, 2 top-k, 3 nucleus, 4 pure, 5 temperature+top-k,
// 6 temperature+nucleus, 7 top-k+nucleus, 8 all three.
int sampler_case(const SamplerParams& effective);
SamplerParams case_components(int sampler_case);
std::string describe(const DecodingConfig& config);

}  // namespace declab::decoding
