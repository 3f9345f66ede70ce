// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/decoder/config.hpp"

#include <cmath>
#include <sstream>

#include "declab/common/error.hpp"

namespace declab::decoding {

void DecodingConfig::validate() const {
    switch (algorithm) {
    case Algorithm::Greedy:
        return;
    case Algorithm::Beam:
        require(beam_size >= 1, ErrorKind::InvalidInput, "beam size must be at least 1");
        return;
    case Algorithm::Sampler:
        break;
    }
    if (sampler.temperature) {
        require(std::isfinite(*sampler.temperature) && *sampler.temperature > 0.0,
                ErrorKind::InvalidInput, "temperature must be positive");
    }
    if (sampler.top_k) {
        require(*sampler.top_k >= 1, ErrorKind::InvalidInput, "top_k must be at least 1");
    }
    if (sampler.top_p) {
        require(*sampler.top_p > 0.0 && *sampler.top_p <= 1.0, ErrorKind::InvalidInput,
                "top_p must lie in (0, 1]");
    }
}

SamplerParams DecodingConfig::effective() const {
    SamplerParams out;
    if (algorithm != Algorithm::Sampler) return out;
    if (sampler.temperature && *sampler.temperature != 1.0) out.temperature = sampler.temperature;
    out.top_k = sampler.top_k;
    if (sampler.top_p && *sampler.top_p < 1.0) out.top_p = sampler.top_p;
    if (sampler.exclusive_temp_topp && out.temperature) out.top_p.reset();
    return out;
}

int sampler_case(const SamplerParams& p) {
    const bool t = p.temperature.has_value();
    const bool k = p.top_k.has_value();
    const bool n = p.top_p.has_value();
    if (t && k && n) return 8;
    if (k && n) return 7;
    if (t && n) return 6;
    if (t && k) return 5;
    if (t) return 1;
    if (k) return 2;
    if (n) return 3;
    return 4;
}

SamplerParams case_components(int c) {
    require(c >= 1 && c <= 8, ErrorKind::InvalidInput, "sampler case must be in 1..8");
    SamplerParams p;
    const bool t = c == 1 || c == 5 || c == 6 || c == 8;
    const bool k = c == 2 || c == 5 || c == 7 || c == 8;
    const bool n = c == 3 || c == 6 || c == 7 || c == 8;
    if (t) p.temperature = 1.0;
    if (k) p.top_k = 1;
    if (n) p.top_p = 1.0;
    return p;
}

std::string describe(const DecodingConfig& config) {
    std::ostringstream out;
    switch (config.algorithm) {
    case Algorithm::Greedy:
        return "greedy";
    case Algorithm::Beam:
        out << "beam(" << config.beam_size << ")";
        return out.str();
    case Algorithm::Sampler:
        break;
    }
    const auto& s = config.sampler;
    out << "sampling(";
    const char* sep = "";
    if (s.temperature) { out << sep << "temperature=" << *s.temperature; sep = ", "; }
    if (s.top_k) { out << sep << "top_k=" << *s.top_k; sep = ", "; }
    if (s.top_p) { out << sep << "top_p=" << *s.top_p; sep = ", "; }
    if (s.exclusive_temp_topp) out << sep << "exclusive";
    out << ")";
    return out.str();
}

}  // namespace declab::decoding
