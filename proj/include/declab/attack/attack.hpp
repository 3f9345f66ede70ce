// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "declab/attack/estimators.hpp"
#include "declab/attack/inner_source.hpp"
#include "declab/attack/observation.hpp"
#include "declab/decoder/config.hpp"

namespace declab::attack {

struct AttackSettings {
    std::vector<Tokens> prompts;
    // Needed to tell a top-k cut from the full vocabulary. Zero means "take
    // it from a complete inner distribution".
    std::size_t vocab_size = 0;

    int stage1_repeats = 20;
    int stage1_length = 50;
    int stage2_steps = 6;
    int stage2_prompts = 40;
    int stage3_prompts = 4;
    std::uint64_t stage3_queries = 10000;
    int stage4_prompts = 4;
    std::uint64_t stage4_queries = 50000;
    std::uint64_t stage5_queries = 5000;
    // Stage 6 reads only support sizes, which modest budgets already cover,
    // so it trades depth for breadth.
    int stage6_prompts = 40;
    std::uint64_t stage6_queries = 5000;

    double temperature_unity_band = 0.03;
    double ratio_unity_band = 0.01;
    double stage6_match_tolerance = 0.02;
    // Profile log-likelihood gain per stage-6 draw that the top-k-then-nucleus
    // model needs over nucleus alone before it is preferred.
    double stage6_gain_per_draw = 0.01;
    // Leading inner mass that enters the stage-5 ratio.
    double stage5_mass_target = 0.4;
    // Rank prompts flattest-first (highest inner entropy) before use.
    bool select_flat_prompts = true;

    void validate() const;
};

enum class DetectedKind { Greedy, Beam, Sampler };

struct StageDiagnostic {
    std::string stage;
    // "ok", "skipped", "unavailable" or "failed".
    std::string status = "ok";
    std::string message;
    std::map<std::string, double> values;
    std::map<std::string, std::vector<double>> series;
    victim::Usage spent;
};

struct AttackReport {
    DetectedKind detected = DetectedKind::Sampler;
    // 1..8, or 0 when a degraded run cannot tell the stack apart.
    int sampler_case = 0;
    std::optional<int> beam_size;
    std::optional<double> temperature;
    std::optional<std::size_t> top_k;
    std::optional<double> top_p;
    std::vector<StageDiagnostic> stages;
    victim::Usage ledger;
    bool degraded = false;

    // The decoding configuration the attack believes the victim runs.
    decoding::DecodingConfig inferred_config() const;
    std::string kind_name() const;
};

// True iff two of `repeats` generations of `length` tokens differ.
bool stage1_is_sampling(victim::GenerationApi& api, const Tokens& prompt, int repeats, int length = 50);

struct Stage2Result {
    decoding::Algorithm algorithm = decoding::Algorithm::Greedy;
    // outputs[i][t] is the response to prompt i with max_tokens = t + 1.
    std::vector<std::vector<victim::GenerationResponse>> outputs;
};

// Regenerates each prompt with 1..steps tokens; any revised prefix means beam.
Stage2Result stage2_classify_deterministic(victim::GenerationApi& api, const std::vector<Tokens>& prompts,
                                           int steps);

// Largest inner rank of an emitted token across the stage-2 outputs.
int estimate_beam_size(const std::vector<Tokens>& prompts, const Stage2Result& stage2, InnerProbSource& inner);
int estimate_beam_size(victim::GenerationApi& api, const std::vector<Tokens>& prompts, int steps,
                       InnerProbSource& inner);

// Smallest beam size in [lower, upper] whose beam search, replayed on the inner
// probabilities, reproduces every stage-2 output. The rank estimate above is a
// valid lower bound. nullopt when no size fits or the exposed slice is too
// short to replay the search.
std::optional<int> fit_beam_size(const std::vector<Tokens>& prompts, const Stage2Result& stage2,
                                 InnerProbSource& inner, int lower, int upper);

struct Stage4Result {
    std::optional<std::size_t> top_k;
    std::vector<std::size_t> unique_counts;
};

Stage4Result stage4_detect_top_k(FinalObserver& observer, const std::vector<Tokens>& prompts, std::uint64_t draws);

// Joint (k, p) from two prompts with distinct inner distributions.
std::optional<JointEstimate> stage6_joint_k_p(FinalObserver& observer, const std::pair<Tokens, Tokens>& prompts,
                                              const std::pair<RankedDistribution, RankedDistribution>& inner_detempered,
                                              std::size_t vocab_size, std::uint64_t draws);

// Runs the staged attack. With `inner` null the run is degraded: stage 1,
// stage-2 classification and stage 4 only. `observer` replaces sampling
// for the estimation stages (e.g. with an exact oracle); by default final
// distributions are estimated from `api`.
AttackReport run_full_attack(victim::GenerationApi& api, const AttackSettings& settings, InnerProbSource* inner,
                             FinalObserver* observer = nullptr);

}  // namespace declab::attack
