// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "declab/attack/attack.hpp"
#include "declab/harness/cost.hpp"
#include "declab/harness/serialization.hpp"
#include "declab/victim/victim.hpp"

namespace declab::harness {

using lm::Tokens;

// `count` prompts of `length` tokens drawn uniformly from the vocabulary.
std::vector<Tokens> make_prompt_pool(std::uint64_t seed, std::size_t count, std::size_t length,
                                     std::size_t vocab_size);

// "greedy", "beam" or "sampler-case-N" for the configuration as applied;
// the same names AttackReport::kind_name() uses.
std::string victim_kind(const decoding::DecodingConfig& config);
// The ten kinds in grid order: greedy, beam, then sampler cases 1..8.
std::vector<std::string> all_victim_kinds();

struct Range {
    double low = 0.0;
    double high = 0.0;
};

struct IntRange {
    int low = 0;
    int high = 0;
};

// Randomized victim grid. Kinds cycle round-robin so every kind appears once
// per ten victims; hyperparameters are uniform within their ranges.
struct GridSpec {
    std::uint64_t seed = 1;
    std::size_t count = 100;
    std::size_t vocab_size = 1000;
    Range temperature{0.6, 0.95};
    IntRange top_k{10, 100};
    Range top_p{0.6, 0.95};
    IntRange beam{2, 10};
    // Subset of all_victim_kinds(); empty means all ten.
    std::vector<std::string> kinds;
    // Negative exposes the whole vocabulary.
    int top_logprobs = -1;
    std::optional<victim::DefenseConfig> defense;
};

std::vector<victim::VictimConfig> generate_grid(const GridSpec& grid);

enum class InnerMode { Api, Reference, None };

struct ExperimentSpec {
    // Either a grid or an explicit victim list (both may be given; grid
    // victims come first).
    std::optional<GridSpec> grid;
    std::vector<victim::VictimConfig> victims;
    // When settings.prompts is empty each victim gets its own pool.
    attack::AttackSettings settings;
    std::size_t pool_count = 100;
    std::size_t pool_length = 8;
    std::uint64_t seed = 1;
    InnerMode inner = InnerMode::Api;
    // Read final distributions from the victim directly instead of sampling.
    bool exact_oracle = false;
    // Held-out prompts on which the stolen config is compared to the victim.
    std::size_t replay_prompts = 5;
    std::size_t replay_samples = 1000;
    CostModel cost = CostModel::preset("davinci");
    // Zero uses the hardware concurrency.
    unsigned threads = 0;
    std::filesystem::path output;
    std::filesystem::path csv;

    void validate() const;
};

ExperimentSpec experiment_spec_from_json(const Json& j, const std::filesystem::path& base_dir = {});

struct ReplayResult {
    std::size_t prompts = 0;
    // Sampler victims: averages of the per-prompt comparisons.
    double mean_p_value = 0.0;
    double mean_kl = 0.0;
    // Deterministic victims: share of prompts with identical continuations.
    double identical_share = 0.0;
    bool match = false;
};

struct VictimOutcome {
    std::size_t index = 0;
    victim::VictimConfig truth;
    std::string truth_kind;
    std::optional<attack::AttackReport> report;
    // Set when the attack threw; the run goes on without this victim.
    std::string error;

    std::string inferred_kind;
    bool type_correct = false;
    std::optional<double> temperature_error;
    std::optional<double> top_p_error;
    // Signed k_hat - k, with a missing estimate counted as |V|.
    std::optional<long> top_k_error;
    std::optional<bool> beam_exact;
    std::optional<ReplayResult> replay;
    double cost_usd = 0.0;
};

struct RunSummary {
    std::size_t total = 0;
    std::size_t failures = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    std::optional<double> temperature_mae;
    std::optional<double> top_p_mae;
    // Over sampler cases 2 and 5, where top-k is the last transform.
    std::optional<double> top_k_exact_rate;
    std::optional<double> beam_exact_rate;
    std::optional<double> replay_match_rate;
    victim::Usage ledger;
    double cost_usd = 0.0;
};

struct RunReport {
    std::vector<VictimOutcome> outcomes;
    RunSummary summary;
    std::string cost_model;
    // Kept out of the JSON so reruns stay byte-identical.
    double wall_clock_seconds = 0.0;
};

RunReport run_experiment(const ExperimentSpec& spec);

Json to_json(const RunReport& report);
// One row per victim.
std::string to_csv(const RunReport& report);

struct PerplexityRow {
    double undefended = 0.0;
    double defended = 0.0;
};

struct PerplexityStudy {
    std::vector<PerplexityRow> rows;
    double mean_undefended = 0.0;
    double mean_defended = 0.0;
    // mean_defended / mean_undefended - 1.
    double relative_increase = 0.0;
};

// Generates `length` tokens per prompt with and without the defense, from
// identically seeded victims, and scores both continuations by perplexity
// under the model.
PerplexityStudy perplexity_study(std::shared_ptr<const lm::ContextModel> model, const std::vector<Tokens>& prompts,
                                 const decoding::DecodingConfig& decoding, const victim::DefenseConfig& defense,
                                 int length, std::uint64_t seed);

struct PrefixInfluencePoint {
    std::size_t query_length = 0;
    // Mean KL(inner with prefix || inner without) over the sampled queries.
    double mean_kl = 0.0;
};

// How much a hidden prefix still moves the next-token distribution after
// queries of each length: the gap a reference-model inner source has to live
// with.
std::vector<PrefixInfluencePoint> prefix_influence(const lm::ContextModel& model, const Tokens& prefix,
                                                   const std::vector<std::size_t>& query_lengths,
                                                   std::size_t queries_per_length, std::uint64_t seed);

}  // namespace declab::harness
