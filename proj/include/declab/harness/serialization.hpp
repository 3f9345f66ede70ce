// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "declab/attack/attack.hpp"
#include "declab/stats/stats.hpp"
#include "declab/victim/victim.hpp"

// JSON forms of the configuration and report types. Readers reject unknown
// keys and malformed values with ErrorKind::Config, so a typo in a config file
// fails loudly instead of falling back to a default.
namespace declab::harness {

using Json = nlohmann::json;

Json to_json(const decoding::DecodingConfig& config);
decoding::DecodingConfig decoding_config_from_json(const Json& j);

// Relative corpus paths resolve against `base_dir`.
Json to_json(const victim::ModelSpec& spec);
victim::ModelSpec model_spec_from_json(const Json& j, const std::filesystem::path& base_dir = {});

Json to_json(const victim::DefenseConfig& defense);
victim::DefenseConfig defense_from_json(const Json& j);

Json to_json(const victim::VictimConfig& config);
victim::VictimConfig victim_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});

// "prompts" is either a list of token lists or a generator
// {"count", "length", "seed"}; the generator draws from vocab_size tokens,
// which must then be set.
Json to_json(const attack::AttackSettings& settings);
attack::AttackSettings attack_settings_from_json(const Json& j);

Json to_json(const attack::AttackReport& report);
attack::AttackReport attack_report_from_json(const Json& j);

// {"entries": [[token, prob], ...]}. Readers also take a bare list of pairs
// or a dense list of probabilities indexed by token.
Json to_json(const lm::RankedDistribution& dist);
lm::RankedDistribution distribution_from_json(const Json& j);

Json to_json(const stats::ComparisonReport& report);
Json to_json(const victim::Usage& usage);

// Non-finite doubles have no JSON number form; they travel as "inf",
// "-inf" and "nan".
Json number_to_json(double x);
double number_from_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);
// Two-space indented, trailing newline. Key order is sorted, so equal
// values give identical bytes.
std::string dump(const Json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace declab::harness
