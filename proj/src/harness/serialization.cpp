// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/harness/serialization.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "declab/common/error.hpp"
#include "declab/harness/experiment.hpp"

namespace declab::harness {

using lm::TokenId;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::Config, where + ": " + what);
}

// Field access on a JSON object that remembers which keys were read, so
// leftovers can be reported as unknown.
class Reader {
public:
    Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) bad(where_, "expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const Json& at(const std::string& key) {
        if (!has(key)) bad(where_, "missing '" + key + "'");
        return j_.at(key);
    }

    template <typename T>
    T get(const std::string& key) {
        try {
            return at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            bad(where_, "'" + key + "' has the wrong type");
        }
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) {
        return has(key) ? get<T>(key) : fallback;
    }

    template <typename T>
    std::optional<T> optional(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return get<T>(key);
    }

    double number(const std::string& key) {
        try {
            return number_from_json(at(key));
        } catch (const Error&) {
            bad(where_, "'" + key + "' is not a number");
        }
    }

    double number_or(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    std::optional<double> optional_number(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return number(key);
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) bad(where_, "unknown key '" + item.key() + "'");
        }
    }

    const std::string& where() const { return where_; }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

template <typename T>
Json optional_json(const std::optional<T>& v) {
    if (!v) return nullptr;
    if constexpr (std::is_floating_point_v<T>) {
        return number_to_json(*v);
    } else {
        return *v;
    }
}

std::string algorithm_name(decoding::Algorithm a) {
    switch (a) {
    case decoding::Algorithm::Greedy: return "greedy";
    case decoding::Algorithm::Beam: return "beam";
    case decoding::Algorithm::Sampler: return "sampler";
    }
    return "sampler";
}

decoding::Algorithm algorithm_from(const std::string& name, const std::string& where) {
    if (name == "greedy") return decoding::Algorithm::Greedy;
    if (name == "beam") return decoding::Algorithm::Beam;
    if (name == "sampler") return decoding::Algorithm::Sampler;
    bad(where, "unknown algorithm '" + name + "'");
}

std::string detected_name(attack::DetectedKind k) {
    switch (k) {
    case attack::DetectedKind::Greedy: return "greedy";
    case attack::DetectedKind::Beam: return "beam";
    case attack::DetectedKind::Sampler: return "sampler";
    }
    return "sampler";
}

Tokens tokens_from(const Json& j, const std::string& where) {
    if (!j.is_array()) bad(where, "expected a token list");
    Tokens out;
    for (const auto& t : j) {
        if (!t.is_number_integer() || t.get<long long>() < 0) bad(where, "tokens must be non-negative integers");
        out.push_back(t.get<TokenId>());
    }
    return out;
}

Json usage_json(const victim::Usage& u) { return {{"queries", u.queries}, {"tokens", u.tokens}}; }

victim::Usage usage_from(const Json& j, const std::string& where) {
    Reader r(j, where);
    victim::Usage u{r.get<std::uint64_t>("queries"), r.get<std::uint64_t>("tokens")};
    r.finish();
    return u;
}

}  // namespace

Json number_to_json(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

double number_from_json(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "inf") return INFINITY;
        if (s == "-inf") return -INFINITY;
        if (s == "nan") return NAN;
    }
    throw Error(ErrorKind::Config, "not a number: " + j.dump());
}

Json to_json(const decoding::DecodingConfig& c) {
    return {{"algorithm", algorithm_name(c.algorithm)},
            {"beam_size", c.beam_size},
            {"temperature", optional_json(c.sampler.temperature)},
            {"top_k", optional_json(c.sampler.top_k)},
            {"top_p", optional_json(c.sampler.top_p)},
            {"exclusive_temp_topp", c.sampler.exclusive_temp_topp}};
}

decoding::DecodingConfig decoding_config_from_json(const Json& j) {
    Reader r(j, "decoding");
    decoding::DecodingConfig c;
    c.algorithm = algorithm_from(r.get_or<std::string>("algorithm", "sampler"), r.where());
    c.beam_size = r.get_or<int>("beam_size", c.algorithm == decoding::Algorithm::Beam ? 2 : 1);
    c.sampler.temperature = r.optional_number("temperature");
    c.sampler.top_k = r.optional<int>("top_k");
    c.sampler.top_p = r.optional_number("top_p");
    c.sampler.exclusive_temp_topp = r.get_or<bool>("exclusive_temp_topp", false);
    r.finish();
    try {
        c.validate();
    } catch (const Error& e) {
        bad("decoding", e.what());
    }
    return c;
}

Json to_json(const victim::ModelSpec& spec) {
    if (const auto* s = std::get_if<lm::SyntheticModelSpec>(&spec)) {
        return {{"kind", "synthetic"},       {"seed", s->seed},           {"vocab_size", s->vocab_size},
                {"spread", s->spread},       {"context_decay", s->context_decay},
                {"sharpness", s->sharpness}, {"max_context", s->max_context}};
    }
    const auto& n = std::get<lm::NGramModelSpec>(spec);
    return {{"kind", "ngram"},
            {"order", n.order},
            {"smoothing_alpha", n.smoothing_alpha},
            {"corpus_path", n.corpus_path.string()}};
}

victim::ModelSpec model_spec_from_json(const Json& j, const std::filesystem::path& base_dir) {
    Reader r(j, "model");
    const auto kind = r.get_or<std::string>("kind", "synthetic");
    if (kind == "synthetic") {
        lm::SyntheticModelSpec s;
        s.seed = r.get_or<std::uint64_t>("seed", s.seed);
        s.vocab_size = r.get_or<std::size_t>("vocab_size", s.vocab_size);
        s.spread = r.number_or("spread", s.spread);
        s.context_decay = r.number_or("context_decay", s.context_decay);
        s.sharpness = r.number_or("sharpness", s.sharpness);
        s.max_context = r.get_or<std::size_t>("max_context", s.max_context);
        r.finish();
        return s;
    }
    if (kind == "ngram") {
        lm::NGramModelSpec n;
        n.order = r.get_or<int>("order", n.order);
        n.smoothing_alpha = r.number_or("smoothing_alpha", n.smoothing_alpha);
        std::filesystem::path corpus = r.get<std::string>("corpus_path");
        n.corpus_path = corpus.is_relative() && !base_dir.empty() ? base_dir / corpus : corpus;
        r.finish();
        return n;
    }
    bad("model", "unknown kind '" + kind + "'");
}

Json to_json(const victim::DefenseConfig& d) { return {{"rho", d.rho}, {"top_m", optional_json(d.top_m)}}; }

victim::DefenseConfig defense_from_json(const Json& j) {
    Reader r(j, "defense");
    victim::DefenseConfig d;
    d.rho = r.number_or("rho", d.rho);
    d.top_m = r.optional<int>("top_m");
    r.finish();
    if (!(d.rho >= 0.0 && d.rho <= 1.0)) bad("defense", "rho must lie in [0, 1]");
    if (d.top_m && *d.top_m < 1) bad("defense", "top_m must be at least 1");
    return d;
}

Json to_json(const victim::VictimConfig& c) {
    return {{"model", to_json(c.model)},
            {"decoding", to_json(c.decoding)},
            {"top_logprobs", c.top_logprobs},
            {"hidden_prefix", c.hidden_prefix},
            {"defense", c.defense ? to_json(*c.defense) : Json(nullptr)},
            {"seed", c.seed}};
}

victim::VictimConfig victim_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
    Reader r(j, "victim");
    victim::VictimConfig c;
    if (r.has("model")) c.model = model_spec_from_json(r.at("model"), base_dir);
    if (r.has("decoding")) c.decoding = decoding_config_from_json(r.at("decoding"));
    c.top_logprobs = r.get_or<int>("top_logprobs", c.top_logprobs);
    if (r.has("hidden_prefix")) c.hidden_prefix = tokens_from(r.at("hidden_prefix"), "victim.hidden_prefix");
    if (r.has("defense")) c.defense = defense_from_json(r.at("defense"));
    c.seed = r.get_or<std::uint64_t>("seed", c.seed);
    r.finish();
    if (c.top_logprobs < 0) bad("victim", "top_logprobs must be non-negative");
    return c;
}

Json to_json(const attack::AttackSettings& s) {
    Json prompts = Json::array();
    for (const auto& p : s.prompts) prompts.push_back(p);
    return {{"prompts", prompts},
            {"vocab_size", s.vocab_size},
            {"stage1_repeats", s.stage1_repeats},
            {"stage1_length", s.stage1_length},
            {"stage2_steps", s.stage2_steps},
            {"stage2_prompts", s.stage2_prompts},
            {"stage3_prompts", s.stage3_prompts},
            {"stage3_queries", s.stage3_queries},
            {"stage4_prompts", s.stage4_prompts},
            {"stage4_queries", s.stage4_queries},
            {"stage5_queries", s.stage5_queries},
            {"stage6_prompts", s.stage6_prompts},
            {"stage6_queries", s.stage6_queries},
            {"temperature_unity_band", s.temperature_unity_band},
            {"ratio_unity_band", s.ratio_unity_band},
            {"stage6_match_tolerance", s.stage6_match_tolerance},
            {"stage6_gain_per_draw", s.stage6_gain_per_draw},
            {"stage5_mass_target", s.stage5_mass_target},
            {"select_flat_prompts", s.select_flat_prompts}};
}

attack::AttackSettings attack_settings_from_json(const Json& j) {
    Reader r(j, "settings");
    attack::AttackSettings s;
    s.vocab_size = r.get_or<std::size_t>("vocab_size", s.vocab_size);
    s.stage1_repeats = r.get_or("stage1_repeats", s.stage1_repeats);
    s.stage1_length = r.get_or("stage1_length", s.stage1_length);
    s.stage2_steps = r.get_or("stage2_steps", s.stage2_steps);
    s.stage2_prompts = r.get_or("stage2_prompts", s.stage2_prompts);
    s.stage3_prompts = r.get_or("stage3_prompts", s.stage3_prompts);
    s.stage3_queries = r.get_or("stage3_queries", s.stage3_queries);
    s.stage4_prompts = r.get_or("stage4_prompts", s.stage4_prompts);
    s.stage4_queries = r.get_or("stage4_queries", s.stage4_queries);
    s.stage5_queries = r.get_or("stage5_queries", s.stage5_queries);
    s.stage6_prompts = r.get_or("stage6_prompts", s.stage6_prompts);
    s.stage6_queries = r.get_or("stage6_queries", s.stage6_queries);
    s.temperature_unity_band = r.number_or("temperature_unity_band", s.temperature_unity_band);
    s.ratio_unity_band = r.number_or("ratio_unity_band", s.ratio_unity_band);
    s.stage6_match_tolerance = r.number_or("stage6_match_tolerance", s.stage6_match_tolerance);
    s.stage6_gain_per_draw = r.number_or("stage6_gain_per_draw", s.stage6_gain_per_draw);
    s.stage5_mass_target = r.number_or("stage5_mass_target", s.stage5_mass_target);
    s.select_flat_prompts = r.get_or("select_flat_prompts", s.select_flat_prompts);
    if (r.has("prompts")) {
        const auto& p = r.at("prompts");
        if (p.is_array()) {
            for (const auto& prompt : p) s.prompts.push_back(tokens_from(prompt, "settings.prompts"));
        } else {
            Reader g(p, "settings.prompts");
            const auto count = g.get<std::size_t>("count");
            const auto length = g.get<std::size_t>("length");
            const auto seed = g.get<std::uint64_t>("seed");
            g.finish();
            if (s.vocab_size == 0) bad("settings", "generated prompts need vocab_size");
            s.prompts = make_prompt_pool(seed, count, length, s.vocab_size);
        }
    }
    r.finish();
    return s;
}

Json to_json(const attack::AttackReport& report) {
    Json stages = Json::array();
    for (const auto& d : report.stages) {
        Json values = Json::object();
        for (const auto& [k, v] : d.values) values[k] = number_to_json(v);
        Json series = Json::object();
        for (const auto& [k, v] : d.series) {
            Json list = Json::array();
            for (double x : v) list.push_back(number_to_json(x));
            series[k] = list;
        }
        stages.push_back({{"stage", d.stage},
                          {"status", d.status},
                          {"message", d.message},
                          {"values", values},
                          {"series", series},
                          {"spent", usage_json(d.spent)}});
    }
    return {{"detected", detected_name(report.detected)},
            {"sampler_case", report.sampler_case},
            {"beam_size", optional_json(report.beam_size)},
            {"temperature", optional_json(report.temperature)},
            {"top_k", optional_json(report.top_k)},
            {"top_p", optional_json(report.top_p)},
            {"stages", stages},
            {"ledger", usage_json(report.ledger)},
            {"degraded", report.degraded}};
}

attack::AttackReport attack_report_from_json(const Json& j) {
    Reader r(j, "report");
    attack::AttackReport report;
    const auto detected = algorithm_from(r.get<std::string>("detected"), "report");
    report.detected = detected == decoding::Algorithm::Greedy ? attack::DetectedKind::Greedy
                      : detected == decoding::Algorithm::Beam ? attack::DetectedKind::Beam
                                                              : attack::DetectedKind::Sampler;
    report.sampler_case = r.get<int>("sampler_case");
    report.beam_size = r.optional<int>("beam_size");
    report.temperature = r.optional_number("temperature");
    report.top_k = r.optional<std::size_t>("top_k");
    report.top_p = r.optional_number("top_p");
    report.ledger = usage_from(r.at("ledger"), "report.ledger");
    report.degraded = r.get<bool>("degraded");
    for (const auto& sj : r.at("stages")) {
        Reader sr(sj, "report.stages");
        attack::StageDiagnostic d;
        d.stage = sr.get<std::string>("stage");
        d.status = sr.get<std::string>("status");
        d.message = sr.get<std::string>("message");
        for (const auto& item : sr.at("values").items()) d.values[item.key()] = number_from_json(item.value());
        for (const auto& item : sr.at("series").items()) {
            auto& out = d.series[item.key()];
            for (const auto& x : item.value()) out.push_back(number_from_json(x));
        }
        d.spent = usage_from(sr.at("spent"), "report.stages.spent");
        sr.finish();
        report.stages.push_back(std::move(d));
    }
    r.finish();
    return report;
}

Json to_json(const lm::RankedDistribution& dist) {
    Json entries = Json::array();
    for (const auto& e : dist) entries.push_back(Json::array({e.token, e.prob}));
    return {{"entries", entries}};
}

lm::RankedDistribution distribution_from_json(const Json& j) {
    const Json* list = &j;
    if (j.is_object()) {
        if (!j.contains("entries") || j.size() != 1) bad("distribution", "expected exactly the key 'entries'");
        list = &j.at("entries");
    }
    if (!list->is_array() || list->empty()) bad("distribution", "expected a non-empty list");
    try {
        if (list->front().is_number()) return lm::RankedDistribution::from_dense(list->get<std::vector<double>>());
        std::vector<lm::TokenProb> entries;
        for (const auto& e : *list) {
            if (!e.is_array() || e.size() != 2) bad("distribution", "entries must be [token, prob] pairs");
            entries.push_back({e.at(0).get<TokenId>(), e.at(1).get<double>()});
        }
        return lm::RankedDistribution::from_entries(std::move(entries));
    } catch (const nlohmann::json::exception& e) {
        bad("distribution", e.what());
    } catch (const Error& e) {
        bad("distribution", e.what());
    }
}

Json to_json(const stats::ComparisonReport& report) {
    return {{"ks",
             {{"statistic", report.ks.statistic},
              {"p_value", report.ks.p_value},
              {"effective_n", report.ks.effective_n}}},
            {"kl_nats", number_to_json(report.kl_nats)},
            {"ks_pass", report.ks_pass},
            {"kl_pass", report.kl_pass},
            {"match", report.match()}};
}

Json to_json(const victim::Usage& usage) { return usage_json(usage); }

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Config, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::Config, "failed writing " + path.string());
}

}  // namespace declab::harness
