// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "declab/common/error.hpp"
#include "declab/common/rng.hpp"
#include "declab/decoder/transforms.hpp"
#include "declab/stats/stats.hpp"
#include "declab/victim/api.hpp"

namespace declab::harness {

namespace {

// Stream tags for seeds derived from the experiment seed.
constexpr std::uint64_t kGridStream = 1;
constexpr std::uint64_t kPromptStream = 2;
constexpr std::uint64_t kReplayStream = 3;

double uniform_in(CounterRng& rng, Range r) { return r.low + (r.high - r.low) * rng.uniform(); }

int int_in(CounterRng& rng, IntRange r) {
    return r.low + static_cast<int>(rng.below(static_cast<std::uint64_t>(r.high - r.low + 1)));
}

int case_of_kind(const std::string& kind) {
    const std::string prefix = "sampler-case-";
    if (kind.rfind(prefix, 0) != 0) return 0;
    return std::stoi(kind.substr(prefix.size()));
}

template <typename T>
std::optional<double> mean_of(const std::vector<T>& xs) {
    if (xs.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& x : xs) sum += static_cast<double>(x);
    return sum / static_cast<double>(xs.size());
}

ReplayResult replay(const victim::VictimConfig& truth, const std::shared_ptr<const lm::ContextModel>& model,
                    const attack::AttackReport& report, const std::vector<Tokens>& prompts, std::size_t samples) {
    ReplayResult result;
    result.prompts = prompts.size();
    if (prompts.empty()) return result;
    const auto inferred = report.inferred_config();
    if (truth.decoding.deterministic()) {
        auto replica_config = truth;
        replica_config.decoding = inferred;
        victim::Victim original(truth, model);
        victim::Victim replica(replica_config, model);
        std::size_t identical = 0;
        for (const auto& prompt : prompts) {
            const victim::GenerationRequest request{prompt, 6, false};
            identical += original.generate(request).tokens == replica.generate(request).tokens ? 1 : 0;
        }
        result.identical_share = static_cast<double>(identical) / static_cast<double>(prompts.size());
        result.match = identical == prompts.size();
        return result;
    }
    if (inferred.deterministic()) return result;
    victim::Victim original(truth, model);
    double p_sum = 0.0, kl_sum = 0.0;
    for (const auto& prompt : prompts) {
        Tokens context = truth.hidden_prefix;
        context.insert(context.end(), prompt.begin(), prompt.end());
        const auto actual = original.exact_final_distribution(prompt, victim::OracleAccess{});
        const auto stolen = decoding::final_distribution(inferred, model->logits(context));
        const auto cmp = stats::compare(actual, stolen, samples);
        p_sum += cmp.ks.p_value;
        kl_sum += cmp.kl_nats;
    }
    const auto n = static_cast<double>(prompts.size());
    result.mean_p_value = p_sum / n;
    result.mean_kl = kl_sum / n;
    const stats::ComparisonThresholds thresholds;
    result.match = result.mean_p_value >= thresholds.min_p_value && result.mean_kl <= thresholds.max_kl;
    return result;
}

void score(VictimOutcome& out, std::size_t vocab_size) {
    const auto& report = *out.report;
    out.inferred_kind = report.kind_name();
    out.type_correct = out.inferred_kind == out.truth_kind;
    const auto& truth = out.truth.decoding;
    if (truth.algorithm == decoding::Algorithm::Beam) {
        out.beam_exact = report.beam_size && *report.beam_size == truth.beam_size;
        return;
    }
    if (truth.deterministic()) return;
    const auto eff = truth.effective();
    if (eff.temperature) out.temperature_error = std::abs(report.temperature.value_or(1.0) - *eff.temperature);
    if (eff.top_p) out.top_p_error = std::abs(report.top_p.value_or(1.0) - *eff.top_p);
    if (eff.top_k) {
        const auto k_hat = static_cast<long>(report.top_k.value_or(vocab_size));
        out.top_k_error = k_hat - static_cast<long>(*eff.top_k);
    }
}

RunSummary summarize(const std::vector<VictimOutcome>& outcomes, const CostModel& cost) {
    RunSummary s;
    s.total = outcomes.size();
    std::vector<double> tau, p, replays;
    std::vector<int> k_exact, beam;
    for (const auto& o : outcomes) {
        if (!o.report) {
            ++s.failures;
            continue;
        }
        s.correct += o.type_correct ? 1 : 0;
        s.ledger += o.report->ledger;
        if (o.temperature_error) tau.push_back(*o.temperature_error);
        if (o.top_p_error) p.push_back(*o.top_p_error);
        const int c = case_of_kind(o.truth_kind);
        if (o.top_k_error && (c == 2 || c == 5)) k_exact.push_back(*o.top_k_error == 0 ? 1 : 0);
        if (o.beam_exact) beam.push_back(*o.beam_exact ? 1 : 0);
        if (o.replay && o.replay->prompts > 0) replays.push_back(o.replay->match ? 1.0 : 0.0);
    }
    s.accuracy = s.total == 0 ? 0.0 : static_cast<double>(s.correct) / static_cast<double>(s.total);
    s.temperature_mae = mean_of(tau);
    s.top_p_mae = mean_of(p);
    s.top_k_exact_rate = mean_of(k_exact);
    s.beam_exact_rate = mean_of(beam);
    s.replay_match_rate = mean_of(replays);
    // Priced from the summed ledger, so the total is exactly tokens x price.
    s.cost_usd = cost_estimate(s.ledger.tokens, cost);
    return s;
}

VictimOutcome run_one(const ExperimentSpec& spec, const victim::VictimConfig& truth, std::size_t index) {
    VictimOutcome out;
    out.index = index;
    out.truth = truth;
    out.truth_kind = victim_kind(truth.decoding);
    try {
        const auto model = victim::build_model(truth.model);
        const std::size_t vocab = model->vocabulary().size();
        victim::Victim target(truth, model);
        victim::LocalApi api(target);

        auto settings = spec.settings;
        if (settings.vocab_size == 0) settings.vocab_size = vocab;
        if (settings.prompts.empty()) {
            settings.prompts = make_prompt_pool(mix64(spec.seed, mix64(kPromptStream, index)), spec.pool_count,
                                                spec.pool_length, vocab);
        }

        std::unique_ptr<attack::InnerProbSource> inner;
        switch (spec.inner) {
        case InnerMode::Api: inner = std::make_unique<attack::ApiLogprobsSource>(api); break;
        case InnerMode::Reference: inner = std::make_unique<attack::ReferenceModelSource>(model); break;
        case InnerMode::None: break;
        }
        std::unique_ptr<attack::FinalObserver> exact;
        if (spec.exact_oracle) exact = std::make_unique<attack::ExactObserver>(target);

        out.report = attack::run_full_attack(api, settings, inner.get(), exact.get());
        score(out, vocab);
        out.cost_usd = cost_estimate(out.report->ledger.tokens, spec.cost);
        if (spec.replay_prompts > 0) {
            const auto held_out = make_prompt_pool(mix64(spec.seed, mix64(kReplayStream, index)),
                                                   spec.replay_prompts, spec.pool_length, vocab);
            out.replay = replay(truth, model, *out.report, held_out, spec.replay_samples);
        }
    } catch (const std::exception& e) {
        out.report.reset();
        out.error = e.what();
    }
    return out;
}

Json optional_number(const std::optional<double>& x) { return x ? number_to_json(*x) : Json(nullptr); }

std::string csv_field(const std::optional<double>& x) {
    if (!x) return "";
    std::ostringstream os;
    os.precision(17);
    os << *x;
    return os.str();
}

Range range_from(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw Error(ErrorKind::Config, where + ": expected [low, high]");
    }
    Range r{j[0].get<double>(), j[1].get<double>()};
    if (!(r.low <= r.high)) throw Error(ErrorKind::Config, where + ": low exceeds high");
    return r;
}

IntRange int_range_from(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
        throw Error(ErrorKind::Config, where + ": expected [low, high] integers");
    }
    IntRange r{j[0].get<int>(), j[1].get<int>()};
    if (r.low > r.high) throw Error(ErrorKind::Config, where + ": low exceeds high");
    return r;
}

void reject_unknown(const Json& j, const std::vector<std::string>& known, const std::string& where) {
    for (const auto& item : j.items()) {
        if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
            throw Error(ErrorKind::Config, where + ": unknown key '" + item.key() + "'");
        }
    }
}

}  // namespace

std::vector<Tokens> make_prompt_pool(std::uint64_t seed, std::size_t count, std::size_t length,
                                     std::size_t vocab_size) {
    require(length >= 1, ErrorKind::InvalidInput, "prompts need at least one token");
    require(vocab_size >= 1, ErrorKind::InvalidInput, "empty vocabulary");
    CounterRng rng(seed, kPromptStream);
    std::vector<Tokens> pool(count);
    for (auto& prompt : pool) {
        prompt.resize(length);
        for (auto& t : prompt) t = static_cast<lm::TokenId>(rng.below(vocab_size));
    }
    return pool;
}

std::string victim_kind(const decoding::DecodingConfig& config) {
    switch (config.algorithm) {
    case decoding::Algorithm::Greedy: return "greedy";
    case decoding::Algorithm::Beam: return "beam";
    case decoding::Algorithm::Sampler: break;
    }
    return "sampler-case-" + std::to_string(decoding::sampler_case(config.effective()));
}

std::vector<std::string> all_victim_kinds() {
    std::vector<std::string> kinds{"greedy", "beam"};
    for (int c = 1; c <= 8; ++c) kinds.push_back("sampler-case-" + std::to_string(c));
    return kinds;
}

std::vector<victim::VictimConfig> generate_grid(const GridSpec& grid) {
    const auto kinds = grid.kinds.empty() ? all_victim_kinds() : grid.kinds;
    const auto known = all_victim_kinds();
    for (const auto& k : kinds) {
        require(std::find(known.begin(), known.end(), k) != known.end(), ErrorKind::Config,
                "unknown victim kind '" + k + "'");
    }
    require(grid.vocab_size >= 2, ErrorKind::Config, "grid vocabulary needs at least two tokens");
    require(grid.top_k.low >= 1 && static_cast<std::size_t>(grid.top_k.high) < grid.vocab_size, ErrorKind::Config,
            "top_k range must lie in [1, |V|)");
    require(grid.beam.low >= 1, ErrorKind::Config, "beam range must start at 1 or more");
    require(grid.temperature.low > 0.0, ErrorKind::Config, "temperatures must be positive");
    require(grid.top_p.low > 0.0 && grid.top_p.high <= 1.0, ErrorKind::Config, "top_p range must lie in (0, 1]");

    std::vector<victim::VictimConfig> out;
    for (std::size_t i = 0; i < grid.count; ++i) {
        CounterRng rng(grid.seed, mix64(kGridStream, i));
        const auto& kind = kinds[i % kinds.size()];
        victim::VictimConfig v;
        lm::SyntheticModelSpec model;
        model.seed = rng.next_u64();
        model.vocab_size = grid.vocab_size;
        v.model = model;
        v.seed = rng.next_u64();
        v.top_logprobs = grid.top_logprobs < 0 ? static_cast<int>(grid.vocab_size) : grid.top_logprobs;
        v.defense = grid.defense;
        if (kind == "greedy") {
            v.decoding = decoding::DecodingConfig::greedy();
        } else if (kind == "beam") {
            v.decoding = decoding::DecodingConfig::beam(int_in(rng, grid.beam));
        } else {
            const auto parts = decoding::case_components(case_of_kind(kind));
            decoding::SamplerParams p;
            if (parts.temperature) p.temperature = uniform_in(rng, grid.temperature);
            if (parts.top_k) p.top_k = int_in(rng, grid.top_k);
            if (parts.top_p) p.top_p = uniform_in(rng, grid.top_p);
            v.decoding = decoding::DecodingConfig::sampling(p);
        }
        out.push_back(std::move(v));
    }
    return out;
}

void ExperimentSpec::validate() const {
    require(grid.has_value() || !victims.empty(), ErrorKind::Config, "experiment has no victims");
    require(pool_count >= 1 && pool_length >= 1, ErrorKind::Config, "prompt pool must be non-empty");
    require(cost.price_per_1k_tokens >= 0.0, ErrorKind::Config, "price must be non-negative");
    for (const auto& v : victims) {
        try {
            v.decoding.validate();
        } catch (const Error& e) {
            throw Error(ErrorKind::Config, e.what());
        }
    }
}

ExperimentSpec experiment_spec_from_json(const Json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw Error(ErrorKind::Config, "experiment spec must be an object");
    reject_unknown(j,
                   {"grid", "victims", "settings", "pool_count", "pool_length", "seed", "inner", "exact_oracle",
                    "replay_prompts", "replay_samples", "cost_model", "price_per_1k_tokens", "threads", "output",
                    "csv"},
                   "experiment");
    ExperimentSpec spec;
    try {
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            reject_unknown(g,
                           {"seed", "count", "vocab_size", "temperature", "top_k", "top_p", "beam", "kinds",
                            "top_logprobs", "defense"},
                           "grid");
            GridSpec grid;
            require(g.contains("seed"), ErrorKind::Config, "grid: a randomized grid needs an explicit seed");
            grid.seed = g.at("seed").get<std::uint64_t>();
            grid.count = g.value("count", grid.count);
            grid.vocab_size = g.value("vocab_size", grid.vocab_size);
            if (g.contains("temperature")) grid.temperature = range_from(g.at("temperature"), "grid.temperature");
            if (g.contains("top_k")) grid.top_k = int_range_from(g.at("top_k"), "grid.top_k");
            if (g.contains("top_p")) grid.top_p = range_from(g.at("top_p"), "grid.top_p");
            if (g.contains("beam")) grid.beam = int_range_from(g.at("beam"), "grid.beam");
            grid.kinds = g.value("kinds", grid.kinds);
            grid.top_logprobs = g.value("top_logprobs", grid.top_logprobs);
            if (g.contains("defense") && !g.at("defense").is_null()) grid.defense = defense_from_json(g.at("defense"));
            spec.grid = grid;
        }
        if (j.contains("victims")) {
            for (const auto& v : j.at("victims")) spec.victims.push_back(victim_config_from_json(v, base_dir));
        }
        if (j.contains("settings")) spec.settings = attack_settings_from_json(j.at("settings"));
        spec.pool_count = j.value("pool_count", spec.pool_count);
        spec.pool_length = j.value("pool_length", spec.pool_length);
        spec.seed = j.value("seed", spec.seed);
        const auto inner = j.value("inner", std::string("api"));
        if (inner == "api") {
            spec.inner = InnerMode::Api;
        } else if (inner == "reference") {
            spec.inner = InnerMode::Reference;
        } else if (inner == "none") {
            spec.inner = InnerMode::None;
        } else {
            throw Error(ErrorKind::Config, "inner must be api, reference or none");
        }
        spec.exact_oracle = j.value("exact_oracle", spec.exact_oracle);
        spec.replay_prompts = j.value("replay_prompts", spec.replay_prompts);
        spec.replay_samples = j.value("replay_samples", spec.replay_samples);
        if (j.contains("cost_model")) spec.cost = CostModel::preset(j.at("cost_model").get<std::string>());
        if (j.contains("price_per_1k_tokens")) {
            spec.cost = {"custom", j.at("price_per_1k_tokens").get<double>()};
        }
        spec.threads = j.value("threads", spec.threads);
        if (j.contains("output")) {
            std::filesystem::path p = j.at("output").get<std::string>();
            spec.output = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        }
        if (j.contains("csv")) {
            std::filesystem::path p = j.at("csv").get<std::string>();
            spec.csv = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, std::string("experiment: ") + e.what());
    }
    spec.validate();
    return spec;
}

RunReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const auto start = std::chrono::steady_clock::now();
    std::vector<victim::VictimConfig> victims;
    if (spec.grid) victims = generate_grid(*spec.grid);
    victims.insert(victims.end(), spec.victims.begin(), spec.victims.end());

    RunReport report;
    report.cost_model = spec.cost.name;
    report.outcomes.resize(victims.size());
    unsigned threads = spec.threads != 0 ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(victims.size(), 1)));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < victims.size(); i = next.fetch_add(1)) {
            report.outcomes[i] = run_one(spec, victims[i], i);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    report.summary = summarize(report.outcomes, spec.cost);
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

Json to_json(const RunReport& report) {
    Json victims = Json::array();
    for (const auto& o : report.outcomes) {
        Json replay_json = nullptr;
        if (o.replay) {
            replay_json = {{"prompts", o.replay->prompts},
                           {"mean_p_value", number_to_json(o.replay->mean_p_value)},
                           {"mean_kl", number_to_json(o.replay->mean_kl)},
                           {"identical_share", o.replay->identical_share},
                           {"match", o.replay->match}};
        }
        victims.push_back({{"index", o.index},
                           {"truth", to_json(o.truth)},
                           {"truth_kind", o.truth_kind},
                           {"report", o.report ? to_json(*o.report) : Json(nullptr)},
                           {"error", o.error},
                           {"inferred_kind", o.inferred_kind},
                           {"type_correct", o.type_correct},
                           {"temperature_error", optional_number(o.temperature_error)},
                           {"top_p_error", optional_number(o.top_p_error)},
                           {"top_k_error", o.top_k_error ? Json(*o.top_k_error) : Json(nullptr)},
                           {"beam_exact", o.beam_exact ? Json(*o.beam_exact) : Json(nullptr)},
                           {"replay", replay_json},
                           {"cost_usd", o.cost_usd}});
    }
    const auto& s = report.summary;
    return {{"cost_model", report.cost_model},
            {"summary",
             {{"total", s.total},
              {"failures", s.failures},
              {"correct", s.correct},
              {"accuracy", s.accuracy},
              {"temperature_mae", optional_number(s.temperature_mae)},
              {"top_p_mae", optional_number(s.top_p_mae)},
              {"top_k_exact_rate", optional_number(s.top_k_exact_rate)},
              {"beam_exact_rate", optional_number(s.beam_exact_rate)},
              {"replay_match_rate", optional_number(s.replay_match_rate)},
              {"ledger", to_json(s.ledger)},
              {"cost_usd", s.cost_usd}}},
            {"victims", victims}};
}

std::string to_csv(const RunReport& report) {
    std::ostringstream os;
    os << "index,truth_kind,inferred_kind,type_correct,temperature_error,top_p_error,top_k_error,beam_exact,"
          "replay_match,queries,tokens,cost_usd,error\n";
    for (const auto& o : report.outcomes) {
        std::string error = o.error;
        std::replace(error.begin(), error.end(), '"', '\'');
        os << o.index << ',' << o.truth_kind << ',' << o.inferred_kind << ',' << (o.type_correct ? 1 : 0) << ','
           << csv_field(o.temperature_error) << ',' << csv_field(o.top_p_error) << ','
           << (o.top_k_error ? std::to_string(*o.top_k_error) : "") << ','
           << (o.beam_exact ? (*o.beam_exact ? "1" : "0") : "") << ','
           << (o.replay && o.replay->prompts > 0 ? (o.replay->match ? "1" : "0") : "") << ','
           << (o.report ? o.report->ledger.queries : 0) << ',' << (o.report ? o.report->ledger.tokens : 0) << ','
           << csv_field(o.cost_usd) << ",\"" << error << "\"\n";
    }
    return os.str();
}

PerplexityStudy perplexity_study(std::shared_ptr<const lm::ContextModel> model, const std::vector<Tokens>& prompts,
                                 const decoding::DecodingConfig& decoding, const victim::DefenseConfig& defense,
                                 int length, std::uint64_t seed) {
    require(!prompts.empty(), ErrorKind::InvalidInput, "perplexity study needs prompts");
    require(length >= 1, ErrorKind::InvalidInput, "completion length must be at least 1");
    victim::VictimConfig plain;
    plain.decoding = decoding;
    plain.seed = seed;
    auto guarded = plain;
    guarded.defense = defense;
    // Both arms replay the same request ordinals, so they share every draw
    // the defense does not consume.
    victim::Victim a(plain, model);
    victim::Victim b(guarded, model);

    PerplexityStudy study;
    for (const auto& prompt : prompts) {
        const victim::GenerationRequest request{prompt, length, false};
        const auto plain_out = a.generate(request).tokens;
        const auto guarded_out = b.generate(request).tokens;
        const auto pa = stats::perplexity(*model, plain_out, prompt);
        const auto pb = stats::perplexity(*model, guarded_out, prompt);
        study.rows.push_back({pa.value, pb.value});
        study.mean_undefended += pa.value;
        study.mean_defended += pb.value;
    }
    const auto n = static_cast<double>(prompts.size());
    study.mean_undefended /= n;
    study.mean_defended /= n;
    study.relative_increase = study.mean_defended / study.mean_undefended - 1.0;
    return study;
}

std::vector<PrefixInfluencePoint> prefix_influence(const lm::ContextModel& model, const Tokens& prefix,
                                                   const std::vector<std::size_t>& query_lengths,
                                                   std::size_t queries_per_length, std::uint64_t seed) {
    require(queries_per_length >= 1, ErrorKind::InvalidInput, "need at least one query per length");
    const std::size_t vocab = model.vocabulary().size();
    std::vector<PrefixInfluencePoint> out;
    for (std::size_t length : query_lengths) {
        require(length >= 1, ErrorKind::InvalidInput, "query length must be at least 1");
        const auto queries = make_prompt_pool(mix64(seed, length), queries_per_length, length, vocab);
        double total = 0.0;
        for (const auto& query : queries) {
            Tokens prompted = prefix;
            prompted.insert(prompted.end(), query.begin(), query.end());
            total += stats::kl_divergence(model.inner_distribution(prompted), model.inner_distribution(query));
        }
        out.push_back({length, total / static_cast<double>(queries_per_length)});
    }
    return out;
}

}  // namespace declab::harness
