// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "declab/common/error.hpp"
#include "declab/harness/cost.hpp"
#include "declab/harness/experiment.hpp"
#include "declab/harness/serialization.hpp"

namespace declab::harness {
namespace {

namespace fs = std::filesystem;

victim::VictimConfig synthetic_victim(decoding::DecodingConfig decoding, std::size_t vocab, std::uint64_t seed) {
    victim::VictimConfig c;
    lm::SyntheticModelSpec spec;
    spec.seed = seed;
    spec.vocab_size = vocab;
    c.model = spec;
    c.decoding = decoding;
    c.top_logprobs = static_cast<int>(vocab);
    c.seed = seed + 1;
    return c;
}

decoding::SamplerParams nucleus(double tau, double p) {
    decoding::SamplerParams s;
    s.temperature = tau;
    s.top_p = p;
    return s;
}

fs::path scratch_dir() {
    const auto dir = fs::temp_directory_path() / ("declab_harness_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string command = std::string(DECLAB_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cost, PublishedPrices) {
    const std::vector<double> expected{0.8, 1.0, 4.0, 40.0};
    const auto presets = CostModel::presets();
    ASSERT_EQ(presets.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(cost_estimate(2000000, presets[i]), expected[i]);
    EXPECT_EQ(cost_estimate(0, CostModel::preset("davinci")), 0.0);
    EXPECT_THROW(CostModel::preset("gpt-9"), Error);
}

TEST(Cost, WorstCase) {
    const auto b = worst_case_budget();
    EXPECT_EQ(b.queries, 400000u);
    EXPECT_EQ(b.tokens, 2000000u);
    EXPECT_EQ(b.tokens, 5 * b.queries);
}

TEST(Cost, MinimalSettingsMatchLedgerExactly) {
    attack::AttackSettings s;
    s.prompts = {{3, 1, 4, 1, 5}};
    s.vocab_size = 200;
    s.stage1_repeats = 2;
    s.stage1_length = 1;
    s.stage2_steps = 2;
    s.stage2_prompts = s.stage3_prompts = s.stage4_prompts = s.stage6_prompts = 1;
    s.stage3_queries = s.stage4_queries = s.stage5_queries = s.stage6_queries = 1;
    // A flat final distribution, so two one-token repeats already differ and
    // the run takes the sampler path.
    victim::Victim v(synthetic_victim(decoding::DecodingConfig::sampling(nucleus(1.5, 0.95)), 200, 4));
    victim::LocalApi api(v);
    attack::ApiLogprobsSource inner(api);
    const auto report = attack::run_full_attack(api, s, &inner);
    ASSERT_EQ(report.detected, attack::DetectedKind::Sampler);
    const auto plan = planned_budget(s);
    EXPECT_EQ(report.ledger.queries, plan.queries);
    EXPECT_EQ(report.ledger.tokens, plan.tokens);
}

TEST(Cost, DefaultSettingsMatchLedgerThroughStageSix) {
    attack::AttackSettings s;
    s.prompts = make_prompt_pool(6, 100, 8, 1000);
    s.vocab_size = 1000;
    victim::Victim v(synthetic_victim(decoding::DecodingConfig::sampling(nucleus(0.8, 0.8)), 1000, 6));
    victim::LocalApi api(v);
    attack::ApiLogprobsSource inner(api);
    const auto report = attack::run_full_attack(api, s, &inner);
    ASSERT_EQ(report.sampler_case, 6);
    const auto plan = planned_budget(s);
    EXPECT_EQ(report.ledger.queries, plan.queries);
    EXPECT_EQ(report.ledger.tokens, plan.tokens);
}

TEST(Serialization, VictimConfigRoundTrip) {
    auto c = synthetic_victim(decoding::DecodingConfig::sampling(nucleus(0.7, 0.85)), 300, 9);
    c.hidden_prefix = {1, 2, 3};
    c.defense = victim::DefenseConfig{0.1, 5};
    c.decoding.sampler.top_k = 12;
    const auto back = victim_config_from_json(to_json(c));
    EXPECT_EQ(dump(to_json(back)), dump(to_json(c)));
    EXPECT_EQ(back.decoding, c.decoding);
    EXPECT_EQ(back.hidden_prefix, c.hidden_prefix);
}

TEST(Serialization, RejectsUnknownKeys) {
    auto j = to_json(synthetic_victim(decoding::DecodingConfig::greedy(), 10, 1));
    j["temprature"] = 0.5;
    try {
        victim_config_from_json(j);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
    EXPECT_THROW(experiment_spec_from_json(Json::parse(R"({"grid":{"seed":1},"sed":2})")), Error);
    EXPECT_THROW(attack_settings_from_json(Json::parse(R"({"stage3_querys":5})")), Error);
}

TEST(Serialization, GridNeedsSeed) {
    EXPECT_THROW(experiment_spec_from_json(Json::parse(R"({"grid":{"count":10}})")), Error);
}

TEST(Serialization, SettingsRoundTrip) {
    attack::AttackSettings s;
    s.prompts = {{1, 2}, {3}};
    s.vocab_size = 77;
    s.stage4_queries = 123;
    s.temperature_unity_band = 0.05;
    const auto back = attack_settings_from_json(to_json(s));
    EXPECT_EQ(dump(to_json(back)), dump(to_json(s)));
    const auto generated = attack_settings_from_json(Json::parse(R"({"vocab_size":50,"prompts":{"count":4,"length":3,"seed":1}})"));
    EXPECT_EQ(generated.prompts.size(), 4u);
    EXPECT_EQ(generated.prompts[0].size(), 3u);
}

TEST(Serialization, ReportRoundTrip) {
    victim::Victim v(synthetic_victim(decoding::DecodingConfig::sampling(nucleus(0.8, 0.8)), 200, 6));
    victim::LocalApi api(v);
    attack::ApiLogprobsSource inner(api);
    attack::ExactObserver observer(v);
    attack::AttackSettings s;
    s.prompts = make_prompt_pool(1, 20, 4, 200);
    const auto report = attack::run_full_attack(api, s, &inner, &observer);
    const auto back = attack_report_from_json(to_json(report));
    EXPECT_EQ(dump(to_json(back)), dump(to_json(report)));
    EXPECT_EQ(back.temperature, report.temperature);
    EXPECT_EQ(back.top_p, report.top_p);
}

TEST(Serialization, NonFiniteNumbers) {
    EXPECT_EQ(number_to_json(INFINITY), "inf");
    EXPECT_EQ(number_from_json(number_to_json(-INFINITY)), -INFINITY);
    EXPECT_TRUE(std::isnan(number_from_json(number_to_json(NAN))));
    EXPECT_EQ(number_from_json(number_to_json(0.1)), 0.1);
}

TEST(Serialization, DistributionForms) {
    const auto d = distribution_from_json(Json::parse("[0.5, 0.3, 0.2]"));
    EXPECT_EQ(d.size(), 3u);
    const auto back = distribution_from_json(to_json(d));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back[i], d[i]);
    EXPECT_EQ(distribution_from_json(Json::parse("[[2, 0.6], [0, 0.4]]"))[0].token, 2u);
}

TEST(Grid, CoversEveryKindPerHundred) {
    GridSpec grid;
    grid.seed = 99;
    const auto victims = generate_grid(grid);
    ASSERT_EQ(victims.size(), 100u);
    std::map<std::string, int> counts;
    for (const auto& v : victims) ++counts[victim_kind(v.decoding)];
    EXPECT_EQ(counts.size(), 10u);
    for (const auto& kind : all_victim_kinds()) EXPECT_EQ(counts[kind], 10) << kind;
}

TEST(Grid, HyperparametersStayInRange) {
    GridSpec grid;
    grid.seed = 5;
    for (const auto& v : generate_grid(grid)) {
        const auto& s = v.decoding.sampler;
        EXPECT_TRUE(!s.temperature || (*s.temperature >= 0.6 && *s.temperature <= 0.95));
        EXPECT_TRUE(!s.top_k || (*s.top_k >= 10 && *s.top_k <= 100));
        EXPECT_TRUE(!s.top_p || (*s.top_p >= 0.6 && *s.top_p <= 0.95));
        if (v.decoding.algorithm == decoding::Algorithm::Beam) {
            EXPECT_TRUE(v.decoding.beam_size >= 2 && v.decoding.beam_size <= 10);
        }
    }
}

TEST(Grid, SeedChangesVictims) {
    GridSpec a, b;
    a.seed = 1;
    b.seed = 2;
    a.count = b.count = 10;
    EXPECT_EQ(dump(to_json(generate_grid(a)[3])), dump(to_json(generate_grid(a)[3])));
    EXPECT_NE(dump(to_json(generate_grid(a)[3])), dump(to_json(generate_grid(b)[3])));
}

ExperimentSpec small_spec(unsigned threads) {
    ExperimentSpec spec;
    GridSpec grid;
    grid.seed = 31;
    grid.count = 10;
    grid.vocab_size = 200;
    spec.grid = grid;
    spec.exact_oracle = true;
    spec.threads = threads;
    spec.seed = 8;
    return spec;
}

TEST(Experiment, ReportsAreByteIdenticalAcrossRunsAndThreads) {
    const auto one = dump(to_json(run_experiment(small_spec(1))));
    const auto two = dump(to_json(run_experiment(small_spec(3))));
    EXPECT_EQ(one, two);
    const auto parsed = Json::parse(one);
    EXPECT_EQ(parsed["summary"]["total"], 10);
    EXPECT_EQ(parsed["summary"]["correct"], 10);
}

TEST(Experiment, SingleGreedyVictim) {
    ExperimentSpec spec;
    spec.victims = {synthetic_victim(decoding::DecodingConfig::greedy(), 300, 2)};
    spec.cost = CostModel::preset("ada");
    const auto report = run_experiment(spec);
    ASSERT_EQ(report.outcomes.size(), 1u);
    EXPECT_TRUE(report.outcomes[0].type_correct);
    EXPECT_LT(report.summary.cost_usd, 0.01);
    EXPECT_DOUBLE_EQ(report.summary.accuracy, 1.0);
    EXPECT_DOUBLE_EQ(report.summary.cost_usd, cost_estimate(report.summary.ledger.tokens, spec.cost));
    ASSERT_TRUE(report.outcomes[0].replay.has_value());
    EXPECT_TRUE(report.outcomes[0].replay->match);
}

TEST(Experiment, FailuresAreRecordedAndRunContinues) {
    ExperimentSpec spec;
    auto blind = synthetic_victim(decoding::DecodingConfig::sampling(nucleus(0.8, 0.8)), 100, 3);
    blind.top_logprobs = 0;
    spec.victims = {blind, synthetic_victim(decoding::DecodingConfig::greedy(), 100, 4)};
    const auto report = run_experiment(spec);
    ASSERT_EQ(report.outcomes.size(), 2u);
    EXPECT_FALSE(report.outcomes[0].error.empty());
    EXPECT_TRUE(report.outcomes[1].type_correct);
    EXPECT_EQ(report.summary.failures, 1u);
    EXPECT_DOUBLE_EQ(report.summary.accuracy, 0.5);
}

TEST(Experiment, CsvHasOneRowPerVictim) {
    const auto csv = to_csv(run_experiment(small_spec(1)));
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line,
              "index,truth_kind,inferred_kind,type_correct,temperature_error,top_p_error,top_k_error,beam_exact,"
              "replay_match,queries,tokens,cost_usd,error");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 10);
}

TEST(Perplexity, NoDefenseGivesIdenticalArms) {
    lm::SyntheticModelSpec spec;
    spec.vocab_size = 300;
    auto model = std::make_shared<lm::SyntheticModel>(spec);
    const auto study = perplexity_study(model, make_prompt_pool(1, 20, 6, 300),
                                        decoding::DecodingConfig::sampling(nucleus(0.9, 0.9)), {0.0, std::nullopt},
                                        20, 3);
    for (const auto& row : study.rows) EXPECT_EQ(row.undefended, row.defended);
    EXPECT_EQ(study.relative_increase, 0.0);
}

TEST(Perplexity, FullReplacementDegradesText) {
    lm::SyntheticModelSpec spec;
    spec.vocab_size = 300;
    auto model = std::make_shared<lm::SyntheticModel>(spec);
    const auto study = perplexity_study(model, make_prompt_pool(1, 20, 6, 300),
                                        decoding::DecodingConfig::sampling(nucleus(0.9, 0.9)), {1.0, 300}, 20, 3);
    EXPECT_GT(study.relative_increase, 1.0);
}

TEST(PrefixInfluence, FadesWithQueryLength) {
    lm::SyntheticModelSpec spec;
    spec.vocab_size = 500;
    const lm::SyntheticModel model(spec);
    const auto points = prefix_influence(model, {5, 6, 7, 8, 9, 10, 11, 12}, {4, 16, 64, 256}, 30, 2);
    ASSERT_EQ(points.size(), 4u);
    for (std::size_t i = 1; i < points.size(); ++i) EXPECT_LT(points[i].mean_kl, points[i - 1].mean_kl);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch_dir();
    const std::string configs = DECLAB_CONFIGS;
    EXPECT_EQ(run_cli("cost estimate --tokens 2000000"), 0);
    EXPECT_EQ(run_cli("cost estimate --model nonexistent"), 1);
    EXPECT_EQ(run_cli("no-such-command"), 1);
    EXPECT_EQ(run_cli("experiment run --spec " + (dir / "missing.json").string()), 1);

    {
        std::ofstream bad(dir / "bad.json");
        bad << R"({"grid":{"seed":1},"unexpected":true})";
    }
    EXPECT_EQ(run_cli("experiment run --spec " + (dir / "bad.json").string()), 1);

    {
        std::ofstream failing(dir / "failing.json");
        failing << R"({"victims":[{"model":{"kind":"synthetic","seed":1,"vocab_size":50},)"
                << R"("decoding":{"algorithm":"sampler","top_p":0.8},"top_logprobs":0,"seed":2}]})";
    }
    EXPECT_EQ(run_cli("experiment run --spec " + (dir / "failing.json").string() + " --out " +
                      (dir / "failing_out.json").string()),
              2);
    EXPECT_TRUE(fs::exists(dir / "failing_out.json"));

    const auto out = dir / "greedy_attack.json";
    EXPECT_EQ(run_cli("attack run --victim " + configs + "/victim_greedy.json --settings " + configs +
                      "/settings.json --out " + out.string()),
              0);
    const auto report = read_json_file(out);
    EXPECT_EQ(attack_report_from_json(report).kind_name(), "greedy");
    fs::remove_all(dir);
}

TEST(Cli, CompareDistributions) {
    const auto dir = scratch_dir();
    {
        std::ofstream(dir / "a.json") << "[0.5, 0.3, 0.2]";
        std::ofstream(dir / "b.json") << "[0.5, 0.3, 0.2]";
    }
    const auto out = dir / "cmp.json";
    EXPECT_EQ(run_cli("eval compare --a " + (dir / "a.json").string() + " --b " + (dir / "b.json").string() +
                      " --out " + out.string()),
              0);
    const auto j = read_json_file(out);
    EXPECT_EQ(j["kl_pass"], true);
    EXPECT_EQ(j["ks_pass"], true);
    fs::remove_all(dir);
}

}  // namespace
}  // namespace declab::harness
