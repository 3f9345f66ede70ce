// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: victim serve, attack run, eval compare,
// cost estimate and experiment run.

#include <csignal>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "declab/attack/attack.hpp"
#include "declab/attack/inner_source.hpp"
#include "declab/common/error.hpp"
#include "declab/harness/cost.hpp"
#include "declab/harness/experiment.hpp"
#include "declab/harness/serialization.hpp"
#include "declab/stats/stats.hpp"
#include "declab/victim/api.hpp"
#include "declab/victim/server.hpp"

namespace {

using namespace declab;
using harness::Json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitVictimFailures = 2;

victim::VictimServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

void emit(const Json& j, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << harness::dump(j);
    } else {
        harness::write_text_file(out, harness::dump(j));
    }
}

victim::VictimConfig load_victim(const std::filesystem::path& path) {
    return harness::victim_config_from_json(harness::read_json_file(path), path.parent_path());
}

bool is_url(const std::string& s) { return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0; }

int victim_serve(const std::string& config_path, const std::string& host, int port) {
    const auto config = load_victim(config_path);
    victim::Victim target(config, victim::build_model(config.model));
    victim::VictimServer server(target);
    const int bound = server.bind(host, port);
    std::cout << "listening on http://" << host << ':' << bound << std::endl;
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    server.listen();
    g_server = nullptr;
    return kExitOk;
}

struct AttackArgs {
    std::string victim;
    std::string inner = "api";
    std::string settings;
    std::string out;
};

int attack_run(const AttackArgs& args) {
    auto settings = harness::attack_settings_from_json(harness::read_json_file(args.settings));

    std::unique_ptr<victim::Victim> local;
    std::unique_ptr<victim::GenerationApi> api;
    if (is_url(args.victim)) {
        auto http = std::make_unique<victim::HttpApi>(args.victim);
        require(http->healthy(), ErrorKind::Transport, "victim at " + args.victim + " is not reachable");
        api = std::move(http);
    } else {
        const auto config = load_victim(args.victim);
        local = std::make_unique<victim::Victim>(config, victim::build_model(config.model));
        api = std::make_unique<victim::LocalApi>(*local);
    }

    std::unique_ptr<attack::InnerProbSource> inner;
    const std::string reference_prefix = "reference:";
    if (args.inner == "api") {
        inner = std::make_unique<attack::ApiLogprobsSource>(*api);
    } else if (args.inner.rfind(reference_prefix, 0) == 0) {
        const std::filesystem::path path = args.inner.substr(reference_prefix.size());
        const auto spec = harness::model_spec_from_json(harness::read_json_file(path), path.parent_path());
        inner = std::make_unique<attack::ReferenceModelSource>(victim::build_model(spec));
    } else if (args.inner != "none") {
        throw Error(ErrorKind::Config, "--inner must be api, reference:<model-config> or none");
    }

    const auto report = attack::run_full_attack(*api, settings, inner.get());
    emit(harness::to_json(report), args.out);
    for (const auto& stage : report.stages) {
        if (stage.status == "failed") return kExitVictimFailures;
    }
    return kExitOk;
}

int eval_compare(const std::string& a_path, const std::string& b_path, std::size_t samples,
                 const std::string& out) {
    const auto a = harness::distribution_from_json(harness::read_json_file(a_path));
    const auto b = harness::distribution_from_json(harness::read_json_file(b_path));
    emit(harness::to_json(stats::compare(a, b, samples)), out);
    return kExitOk;
}

struct CostArgs {
    std::uint64_t tokens = 0;
    bool tokens_given = false;
    std::string model;
    std::string settings;
};

int cost_estimate(const CostArgs& args) {
    std::vector<harness::CostModel> models;
    if (args.model.empty()) {
        models = harness::CostModel::presets();
    } else {
        models.push_back(harness::CostModel::preset(args.model));
    }
    Json j;
    auto priced = [&](std::uint64_t tokens) {
        Json prices = Json::object();
        for (const auto& m : models) prices[m.name] = harness::cost_estimate(tokens, m);
        return prices;
    };
    const auto worst = harness::worst_case_budget();
    j["worst_case"] = {{"queries", worst.queries}, {"tokens", worst.tokens}, {"usd", priced(worst.tokens)}};
    if (args.tokens_given) j["tokens"] = {{"tokens", args.tokens}, {"usd", priced(args.tokens)}};
    if (!args.settings.empty()) {
        const auto settings = harness::attack_settings_from_json(harness::read_json_file(args.settings));
        const auto plan = harness::planned_budget(settings);
        j["planned"] = {{"queries", plan.queries}, {"tokens", plan.tokens}, {"usd", priced(plan.tokens)}};
    }
    std::cout << harness::dump(j);
    return kExitOk;
}

struct ExperimentArgs {
    std::string spec;
    std::string out;
    std::string csv;
    unsigned threads = 0;
    bool threads_given = false;
};

int experiment_run(const ExperimentArgs& args) {
    const std::filesystem::path path = args.spec;
    auto spec = harness::experiment_spec_from_json(harness::read_json_file(path), path.parent_path());
    if (!args.out.empty()) spec.output = args.out;
    if (!args.csv.empty()) spec.csv = args.csv;
    if (args.threads_given) spec.threads = args.threads;

    const auto report = harness::run_experiment(spec);
    emit(harness::to_json(report), spec.output.string());
    if (!spec.csv.empty()) harness::write_text_file(spec.csv, harness::to_csv(report));

    const auto& s = report.summary;
    std::cerr << "victims " << s.total << ", correct " << s.correct << ", failures " << s.failures
              << ", accuracy " << s.accuracy << ", cost $" << s.cost_usd << ", " << report.wall_clock_seconds
              << " s\n";
    return s.failures > 0 ? kExitVictimFailures : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decoding-configuration inference toolkit"};
    app.require_subcommand(1);

    auto* victim_cmd = app.add_subcommand("victim", "Victim service");
    victim_cmd->require_subcommand(1);
    auto* serve = victim_cmd->add_subcommand("serve", "Serve a victim over HTTP");
    std::string serve_config, serve_host = "127.0.0.1";
    int serve_port = 8080;
    serve->add_option("--config", serve_config, "Victim config JSON")->required()->check(CLI::ExistingFile);
    serve->add_option("--port", serve_port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--host", serve_host, "Bind address");

    auto* attack_cmd = app.add_subcommand("attack", "Attack a victim");
    attack_cmd->require_subcommand(1);
    auto* run = attack_cmd->add_subcommand("run", "Run the staged attack");
    AttackArgs attack_args;
    run->add_option("--victim", attack_args.victim, "Victim URL or victim config JSON")->required();
    run->add_option("--inner", attack_args.inner, "api, reference:<model-config> or none");
    run->add_option("--settings", attack_args.settings, "Attack settings JSON")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--out", attack_args.out, "Report path (stdout when omitted)");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluation utilities");
    eval_cmd->require_subcommand(1);
    auto* compare = eval_cmd->add_subcommand("compare", "Compare two distributions (KS and KL)");
    std::string compare_a, compare_b, compare_out;
    std::size_t compare_samples = 1000;
    compare->add_option("--a", compare_a, "Distribution JSON")->required()->check(CLI::ExistingFile);
    compare->add_option("--b", compare_b, "Distribution JSON")->required()->check(CLI::ExistingFile);
    compare->add_option("--samples", compare_samples, "Sample size for the KS test")->check(CLI::PositiveNumber);
    compare->add_option("--out", compare_out, "Report path (stdout when omitted)");

    auto* cost_cmd = app.add_subcommand("cost", "Query cost model");
    cost_cmd->require_subcommand(1);
    auto* estimate = cost_cmd->add_subcommand("estimate", "Price a token count or a settings file");
    CostArgs cost_args;
    auto* tokens_opt = estimate->add_option("--tokens", cost_args.tokens, "Tokens processed");
    estimate->add_option("--model", cost_args.model, "ada, babbage, curie or davinci (all when omitted)");
    estimate->add_option("--settings", cost_args.settings, "Attack settings JSON for a planned budget")
        ->check(CLI::ExistingFile);

    auto* experiment_cmd = app.add_subcommand("experiment", "Experiment orchestration");
    experiment_cmd->require_subcommand(1);
    auto* exp_run = experiment_cmd->add_subcommand("run", "Run an experiment spec");
    ExperimentArgs exp_args;
    exp_run->add_option("--spec", exp_args.spec, "Experiment spec JSON")->required()->check(CLI::ExistingFile);
    exp_run->add_option("--out", exp_args.out, "Report path (overrides the spec)");
    exp_run->add_option("--csv", exp_args.csv, "CSV summary path (overrides the spec)");
    auto* threads_opt = exp_run->add_option("--threads", exp_args.threads, "Worker threads (0 = all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (serve->parsed()) return victim_serve(serve_config, serve_host, serve_port);
        if (run->parsed()) return attack_run(attack_args);
        if (compare->parsed()) return eval_compare(compare_a, compare_b, compare_samples, compare_out);
        if (estimate->parsed()) {
            cost_args.tokens_given = tokens_opt->count() > 0;
            return cost_estimate(cost_args);
        }
        if (exp_run->parsed()) {
            exp_args.threads_given = threads_opt->count() > 0;
            return experiment_run(exp_args);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::Config || e.kind() == ErrorKind::InvalidInput ? kExitConfig
                                                                                      : kExitVictimFailures;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}
