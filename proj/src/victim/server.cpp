// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/victim/server.hpp"

#include <httplib.h>
#include <json.hpp>

#include "declab/common/error.hpp"

namespace declab::victim {

using nlohmann::json;

std::string request_to_json(const GenerationRequest& request) {
    json j{{"prompt", request.prompt}, {"max_tokens", request.max_tokens}};
    if (!request.logprobs) j["logprobs"] = false;
    return j.dump();
}

GenerationRequest request_from_json(const std::string& body) {
    try {
        const auto j = json::parse(body);
        GenerationRequest request;
        request.prompt = j.at("prompt").get<Tokens>();
        request.max_tokens = j.at("max_tokens").get<int>();
        request.logprobs = j.value("logprobs", true);
        return request;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidInput, std::string("malformed request: ") + e.what());
    }
}

std::string response_to_json(const GenerationResponse& response) {
    json j;
    j["tokens"] = response.tokens;
    if (response.inner_top) {
        json steps = json::array();
        for (const auto& step : *response.inner_top) {
            json entries = json::array();
            for (const auto& e : step) entries.push_back(json::array({e.token, e.prob}));
            steps.push_back(std::move(entries));
        }
        j["inner_top"] = std::move(steps);
    } else {
        j["inner_top"] = nullptr;
    }
    j["usage"] = {{"queries", response.usage.queries}, {"tokens", response.usage.tokens}};
    return j.dump();
}

GenerationResponse response_from_json(const std::string& body) {
    try {
        const auto j = json::parse(body);
        GenerationResponse response;
        response.tokens = j.at("tokens").get<Tokens>();
        const auto& inner = j.at("inner_top");
        if (!inner.is_null()) {
            response.inner_top.emplace();
            for (const auto& step : inner) {
                std::vector<TokenProb> entries;
                for (const auto& e : step) entries.push_back({e.at(0).get<TokenId>(), e.at(1).get<double>()});
                response.inner_top->push_back(std::move(entries));
            }
        }
        response.usage.queries = j.at("usage").at("queries").get<std::uint64_t>();
        response.usage.tokens = j.at("usage").at("tokens").get<std::uint64_t>();
        return response;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Transport, std::string("malformed response: ") + e.what());
    }
}

struct VictimServer::Impl {
    explicit Impl(Victim& v) : victim(v) {}
    Victim& victim;
    httplib::Server server;
};

VictimServer::VictimServer(Victim& victim) : impl_(std::make_unique<Impl>(victim)) {
    auto& server = impl_->server;
    // Responses are small; without this each one waits out delayed ACKs.
    server.set_tcp_nodelay(true);
    server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });
    server.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            const auto response = impl_->victim.generate(request_from_json(req.body));
            res.set_content(response_to_json(response), "application/json");
        } catch (const Error& e) {
            res.status = e.kind() == ErrorKind::InvalidInput ? 400 : 500;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });
}

VictimServer::~VictimServer() { stop(); }

int VictimServer::bind(const std::string& host, int port) {
    auto& server = impl_->server;
    if (port == 0) {
        const int bound = server.bind_to_any_port(host);
        require(bound > 0, ErrorKind::Transport, "cannot bind " + host);
        return bound;
    }
    require(server.bind_to_port(host, port), ErrorKind::Transport,
            "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void VictimServer::listen() { impl_->server.listen_after_bind(); }

void VictimServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace declab::victim
