// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#include "declab/victim/api.hpp"

#include <httplib.h>

#include "declab/common/error.hpp"
#include "declab/victim/server.hpp"

namespace declab::victim {

GenerationResponse LocalApi::generate(const GenerationRequest& request) {
    auto response = victim_.generate(request);
    std::lock_guard lock(mutex_);
    usage_ += response.usage;
    return response;
}

Usage LocalApi::usage() const {
    std::lock_guard lock(mutex_);
    return usage_;
}

struct HttpApi::Impl {
    explicit Impl(const std::string& url) : client(url) {
        client.set_keep_alive(true);
        client.set_tcp_nodelay(true);
        client.set_read_timeout(60, 0);
    }
    httplib::Client client;
    std::mutex mutex;
};

HttpApi::HttpApi(const std::string& base_url) : impl_(std::make_unique<Impl>(base_url)) {
    require(impl_->client.is_valid(), ErrorKind::Config, "invalid victim url " + base_url);
}

HttpApi::~HttpApi() = default;

GenerationResponse HttpApi::generate(const GenerationRequest& request) {
    httplib::Result result;
    {
        // One keep-alive connection; httplib clients are not re-entrant.
        std::lock_guard lock(impl_->mutex);
        result = impl_->client.Post("/v1/generate", request_to_json(request), "application/json");
    }
    require(static_cast<bool>(result), ErrorKind::Transport,
            "request failed: " + httplib::to_string(result.error()));
    require(result->status == 200, ErrorKind::Transport,
            "victim answered " + std::to_string(result->status) + ": " + result->body);
    auto response = response_from_json(result->body);
    std::lock_guard lock(mutex_);
    usage_ += response.usage;
    return response;
}

Usage HttpApi::usage() const {
    std::lock_guard lock(mutex_);
    return usage_;
}

bool HttpApi::healthy() {
    std::lock_guard lock(impl_->mutex);
    auto result = impl_->client.Get("/v1/health");
    return result && result->status == 200;
}

}  // namespace declab::victim
