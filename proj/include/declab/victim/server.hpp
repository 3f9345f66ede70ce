// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "declab/victim/victim.hpp"

namespace declab::victim {

// JSON wire format shared by server and client.
std::string request_to_json(const GenerationRequest& request);
GenerationRequest request_from_json(const std::string& body);
std::string response_to_json(const GenerationResponse& response);
GenerationResponse response_from_json(const std::string& body);

// HTTP front for a Victim: POST /v1/generate and GET /v1/health.
class VictimServer {
public:
    explicit VictimServer(Victim& victim);
    ~VictimServer();

    // Binds to `port` (0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    // Blocks until stop() is called.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace declab::victim
