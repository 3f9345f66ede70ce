// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "declab/victim/victim.hpp"

namespace declab::victim {

// The attacker's only view of a victim. Implementations keep a client-side
// tally of the usage reported with each response.
class GenerationApi {
public:
    virtual ~GenerationApi() = default;
    virtual GenerationResponse generate(const GenerationRequest& request) = 0;
    virtual Usage usage() const = 0;
};

// In-process client for a Victim.
class LocalApi final : public GenerationApi {
public:
    explicit LocalApi(Victim& victim) : victim_(victim) {}

    GenerationResponse generate(const GenerationRequest& request) override;
    Usage usage() const override;

private:
    Victim& victim_;
    mutable std::mutex mutex_;
    Usage usage_;
};

// Client for the HTTP service, e.g. "http://127.0.0.1:8080".
class HttpApi final : public GenerationApi {
public:
    explicit HttpApi(const std::string& base_url);
    ~HttpApi() override;

    GenerationResponse generate(const GenerationRequest& request) override;
    Usage usage() const override;
    bool healthy();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    mutable std::mutex mutex_;
    Usage usage_;
};

}  // namespace declab::victim
