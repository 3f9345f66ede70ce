// Copyright (C) 2026 The declab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace declab {

enum class ErrorKind {
    InvalidInput,
    SupportMismatch,
    Unsupported,
    EstimationFailed,
    NeedsNewPrompts,
    Training,
    Undefined,
    Config,
    Transport,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message),
          kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::SupportMismatch: return "support mismatch";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::EstimationFailed: return "estimation failed";
    case ErrorKind::NeedsNewPrompts: return "needs new prompts";
    case ErrorKind::Training: return "training error";
    case ErrorKind::Undefined: return "undefined";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Transport: return "transport error";
    }
    return "error";
}

// Throws Error{kind, message} unless `condition` holds. The literal overload
// keeps hot-path checks free of string construction.
inline void require(bool condition, ErrorKind kind, const char* message) {
    if (!condition) throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) throw Error(kind, message);
}

}  // namespace declab
