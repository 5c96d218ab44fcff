// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace actflow {

enum class ErrorKind {
    InvalidDimension,
    Shape,
    Numeric,
    Format,
    Config,
    Argument,
    Degenerate,
    Template,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Single exception type for the library; `kind()` distinguishes the failure class
// so callers (the CLI in particular) can map it to exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), m_kind(kind), m_detail(message) {}

    ErrorKind kind() const noexcept { return m_kind; }
    /// The message without the kind prefix.
    const std::string& detail() const noexcept { return m_detail; }

private:
    ErrorKind m_kind;
    std::string m_detail;
};

}  // namespace actflow
