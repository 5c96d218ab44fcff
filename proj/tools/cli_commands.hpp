// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <stdexcept>

#include "CLI11.hpp"

namespace actflow::cli {

/// Bad flag values or inputs that do not fit together. Reported with exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Runner = std::function<void()>;

/// Registers every subcommand on `app`. After a successful parse, `selected` holds the body
/// of the chosen command; all flag validation has already happened at that point, and the
/// body re-checks anything that depends on input files before it writes an output.
void add_commands(CLI::App& app, Runner& selected);

}  // namespace actflow::cli
