// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "actflow/error.hpp"

namespace actflow {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidDimension: return "invalid-dimension";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Format: return "format";
    case ErrorKind::Config: return "config";
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Template: return "template";
    }
    return "unknown";
}

}  // namespace actflow
