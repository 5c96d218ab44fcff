// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "actflow/flow.hpp"

namespace actflow::protocol {

// Every frame: u32 length (bytes after this field) | u8 type | body, little-endian.
//   type 1 edit request, type 2 edit response:
//       u32 layer | u32 position | u32 dim | f32 payload[dim]
//   type 255 error:
//       u32 code | u32 message_bytes | utf8 message
enum class FrameType : std::uint8_t {
    EditRequest = 1,
    EditResponse = 2,
    Error = 255,
};

enum class ErrorCode : std::uint32_t {
    Dim = 1,      // zero-length payload or dimension mismatch with the model
    Type = 2,     // unexpected message type
    Length = 3,   // frame length inconsistent with its header or above the limit
    Layer = 4,    // layer outside the model's range
    Numeric = 5,  // non-finite payload or solver failure
};

inline constexpr std::uint32_t kMaxFrameBytes = 1u << 28;

struct ActivationFrame {
    FrameType type = FrameType::EditRequest;
    std::uint32_t layer = 0;
    std::uint32_t position = 0;
    std::vector<float> payload;

    bool operator==(const ActivationFrame&) const = default;
};

struct ErrorFrame {
    ErrorCode code = ErrorCode::Dim;
    std::string message;

    bool operator==(const ErrorFrame&) const = default;
};

using Frame = std::variant<ActivationFrame, ErrorFrame>;

std::vector<std::uint8_t> encode(const ActivationFrame& frame);
std::vector<std::uint8_t> encode(const ErrorFrame& frame);

/// Decodes one frame body (everything after the length field). Malformed bodies come back as
/// an ErrorFrame describing the problem instead of throwing.
Frame decode_body(std::span<const std::uint8_t> body);

/// Reads the next frame body. Returns nullopt on clean EOF at a frame boundary; throws a
/// format error on EOF inside a frame. Bodies above kMaxFrameBytes are skipped and reported
/// through `oversized`.
std::optional<std::vector<std::uint8_t>> read_body(std::istream& in, bool& oversized);

/// Reads and decodes every frame until EOF.
std::vector<Frame> read_all(std::istream& in);

struct ServeStats {
    std::uint64_t requests = 0;
    std::uint64_t errors = 0;
};

/// Request/response loop: each request frame produces exactly one response or error frame,
/// written and flushed in order. Nothing is retained between frames.
ServeStats serve_edits(std::istream& in, std::ostream& out, const Checkpoint& checkpoint, const EditSpec& spec);

}  // namespace actflow::protocol
