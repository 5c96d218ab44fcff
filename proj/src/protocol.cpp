// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "actflow/protocol.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>

#include "actflow/binary_io.hpp"
#include "actflow/error.hpp"
#include "actflow/steering.hpp"

namespace actflow::protocol {

namespace {

std::vector<std::uint8_t> with_length_prefix(const io::ByteWriter& body) {
    io::ByteWriter framed;
    framed.put_u32(static_cast<std::uint32_t>(body.bytes().size()));
    auto out = framed.take();
    out.insert(out.end(), body.bytes().begin(), body.bytes().end());
    return out;
}

ErrorFrame error_frame(ErrorCode code, std::string message) { return ErrorFrame{code, std::move(message)}; }

void write_bytes(std::ostream& out, const std::vector<std::uint8_t>& bytes) {
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
}

}  // namespace

std::vector<std::uint8_t> encode(const ActivationFrame& frame) {
    io::ByteWriter body;
    body.put_u8(static_cast<std::uint8_t>(frame.type));
    body.put_u32(frame.layer);
    body.put_u32(frame.position);
    body.put_u32(static_cast<std::uint32_t>(frame.payload.size()));
    for (float x : frame.payload) {
        body.put_f32(x);
    }
    return with_length_prefix(body);
}

std::vector<std::uint8_t> encode(const ErrorFrame& frame) {
    io::ByteWriter body;
    body.put_u8(static_cast<std::uint8_t>(FrameType::Error));
    body.put_u32(static_cast<std::uint32_t>(frame.code));
    body.put_u32(static_cast<std::uint32_t>(frame.message.size()));
    body.put_bytes(frame.message);
    return with_length_prefix(body);
}

Frame decode_body(std::span<const std::uint8_t> body) {
    if (body.empty()) {
        return error_frame(ErrorCode::Length, "empty frame");
    }
    io::ByteReader r(body, "frame");
    const std::uint8_t type = r.get_u8("type");
    if (type == static_cast<std::uint8_t>(FrameType::Error)) {
        if (r.remaining() < 8) {
            return error_frame(ErrorCode::Length, "error frame too short");
        }
        ErrorFrame e;
        e.code = static_cast<ErrorCode>(r.get_u32("code"));
        const std::uint32_t len = r.get_u32("message_bytes");
        if (len != r.remaining()) {
            return error_frame(ErrorCode::Length, "error message length mismatch");
        }
        e.message = r.get_bytes(len, "message");
        return e;
    }
    if (type != static_cast<std::uint8_t>(FrameType::EditRequest) &&
        type != static_cast<std::uint8_t>(FrameType::EditResponse)) {
        return error_frame(ErrorCode::Type, "unknown message type " + std::to_string(type));
    }
    if (r.remaining() < 12) {
        return error_frame(ErrorCode::Length, "activation frame header too short");
    }
    ActivationFrame f;
    f.type = static_cast<FrameType>(type);
    f.layer = r.get_u32("layer");
    f.position = r.get_u32("position");
    const std::uint32_t dim = r.get_u32("dim");
    if (dim == 0) {
        return error_frame(ErrorCode::Dim, "zero-length payload");
    }
    if (static_cast<std::uint64_t>(dim) * 4 != r.remaining()) {
        return error_frame(ErrorCode::Length, "declared dim " + std::to_string(dim) + " does not match frame length");
    }
    f.payload.resize(dim);
    for (auto& x : f.payload) {
        x = r.get_f32("payload");
    }
    return f;
}

std::optional<std::vector<std::uint8_t>> read_body(std::istream& in, bool& oversized) {
    oversized = false;
    std::array<char, 4> len_bytes{};
    in.read(len_bytes.data(), 4);
    if (in.gcount() == 0 && in.eof()) {
        return std::nullopt;
    }
    if (in.gcount() != 4) {
        throw Error(ErrorKind::Format, "stream ended inside a frame length");
    }
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) {
        len |= static_cast<std::uint32_t>(static_cast<unsigned char>(len_bytes[i])) << (8 * i);
    }
    if (len > kMaxFrameBytes) {
        oversized = true;
        std::array<char, 65536> sink{};
        std::uint64_t left = len;
        while (left > 0) {
            const auto chunk = static_cast<std::streamsize>(std::min<std::uint64_t>(left, sink.size()));
            in.read(sink.data(), chunk);
            if (in.gcount() != chunk) {
                throw Error(ErrorKind::Format, "stream ended inside an oversized frame");
            }
            left -= static_cast<std::uint64_t>(chunk);
        }
        return std::vector<std::uint8_t>{};
    }
    std::vector<std::uint8_t> body(len);
    in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(len));
    if (static_cast<std::uint32_t>(in.gcount()) != len) {
        throw Error(ErrorKind::Format, "stream ended inside a frame body");
    }
    return body;
}

std::vector<Frame> read_all(std::istream& in) {
    std::vector<Frame> frames;
    bool oversized = false;
    while (auto body = read_body(in, oversized)) {
        frames.push_back(oversized ? Frame(error_frame(ErrorCode::Length, "frame exceeds size limit"))
                                   : decode_body(*body));
    }
    return frames;
}

ServeStats serve_edits(std::istream& in, std::ostream& out, const Checkpoint& checkpoint, const EditSpec& spec) {
    spec.validate();
    const auto& config = checkpoint.params.config();
    ServeStats stats;
    bool oversized = false;
    while (auto body = read_body(in, oversized)) {
        ++stats.requests;
        auto reply_error = [&](ErrorCode code, std::string message) {
            ++stats.errors;
            write_bytes(out, encode(error_frame(code, std::move(message))));
        };
        if (oversized) {
            reply_error(ErrorCode::Length, "frame exceeds size limit");
            continue;
        }
        Frame frame = decode_body(*body);
        if (auto* err = std::get_if<ErrorFrame>(&frame)) {
            reply_error(err->code, err->message);
            continue;
        }
        auto& request = std::get<ActivationFrame>(frame);
        if (request.type != FrameType::EditRequest) {
            reply_error(ErrorCode::Type, "expected an edit request");
            continue;
        }
        if (request.payload.size() != config.activation_dim) {
            reply_error(ErrorCode::Dim, "payload dim " + std::to_string(request.payload.size()) + ", model expects " +
                                            std::to_string(config.activation_dim));
            continue;
        }
        if (request.layer >= config.max_layers) {
            reply_error(ErrorCode::Layer, "layer " + std::to_string(request.layer) + " out of range");
            continue;
        }
        Vector a(request.payload.begin(), request.payload.end());
        if (!all_finite(a)) {
            reply_error(ErrorCode::Numeric, "non-finite payload");
            continue;
        }
        try {
            const Vector edited = edit_activation(checkpoint, a, spec, request.layer, request.position);
            ActivationFrame response{FrameType::EditResponse, request.layer, request.position, {}};
            response.payload.reserve(edited.size());
            for (double x : edited) {
                response.payload.push_back(static_cast<float>(x));
            }
            write_bytes(out, encode(response));
        } catch (const Error& e) {
            reply_error(ErrorCode::Numeric, e.detail());
        }
    }
    return stats;
}

}  // namespace actflow::protocol
