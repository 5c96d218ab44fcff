// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "actflow/binary_io.hpp"

#include <fstream>
#include <iterator>

#include "actflow/error.hpp"

namespace actflow::io {

void ByteReader::fail(std::string_view what) const {
    throw Error(ErrorKind::Format, m_source + ": " + std::string(what) + " at offset " + std::to_string(m_offset));
}

void ByteReader::need(std::size_t n, std::string_view field) {
    if (remaining() < n) {
        fail("truncated while reading " + std::string(field));
    }
}

std::uint8_t ByteReader::get_u8(std::string_view field) {
    need(1, field);
    return m_bytes[m_offset++];
}

std::uint32_t ByteReader::get_u32(std::string_view field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(m_bytes[m_offset + i]) << (8 * i);
    }
    m_offset += 4;
    return v;
}

std::uint64_t ByteReader::get_u64(std::string_view field) {
    need(8, field);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(m_bytes[m_offset + i]) << (8 * i);
    }
    m_offset += 8;
    return v;
}

std::string ByteReader::get_bytes(std::size_t n, std::string_view field) {
    need(n, field);
    std::string out(reinterpret_cast<const char*>(m_bytes.data() + m_offset), n);
    m_offset += n;
    return out;
}

void ByteReader::expect_magic(std::string_view magic) {
    if (remaining() < magic.size()) {
        fail("truncated magic");
    }
    for (std::size_t i = 0; i < magic.size(); ++i) {
        if (m_bytes[m_offset + i] != static_cast<std::uint8_t>(magic[i])) {
            m_offset += i;
            fail("bad magic (expected \"" + std::string(magic) + "\")");
        }
    }
    m_offset += magic.size();
}

void ByteReader::expect_end() {
    if (!at_end()) {
        fail(std::to_string(remaining()) + " trailing bytes");
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Format, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Format, "cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorKind::Format, "write failed for " + path.string());
    }
}

}  // namespace actflow::io
