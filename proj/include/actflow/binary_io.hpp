// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace actflow::io {

/// Little-endian byte sink. Byte order is explicit so files are identical on any host.
class ByteWriter {
public:
    void put_u8(std::uint8_t v) { m_bytes.push_back(v); }
    void put_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            m_bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void put_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            m_bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
    void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }
    void put_bytes(std::string_view s) { m_bytes.insert(m_bytes.end(), s.begin(), s.end()); }

    const std::vector<std::uint8_t>& bytes() const noexcept { return m_bytes; }
    std::vector<std::uint8_t> take() { return std::move(m_bytes); }

private:
    std::vector<std::uint8_t> m_bytes;
};

/// Bounds-checked little-endian reader; every failure is a format error naming the offset.
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::string source) : m_bytes(bytes), m_source(std::move(source)) {}

    std::uint8_t get_u8(std::string_view field);
    std::uint32_t get_u32(std::string_view field);
    std::uint64_t get_u64(std::string_view field);
    float get_f32(std::string_view field) { return std::bit_cast<float>(get_u32(field)); }
    double get_f64(std::string_view field) { return std::bit_cast<double>(get_u64(field)); }
    std::string get_bytes(std::size_t n, std::string_view field);
    void expect_magic(std::string_view magic);
    void expect_end();

    std::size_t offset() const noexcept { return m_offset; }
    std::size_t remaining() const noexcept { return m_bytes.size() - m_offset; }
    bool at_end() const noexcept { return m_offset == m_bytes.size(); }

    [[noreturn]] void fail(std::string_view what) const;

private:
    void need(std::size_t n, std::string_view field);

    std::span<const std::uint8_t> m_bytes;
    std::string m_source;
    std::size_t m_offset = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace actflow::io
