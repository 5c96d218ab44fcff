// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actflow/numerics.hpp"

namespace actflow {

/// One residual-stream activation with the layer, token position and condition it was
/// extracted under.
struct ActivationRecord {
    std::uint32_t layer = 0;
    std::uint32_t position = 0;
    std::uint32_t condition_id = 0;
    Vector activation;

    bool operator==(const ActivationRecord&) const = default;
};

/// A natural-language condition and its precomputed encoder embedding.
struct ConditionEntry {
    std::uint32_t id = 0;
    std::string text;
    Vector embedding;

    bool operator==(const ConditionEntry&) const = default;
};

/// Per-layer standardization statistics. When a corpus carries them, activations
/// are standardized for training and de-standardized after editing.
struct LayerStats {
    std::uint32_t layer = 0;
    Vector mean;
    Vector stddev;

    bool operator==(const LayerStats&) const = default;
};

struct CorpusHeader {
    std::uint32_t activation_dim = 0;
    std::uint32_t condition_dim = 0;
    std::uint64_t record_count = 0;
    std::uint32_t condition_count = 0;
    std::vector<LayerStats> normalization;

    bool operator==(const CorpusHeader&) const = default;
};

struct Corpus {
    CorpusHeader header;
    std::vector<ConditionEntry> conditions;
    std::vector<ActivationRecord> records;

    bool operator==(const Corpus&) const = default;

    /// Checks header counts, dense condition ids, and every dimension.
    void validate() const;
    const ConditionEntry& condition(std::uint32_t id) const;
};

inline constexpr std::string_view kCorpusMagic = "UAFC1";

// UAFC1 layout, all little-endian:
//   "UAFC1" | u32 activation_dim | u32 condition_dim | u64 record_count | u32 condition_count
//   | u32 stats_count | stats_count x (u32 layer, f32 mean[d], f32 std[d])
//   | condition_count x (u32 id, f32 embedding[e], u32 text_bytes, utf8 text)
//   | record_count x (u32 layer, u32 position, u32 condition_id, f32 activation[d])
// Values are narrowed to float32 on write, so decode(encode(c)) == c holds exactly
// for corpora already at storage precision (everything read from disk or synthesized).
std::vector<std::uint8_t> encode_corpus(const Corpus& corpus);
Corpus decode_corpus(std::span<const std::uint8_t> bytes, const std::string& source = "corpus");
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_corpus(const std::filesystem::path& path);

/// Builds a corpus header whose counts match the given tables.
CorpusHeader make_header(std::uint32_t activation_dim, std::uint32_t condition_dim,
                         std::span<const ConditionEntry> conditions, std::span<const ActivationRecord> records);

/// Replaces the single bracketed placeholder (e.g. "[trait]") in `tmpl` with `label`.
std::string verbalize(std::string_view label, std::string_view tmpl);
/// Joins requirements into one English list ("a, b, and c") and verbalizes it.
std::string verbalize(std::span<const std::string> labels, std::string_view tmpl);
std::string join_requirements(std::span<const std::string> labels);

/// Offset added to one condition's activations at the first `start_positions` token
/// positions only. Used to plant a position-dependent direction.
struct PlantedOffset {
    std::uint32_t condition_id = 0;
    Vector offset;
    std::uint32_t start_positions = 4;
};

struct SynthSpec {
    std::uint32_t num_conditions = 2;
    std::uint32_t activation_dim = 2;
    /// 0 selects num_conditions. Embeddings are the first num_conditions basis vectors.
    std::uint32_t condition_dim = 0;
    std::vector<Vector> means;
    double scale = 1.0;
    std::uint32_t records_per_condition = 100;
    std::vector<std::uint32_t> layers{0};
    std::uint32_t positions_per_record = 1;
    std::uint64_t seed = 0;
    std::optional<PlantedOffset> planted;
    bool with_normalization = false;
    std::vector<std::string> labels;  // empty: "c0", "c1", ...
    std::string label_template = "Be [trait].";

    void validate() const;
};

/// Draws mean(c) + scale * N(0, I) per record. Positions cycle 0..positions_per_record-1,
/// layers advance once per position cycle. Fully determined by the seed.
Corpus synth_corpus(const SynthSpec& spec);

/// Per-layer mean and standard deviation (floored at 1e-6), rounded to storage precision.
std::vector<LayerStats> compute_layer_stats(std::span<const ActivationRecord> records, std::uint32_t dim);
const LayerStats* find_layer_stats(std::span<const LayerStats> stats, std::uint32_t layer) noexcept;
Vector standardize(std::span<const double> a, const LayerStats& stats);
Vector destandardize(std::span<const double> a, const LayerStats& stats);

}  // namespace actflow
