// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actflow/corpus.hpp"
#include "actflow/flow.hpp"

namespace actflow {

enum class DirectionMethod { Caa, RepE };

std::string_view to_string(DirectionMethod method) noexcept;

/// Unit reference directions, one per layer.
struct DirectionSet {
    DirectionMethod method = DirectionMethod::Caa;
    std::string label;
    std::map<std::uint32_t, Vector> directions;

    const Vector& direction(std::uint32_t layer) const;
};

/// normalize(mean(positive) - mean(negative)).
Vector caa_direction(std::span<const Vector> positive, std::span<const Vector> negative);

/// Top principal axis of the paired differences positive[i] - negative[i] (uncentered second
/// moment, power iteration to relative tolerance 1e-8), signed to agree with the mean difference.
Vector repe_direction(std::span<const Vector> positive, std::span<const Vector> negative);

Vector edit_delta(std::span<const double> a_edit, std::span<const double> a_src);

/// Cosine similarity; zero-norm inputs are a degenerate error rather than 0.
double alignment_score(std::span<const double> delta, std::span<const double> direction);

struct ProfileRow {
    std::uint32_t bucket = 0;
    double mean_cosine = 0.0;
    std::uint64_t count = 0;
};

struct AlignmentProfile {
    std::vector<ProfileRow> rows;  // ascending bucket
    std::uint64_t skipped = 0;     // records whose edit delta was exactly zero

    const ProfileRow* row(std::uint32_t bucket) const noexcept;
};

/// Edits every record, scores the edit delta against the direction for the record's layer,
/// and averages the cosine per position bucket (bucketing from `bucketing`). Records with a zero
/// delta are skipped and counted. Aggregation runs in record order, so the result is deterministic.
AlignmentProfile position_alignment_profile(std::span<const ActivationRecord> records, const VelocityField& field,
                                            const ModelConfig& bucketing, const EditSpec& spec,
                                            const DirectionSet& directions);
AlignmentProfile position_alignment_profile(std::span<const ActivationRecord> records, const ModelParams& params,
                                            const EditSpec& spec, const DirectionSet& directions);
/// Same profile on stored activations: edits go through the checkpoint's normalization and
/// deltas are measured in activation space.
AlignmentProfile position_alignment_profile(std::span<const ActivationRecord> records, const Checkpoint& checkpoint,
                                            const EditSpec& spec, const DirectionSet& directions);

std::string profile_csv(const AlignmentProfile& profile);
std::string directions_csv(const DirectionSet& directions);

inline constexpr std::string_view kDirectionMagic = "UADR1";

// UADR1 layout: "UADR1" then one or more entries (u32 layer, u32 dim, f32 payload[dim]) to end of file.
// The method tag and label are not stored.
std::vector<std::uint8_t> encode_directions(const DirectionSet& directions);
DirectionSet decode_directions(std::span<const std::uint8_t> bytes, const std::string& source = "directions");
void save_directions(const DirectionSet& directions, const std::filesystem::path& path);
DirectionSet load_directions(const std::filesystem::path& path);

}  // namespace actflow
