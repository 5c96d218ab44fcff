// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actflow/corpus.hpp"
#include "actflow/flow.hpp"

namespace actflow {

// Batch editing on stored activations. These apply the checkpoint's per-layer
// normalization around the edit; strength 0 returns inputs untouched.

Vector to_model_space(const Checkpoint& checkpoint, std::span<const double> a, std::uint32_t layer);
Vector from_model_space(const Checkpoint& checkpoint, std::span<const double> a, std::uint32_t layer);

Vector edit_activation(const Checkpoint& checkpoint, std::span<const double> a, const EditSpec& spec,
                       std::uint32_t layer, std::uint32_t position);

/// Edits every record; activations are rounded to storage precision so the result can be written as UAFC1.
std::vector<ActivationRecord> edit_records(const Checkpoint& checkpoint, std::span<const ActivationRecord> records,
                                           const EditSpec& spec);

/// Mean activation of the records carrying `condition_id`; nullopt if there are none.
std::optional<Vector> condition_centroid(std::span<const ActivationRecord> records, std::uint32_t condition_id);

enum class SteeringMetric {
    TargetAccuracy,  // fraction of edits closer to the target centroid than to the source centroid
    TargetDistance,  // mean L2 distance from edits to the target centroid
    EditDistance,    // mean ||a_edit - a_src||
};

std::optional<SteeringMetric> parse_steering_metric(std::string_view name);
std::string_view to_string(SteeringMetric metric) noexcept;

struct SteeringCentroids {
    Vector source;
    Vector target;
};

double steering_metric(SteeringMetric metric, std::span<const ActivationRecord> sources,
                       std::span<const ActivationRecord> edits, const SteeringCentroids& centroids);

struct SweepRow {
    double guidance = 0.0;
    double metric = 0.0;
};

/// Edits `sources` once per guidance value (spec.forward.guidance_scale) and scores each run.
std::vector<SweepRow> sweep_guidance(const Checkpoint& checkpoint, std::span<const ActivationRecord> sources,
                                     EditSpec spec, std::span<const double> grid, SteeringMetric metric,
                                     const SteeringCentroids& centroids);

std::string sweep_csv(std::span<const SweepRow> rows, SteeringMetric metric);

}  // namespace actflow
