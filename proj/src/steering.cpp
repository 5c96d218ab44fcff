// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "actflow/steering.hpp"

#include <cmath>
#include <cstdio>

#include "actflow/error.hpp"

namespace actflow {

Vector to_model_space(const Checkpoint& checkpoint, std::span<const double> a, std::uint32_t layer) {
    if (checkpoint.normalization.empty()) {
        return Vector(a.begin(), a.end());
    }
    const LayerStats* stats = find_layer_stats(checkpoint.normalization, layer);
    if (stats == nullptr) {
        throw Error(ErrorKind::Argument, "checkpoint has no normalization stats for layer " + std::to_string(layer));
    }
    return standardize(a, *stats);
}

Vector from_model_space(const Checkpoint& checkpoint, std::span<const double> a, std::uint32_t layer) {
    if (checkpoint.normalization.empty()) {
        return Vector(a.begin(), a.end());
    }
    const LayerStats* stats = find_layer_stats(checkpoint.normalization, layer);
    if (stats == nullptr) {
        throw Error(ErrorKind::Argument, "checkpoint has no normalization stats for layer " + std::to_string(layer));
    }
    return destandardize(a, *stats);
}

Vector edit_activation(const Checkpoint& checkpoint, std::span<const double> a, const EditSpec& spec,
                       std::uint32_t layer, std::uint32_t position) {
    spec.validate();
    if (spec.strength == 0.0) {
        return Vector(a.begin(), a.end());
    }
    const Vector edited = edit(checkpoint.params, to_model_space(checkpoint, a, layer), spec, layer, position);
    return from_model_space(checkpoint, edited, layer);
}

std::vector<ActivationRecord> edit_records(const Checkpoint& checkpoint, std::span<const ActivationRecord> records,
                                           const EditSpec& spec) {
    std::vector<ActivationRecord> out(records.begin(), records.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& rec = out[i];
        try {
            rec.activation =
                to_storage_precision(edit_activation(checkpoint, rec.activation, spec, rec.layer, rec.position));
        } catch (const Error& e) {
            throw Error(e.kind(), "record " + std::to_string(i) + ": " + e.detail());
        }
    }
    return out;
}

std::optional<Vector> condition_centroid(std::span<const ActivationRecord> records, std::uint32_t condition_id) {
    std::vector<Vector> rows;
    for (const auto& r : records) {
        if (r.condition_id == condition_id) {
            rows.push_back(r.activation);
        }
    }
    if (rows.empty()) {
        return std::nullopt;
    }
    return mean_of(rows);
}

std::optional<SteeringMetric> parse_steering_metric(std::string_view name) {
    if (name == "target-accuracy") {
        return SteeringMetric::TargetAccuracy;
    }
    if (name == "target-distance") {
        return SteeringMetric::TargetDistance;
    }
    if (name == "edit-distance") {
        return SteeringMetric::EditDistance;
    }
    return std::nullopt;
}

std::string_view to_string(SteeringMetric metric) noexcept {
    switch (metric) {
    case SteeringMetric::TargetAccuracy: return "target-accuracy";
    case SteeringMetric::TargetDistance: return "target-distance";
    case SteeringMetric::EditDistance: return "edit-distance";
    }
    return "unknown";
}

double steering_metric(SteeringMetric metric, std::span<const ActivationRecord> sources,
                       std::span<const ActivationRecord> edits, const SteeringCentroids& centroids) {
    if (sources.size() != edits.size() || sources.empty()) {
        throw Error(ErrorKind::Argument, "steering metric needs matching, nonempty source and edit lists");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < edits.size(); ++i) {
        const auto& e = edits[i].activation;
        switch (metric) {
        case SteeringMetric::TargetAccuracy:
            acc += squared_distance(e, centroids.target) < squared_distance(e, centroids.source) ? 1.0 : 0.0;
            break;
        case SteeringMetric::TargetDistance: acc += std::sqrt(squared_distance(e, centroids.target)); break;
        case SteeringMetric::EditDistance: acc += std::sqrt(squared_distance(e, sources[i].activation)); break;
        }
    }
    return acc / static_cast<double>(edits.size());
}

std::vector<SweepRow> sweep_guidance(const Checkpoint& checkpoint, std::span<const ActivationRecord> sources,
                                     EditSpec spec, std::span<const double> grid, SteeringMetric metric,
                                     const SteeringCentroids& centroids) {
    if (grid.empty()) {
        throw Error(ErrorKind::Argument, "empty guidance grid");
    }
    std::vector<SweepRow> rows;
    for (double w : grid) {
        spec.forward.guidance_scale = w;
        const auto edited = edit_records(checkpoint, sources, spec);
        rows.push_back({w, steering_metric(metric, sources, edited, centroids)});
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows, SteeringMetric metric) {
    std::string out = "w,";
    out += to_string(metric);
    out += '\n';
    char line[80];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%.17g,%.17g\n", r.guidance, r.metric);
        out += line;
    }
    return out;
}

}  // namespace actflow
