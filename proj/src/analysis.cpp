// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "actflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "actflow/binary_io.hpp"
#include "actflow/error.hpp"
#include "actflow/steering.hpp"

namespace actflow {

namespace {

constexpr double kPowerTolerance = 1e-8;
constexpr int kPowerMaxIterations = 100000;

void check_lists(std::span<const Vector> positive, std::span<const Vector> negative) {
    if (positive.empty() || negative.empty()) {
        throw Error(ErrorKind::Argument, "direction needs nonempty positive and negative lists");
    }
    const std::size_t d = positive.front().size();
    for (const auto& v : positive) {
        if (v.size() != d) {
            throw Error(ErrorKind::Shape, "positive examples differ in dimension");
        }
    }
    for (const auto& v : negative) {
        if (v.size() != d) {
            throw Error(ErrorKind::Shape, "negative examples do not match the positive dimension");
        }
    }
}

Vector normalized(Vector v) {
    const double n = norm(v);
    for (auto& x : v) {
        x /= n;
    }
    return v;
}

}  // namespace

std::string_view to_string(DirectionMethod method) noexcept {
    return method == DirectionMethod::Caa ? "caa" : "repe";
}

const Vector& DirectionSet::direction(std::uint32_t layer) const {
    const auto it = directions.find(layer);
    if (it == directions.end()) {
        throw Error(ErrorKind::Argument, "no reference direction for layer " + std::to_string(layer));
    }
    return it->second;
}

Vector caa_direction(std::span<const Vector> positive, std::span<const Vector> negative) {
    check_lists(positive, negative);
    Vector diff = subtract(mean_of(positive), mean_of(negative));
    if (norm(diff) == 0.0) {
        throw Error(ErrorKind::Degenerate, "positive and negative means coincide; no direction");
    }
    return normalized(std::move(diff));
}

Vector repe_direction(std::span<const Vector> positive, std::span<const Vector> negative) {
    check_lists(positive, negative);
    if (positive.size() != negative.size() || positive.size() < 2) {
        throw Error(ErrorKind::Argument, "RepE needs at least two positive/negative pairs");
    }
    const std::size_t d = positive.front().size();
    std::vector<Vector> diffs;
    diffs.reserve(positive.size());
    for (std::size_t i = 0; i < positive.size(); ++i) {
        diffs.push_back(subtract(positive[i], negative[i]));
    }

    std::vector<double> moment(d * d, 0.0);
    for (const auto& v : diffs) {
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                moment[r * d + c] += v[r] * v[c];
            }
        }
    }
    double trace = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
        trace += moment[r * d + r];
    }
    if (trace == 0.0) {
        throw Error(ErrorKind::Degenerate, "all paired differences are zero");
    }

    // Fixed generic start vector keeps the result independent of input order.
    Rng rng(0x5245504555ULL);
    Vector x = normalized(sample_standard_gaussian(rng, d));
    bool converged = false;
    for (int it = 0; it < kPowerMaxIterations; ++it) {
        Vector y(d, 0.0);
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                y[r] += moment[r * d + c] * x[c];
            }
        }
        const double ny = norm(y);
        if (ny == 0.0) {
            throw Error(ErrorKind::Degenerate, "power iteration collapsed to zero");
        }
        for (auto& v : y) {
            v /= ny;
        }
        const double change = std::sqrt(squared_distance(x, y));
        x = std::move(y);
        if (change < kPowerTolerance) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw Error(ErrorKind::Degenerate, "power iteration did not converge; top component is not unique");
    }

    const Vector mean_diff = mean_of(diffs);
    double s = dot(x, mean_diff);
    if (std::abs(s) <= 1e-12 * norm(mean_diff)) {
        // No correlation with the mean difference: make the largest component positive.
        std::size_t arg = 0;
        for (std::size_t i = 1; i < d; ++i) {
            if (std::abs(x[i]) > std::abs(x[arg])) {
                arg = i;
            }
        }
        s = x[arg];
    }
    if (s < 0.0) {
        for (auto& v : x) {
            v = -v;
        }
    }
    return x;
}

Vector edit_delta(std::span<const double> a_edit, std::span<const double> a_src) { return subtract(a_edit, a_src); }

double alignment_score(std::span<const double> delta, std::span<const double> direction) {
    const double nd = norm(delta);
    const double nr = norm(direction);
    if (nd == 0.0 || nr == 0.0) {
        throw Error(ErrorKind::Degenerate, "cosine of a zero-norm vector");
    }
    const double c = dot(delta, direction) / (nd * nr);
    return std::clamp(c, -1.0, 1.0);
}

const ProfileRow* AlignmentProfile::row(std::uint32_t bucket) const noexcept {
    for (const auto& r : rows) {
        if (r.bucket == bucket) {
            return &r;
        }
    }
    return nullptr;
}

namespace {

using RecordEditor = std::function<Vector(const ActivationRecord&)>;

AlignmentProfile profile_edits(std::span<const ActivationRecord> records, const RecordEditor& editor,
                               const ModelConfig& bucketing, const DirectionSet& directions) {
    std::map<std::uint32_t, std::pair<double, std::uint64_t>> acc;
    AlignmentProfile profile;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        try {
            const Vector& dir = directions.direction(rec.layer);
            const Vector edited = editor(rec);
            const Vector delta = edit_delta(edited, rec.activation);
            if (norm(delta) == 0.0) {
                ++profile.skipped;
                continue;
            }
            auto& slot = acc[bucketing.position_bucket(rec.position)];
            slot.first += alignment_score(delta, dir);
            ++slot.second;
        } catch (const Error& e) {
            throw Error(e.kind(), "record " + std::to_string(i) + ": " + e.detail());
        }
    }
    for (const auto& [bucket, sum_count] : acc) {
        profile.rows.push_back({bucket, sum_count.first / static_cast<double>(sum_count.second), sum_count.second});
    }
    return profile;
}

}  // namespace

AlignmentProfile position_alignment_profile(std::span<const ActivationRecord> records, const VelocityField& field,
                                            const ModelConfig& bucketing, const EditSpec& spec,
                                            const DirectionSet& directions) {
    spec.validate();
    const RecordEditor editor = [&](const ActivationRecord& rec) {
        return edit(field, rec.activation, spec, rec.layer, rec.position);
    };
    return profile_edits(records, editor, bucketing, directions);
}

AlignmentProfile position_alignment_profile(std::span<const ActivationRecord> records, const Checkpoint& checkpoint,
                                            const EditSpec& spec, const DirectionSet& directions) {
    spec.validate();
    const RecordEditor editor = [&](const ActivationRecord& rec) {
        return edit_activation(checkpoint, rec.activation, spec, rec.layer, rec.position);
    };
    return profile_edits(records, editor, checkpoint.params.config(), directions);
}

AlignmentProfile position_alignment_profile(std::span<const ActivationRecord> records, const ModelParams& params,
                                            const EditSpec& spec, const DirectionSet& directions) {
    return position_alignment_profile(records, ModelField(params), params.config(), spec, directions);
}

std::string profile_csv(const AlignmentProfile& profile) {
    std::string out = "bucket,mean_cosine,count\n";
    char line[96];
    for (const auto& r : profile.rows) {
        std::snprintf(line, sizeof(line), "%u,%.17g,%llu\n", r.bucket, r.mean_cosine,
                      static_cast<unsigned long long>(r.count));
        out += line;
    }
    return out;
}

std::string directions_csv(const DirectionSet& directions) {
    std::string out = "method,label,layer,index,value\n";
    char line[64];
    for (const auto& [layer, v] : directions.directions) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            out += to_string(directions.method);
            out += ',';
            out += directions.label;
            std::snprintf(line, sizeof(line), ",%u,%zu,%.17g\n", layer, i, v[i]);
            out += line;
        }
    }
    return out;
}

std::vector<std::uint8_t> encode_directions(const DirectionSet& directions) {
    if (directions.directions.empty()) {
        throw Error(ErrorKind::Argument, "no directions to write");
    }
    io::ByteWriter w;
    w.put_bytes(kDirectionMagic);
    for (const auto& [layer, v] : directions.directions) {
        w.put_u32(layer);
        w.put_u32(static_cast<std::uint32_t>(v.size()));
        for (double x : v) {
            w.put_f32(static_cast<float>(x));
        }
    }
    return w.take();
}

DirectionSet decode_directions(std::span<const std::uint8_t> bytes, const std::string& source) {
    io::ByteReader r(bytes, source);
    r.expect_magic(kDirectionMagic);
    DirectionSet set;
    do {
        const std::uint32_t layer = r.get_u32("layer");
        const std::uint32_t dim = r.get_u32("dim");
        if (dim == 0 || static_cast<std::uint64_t>(dim) * 4 > r.remaining()) {
            r.fail("bad direction dimension");
        }
        Vector v(dim);
        for (auto& x : v) {
            x = static_cast<double>(r.get_f32("payload"));
        }
        if (!set.directions.emplace(layer, std::move(v)).second) {
            r.fail("duplicate layer " + std::to_string(layer));
        }
    } while (!r.at_end());
    return set;
}

void save_directions(const DirectionSet& directions, const std::filesystem::path& path) {
    io::write_file(path, encode_directions(directions));
}

DirectionSet load_directions(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return decode_directions(bytes, path.string());
}

}  // namespace actflow
