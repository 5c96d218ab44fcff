// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "actflow/corpus.hpp"

#include <cmath>
#include <map>

#include "actflow/binary_io.hpp"
#include "actflow/error.hpp"

namespace actflow {

namespace {

struct Placeholder {
    std::size_t begin = 0;
    std::size_t end = 0;  // one past ']'
};

std::vector<Placeholder> find_placeholders(std::string_view tmpl) {
    std::vector<Placeholder> found;
    std::size_t pos = 0;
    while ((pos = tmpl.find('[', pos)) != std::string_view::npos) {
        const std::size_t close = tmpl.find(']', pos + 1);
        if (close == std::string_view::npos) {
            break;
        }
        const std::string_view inner = tmpl.substr(pos + 1, close - pos - 1);
        if (!inner.empty() && inner.find('[') == std::string_view::npos) {
            found.push_back({pos, close + 1});
        }
        pos = close + 1;
    }
    return found;
}

void put_vector_f32(io::ByteWriter& w, const Vector& v) {
    for (double x : v) {
        w.put_f32(static_cast<float>(x));
    }
}

Vector get_vector_f32(io::ByteReader& r, std::size_t n, std::string_view field) {
    Vector v(n);
    for (auto& x : v) {
        x = static_cast<double>(r.get_f32(field));
    }
    return v;
}

}  // namespace

void Corpus::validate() const {
    const auto d = header.activation_dim;
    const auto e = header.condition_dim;
    if (d == 0 || e == 0) {
        throw Error(ErrorKind::InvalidDimension, "corpus dimensions must be >= 1");
    }
    if (header.record_count != records.size() || header.condition_count != conditions.size()) {
        throw Error(ErrorKind::Shape, "corpus header counts do not match the supplied tables");
    }
    for (std::size_t i = 0; i < conditions.size(); ++i) {
        if (conditions[i].id != i) {
            throw Error(ErrorKind::Format, "condition ids must be dense 0..m-1; row " + std::to_string(i) +
                                               " has id " + std::to_string(conditions[i].id));
        }
        if (conditions[i].embedding.size() != e) {
            throw Error(ErrorKind::Shape, "condition " + std::to_string(i) + " embedding dim mismatch");
        }
    }
    for (const auto& s : header.normalization) {
        if (s.mean.size() != d || s.stddev.size() != d) {
            throw Error(ErrorKind::Shape, "normalization stats for layer " + std::to_string(s.layer) +
                                              " have the wrong dimension");
        }
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].activation.size() != d) {
            throw Error(ErrorKind::Shape, "record " + std::to_string(i) + " activation dim mismatch");
        }
        if (records[i].condition_id >= conditions.size()) {
            throw Error(ErrorKind::Argument, "record " + std::to_string(i) + " references unknown condition " +
                                                 std::to_string(records[i].condition_id));
        }
    }
}

const ConditionEntry& Corpus::condition(std::uint32_t id) const {
    if (id >= conditions.size()) {
        throw Error(ErrorKind::Argument, "unknown condition id " + std::to_string(id));
    }
    return conditions[id];
}

CorpusHeader make_header(std::uint32_t activation_dim, std::uint32_t condition_dim,
                         std::span<const ConditionEntry> conditions, std::span<const ActivationRecord> records) {
    CorpusHeader h;
    h.activation_dim = activation_dim;
    h.condition_dim = condition_dim;
    h.record_count = records.size();
    h.condition_count = static_cast<std::uint32_t>(conditions.size());
    return h;
}

std::vector<std::uint8_t> encode_corpus(const Corpus& corpus) {
    corpus.validate();
    io::ByteWriter w;
    w.put_bytes(kCorpusMagic);
    w.put_u32(corpus.header.activation_dim);
    w.put_u32(corpus.header.condition_dim);
    w.put_u64(corpus.header.record_count);
    w.put_u32(corpus.header.condition_count);
    w.put_u32(static_cast<std::uint32_t>(corpus.header.normalization.size()));
    for (const auto& s : corpus.header.normalization) {
        w.put_u32(s.layer);
        put_vector_f32(w, s.mean);
        put_vector_f32(w, s.stddev);
    }
    for (const auto& c : corpus.conditions) {
        w.put_u32(c.id);
        put_vector_f32(w, c.embedding);
        w.put_u32(static_cast<std::uint32_t>(c.text.size()));
        w.put_bytes(c.text);
    }
    for (const auto& r : corpus.records) {
        w.put_u32(r.layer);
        w.put_u32(r.position);
        w.put_u32(r.condition_id);
        put_vector_f32(w, r.activation);
    }
    return w.take();
}

Corpus decode_corpus(std::span<const std::uint8_t> bytes, const std::string& source) {
    io::ByteReader r(bytes, source);
    r.expect_magic(kCorpusMagic);
    Corpus c;
    auto& h = c.header;
    h.activation_dim = r.get_u32("activation_dim");
    h.condition_dim = r.get_u32("condition_dim");
    if (h.activation_dim == 0 || h.condition_dim == 0) {
        r.fail("zero dimension in header");
    }
    h.record_count = r.get_u64("record_count");
    h.condition_count = r.get_u32("condition_count");
    const std::uint32_t stats_count = r.get_u32("stats_count");
    const std::size_t d = h.activation_dim;
    const std::size_t e = h.condition_dim;

    if (static_cast<std::uint64_t>(stats_count) * (4 + 8 * d) > r.remaining()) {
        r.fail("truncated normalization block");
    }
    for (std::uint32_t i = 0; i < stats_count; ++i) {
        LayerStats s;
        s.layer = r.get_u32("stats.layer");
        s.mean = get_vector_f32(r, d, "stats.mean");
        s.stddev = get_vector_f32(r, d, "stats.std");
        h.normalization.push_back(std::move(s));
    }

    if (static_cast<std::uint64_t>(h.condition_count) * (8 + 4 * e) > r.remaining()) {
        r.fail("truncated condition table");
    }
    c.conditions.reserve(h.condition_count);
    for (std::uint32_t i = 0; i < h.condition_count; ++i) {
        ConditionEntry entry;
        entry.id = r.get_u32("condition.id");
        if (entry.id != i) {
            r.fail("non-dense condition id " + std::to_string(entry.id));
        }
        entry.embedding = get_vector_f32(r, e, "condition.embedding");
        const std::uint32_t len = r.get_u32("condition.text_bytes");
        entry.text = r.get_bytes(len, "condition.text");
        c.conditions.push_back(std::move(entry));
    }

    const std::uint64_t record_bytes = 12 + 4 * static_cast<std::uint64_t>(d);
    if (h.record_count > r.remaining() / record_bytes) {
        r.fail("truncated record block (header declares " + std::to_string(h.record_count) + " records)");
    }
    c.records.reserve(h.record_count);
    for (std::uint64_t i = 0; i < h.record_count; ++i) {
        ActivationRecord rec;
        rec.layer = r.get_u32("record.layer");
        rec.position = r.get_u32("record.position");
        rec.condition_id = r.get_u32("record.condition_id");
        if (rec.condition_id >= h.condition_count) {
            r.fail("record " + std::to_string(i) + " references unknown condition " + std::to_string(rec.condition_id));
        }
        rec.activation = get_vector_f32(r, d, "record.activation");
        c.records.push_back(std::move(rec));
    }
    r.expect_end();
    return c;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    io::write_file(path, encode_corpus(corpus));
}

Corpus read_corpus(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return decode_corpus(bytes, path.string());
}

std::string verbalize(std::string_view label, std::string_view tmpl) {
    const auto placeholders = find_placeholders(tmpl);
    if (placeholders.size() != 1) {
        throw Error(ErrorKind::Template, "template must contain exactly one [placeholder], found " +
                                             std::to_string(placeholders.size()) + " in \"" + std::string(tmpl) +
                                             "\"");
    }
    const auto& p = placeholders.front();
    std::string out(tmpl.substr(0, p.begin));
    out += label;
    out += tmpl.substr(p.end);
    return out;
}

std::string join_requirements(std::span<const std::string> labels) {
    if (labels.empty()) {
        throw Error(ErrorKind::Argument, "nothing to join");
    }
    if (labels.size() == 1) {
        return labels[0];
    }
    if (labels.size() == 2) {
        return labels[0] + " and " + labels[1];
    }
    std::string out;
    for (std::size_t i = 0; i + 1 < labels.size(); ++i) {
        out += labels[i];
        out += ", ";
    }
    out += "and ";
    out += labels.back();
    return out;
}

std::string verbalize(std::span<const std::string> labels, std::string_view tmpl) {
    return verbalize(join_requirements(labels), tmpl);
}

void SynthSpec::validate() const {
    if (num_conditions == 0) {
        throw Error(ErrorKind::Config, "num_conditions must be >= 1");
    }
    if (activation_dim == 0) {
        throw Error(ErrorKind::InvalidDimension, "activation_dim must be >= 1");
    }
    if (condition_dim != 0 && condition_dim < num_conditions) {
        throw Error(ErrorKind::Config, "condition_dim must be >= num_conditions for orthogonal embeddings");
    }
    if (means.size() != num_conditions) {
        throw Error(ErrorKind::Config, "expected one mean per condition");
    }
    for (const auto& m : means) {
        if (m.size() != activation_dim || !all_finite(m)) {
            throw Error(ErrorKind::Shape, "condition mean has the wrong dimension or is not finite");
        }
    }
    if (!(scale >= 0.0) || !std::isfinite(scale)) {
        throw Error(ErrorKind::Config, "scale must be finite and >= 0");
    }
    if (layers.empty() || positions_per_record == 0) {
        throw Error(ErrorKind::Config, "need at least one layer and one position");
    }
    if (!labels.empty() && labels.size() != num_conditions) {
        throw Error(ErrorKind::Config, "expected one label per condition");
    }
    if (planted) {
        if (planted->condition_id >= num_conditions || planted->offset.size() != activation_dim) {
            throw Error(ErrorKind::Config, "planted offset references an unknown condition or has the wrong dim");
        }
    }
    // Conditions must differ in distribution: distinct means, or one of them carries the planted offset.
    for (std::uint32_t a = 0; a < num_conditions; ++a) {
        for (std::uint32_t b = a + 1; b < num_conditions; ++b) {
            const bool planted_pair = planted && (planted->condition_id == a || planted->condition_id == b);
            if (means[a] == means[b] && !planted_pair) {
                throw Error(ErrorKind::Config, "conditions " + std::to_string(a) + " and " + std::to_string(b) +
                                                   " have identical means");
            }
        }
    }
}

Corpus synth_corpus(const SynthSpec& spec) {
    spec.validate();
    const std::uint32_t e = spec.condition_dim == 0 ? spec.num_conditions : spec.condition_dim;
    Rng rng(spec.seed);

    Corpus c;
    for (std::uint32_t k = 0; k < spec.num_conditions; ++k) {
        ConditionEntry entry;
        entry.id = k;
        const std::string label = spec.labels.empty() ? "c" + std::to_string(k) : spec.labels[k];
        entry.text = verbalize(label, spec.label_template);
        entry.embedding.assign(e, 0.0);
        entry.embedding[k] = 1.0;
        c.conditions.push_back(std::move(entry));
    }

    const auto P = spec.positions_per_record;
    const auto L = static_cast<std::uint32_t>(spec.layers.size());
    c.records.reserve(static_cast<std::size_t>(spec.num_conditions) * spec.records_per_condition);
    for (std::uint32_t k = 0; k < spec.num_conditions; ++k) {
        for (std::uint32_t j = 0; j < spec.records_per_condition; ++j) {
            ActivationRecord rec;
            rec.condition_id = k;
            rec.position = j % P;
            rec.layer = spec.layers[(j / P) % L];
            Vector a = spec.means[k];
            for (auto& x : a) {
                x += spec.scale * rng.normal();
            }
            if (spec.planted && spec.planted->condition_id == k && rec.position < spec.planted->start_positions) {
                axpy(1.0, spec.planted->offset, a);
            }
            rec.activation = to_storage_precision(a);
            c.records.push_back(std::move(rec));
        }
    }

    c.header = make_header(spec.activation_dim, e, c.conditions, c.records);
    if (spec.with_normalization) {
        c.header.normalization = compute_layer_stats(c.records, spec.activation_dim);
    }
    return c;
}

std::vector<LayerStats> compute_layer_stats(std::span<const ActivationRecord> records, std::uint32_t dim) {
    struct Acc {
        Vector sum, sumsq;
        std::size_t n = 0;
    };
    std::map<std::uint32_t, Acc> by_layer;
    for (const auto& r : records) {
        auto& acc = by_layer[r.layer];
        if (acc.n == 0) {
            acc.sum.assign(dim, 0.0);
            acc.sumsq.assign(dim, 0.0);
        }
        for (std::uint32_t i = 0; i < dim; ++i) {
            acc.sum[i] += r.activation[i];
            acc.sumsq[i] += r.activation[i] * r.activation[i];
        }
        ++acc.n;
    }
    std::vector<LayerStats> out;
    for (const auto& [layer, acc] : by_layer) {
        LayerStats s;
        s.layer = layer;
        s.mean.resize(dim);
        s.stddev.resize(dim);
        const double n = static_cast<double>(acc.n);
        for (std::uint32_t i = 0; i < dim; ++i) {
            const double m = acc.sum[i] / n;
            const double var = std::max(0.0, acc.sumsq[i] / n - m * m);
            s.mean[i] = m;
            s.stddev[i] = std::max(std::sqrt(var), 1e-6);
        }
        s.mean = to_storage_precision(s.mean);
        s.stddev = to_storage_precision(s.stddev);
        out.push_back(std::move(s));
    }
    return out;
}

const LayerStats* find_layer_stats(std::span<const LayerStats> stats, std::uint32_t layer) noexcept {
    for (const auto& s : stats) {
        if (s.layer == layer) {
            return &s;
        }
    }
    return nullptr;
}

Vector standardize(std::span<const double> a, const LayerStats& stats) {
    if (a.size() != stats.mean.size()) {
        throw Error(ErrorKind::Shape, "standardize: dimension mismatch");
    }
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = (a[i] - stats.mean[i]) / stats.stddev[i];
    }
    return out;
}

Vector destandardize(std::span<const double> a, const LayerStats& stats) {
    if (a.size() != stats.mean.size()) {
        throw Error(ErrorKind::Shape, "destandardize: dimension mismatch");
    }
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] * stats.stddev[i] + stats.mean[i];
    }
    return out;
}

}  // namespace actflow
