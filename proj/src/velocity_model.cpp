// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "actflow/velocity_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "actflow/binary_io.hpp"
#include "actflow/error.hpp"

namespace actflow {

namespace {

constexpr double kNormEps = 1e-6;
constexpr double kMaxTimeFrequency = 32.0;

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }
double silu(double x) noexcept { return x * sigmoid(x); }
double silu_grad(double x) noexcept {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

// y += W x, W row-major [rows, cols].
void matvec_acc(std::span<const double> w, std::span<const double> x, std::span<double> y) {
    const std::size_t cols = x.size();
    for (std::size_t r = 0; r < y.size(); ++r) {
        const double* row = w.data() + r * cols;
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            s += row[c] * x[c];
        }
        y[r] += s;
    }
}

// x_grad += W^T g
void matvec_t_acc(std::span<const double> w, std::span<const double> g, std::span<double> x_grad) {
    const std::size_t cols = x_grad.size();
    for (std::size_t r = 0; r < g.size(); ++r) {
        const double* row = w.data() + r * cols;
        const double gr = g[r];
        if (gr == 0.0) {
            continue;
        }
        for (std::size_t c = 0; c < cols; ++c) {
            x_grad[c] += row[c] * gr;
        }
    }
}

// W_grad += scale * g x^T
void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> w_grad) {
    const std::size_t cols = x.size();
    for (std::size_t r = 0; r < g.size(); ++r) {
        double* row = w_grad.data() + r * cols;
        const double gr = g[r];
        if (gr == 0.0) {
            continue;
        }
        for (std::size_t c = 0; c < cols; ++c) {
            row[c] += gr * x[c];
        }
    }
}

void add_to(std::span<const double> src, std::span<double> dst) {
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] += src[i];
    }
}

// Intermediates of one forward pass, reused across samples.
struct Workspace {
    explicit Workspace(const ModelConfig& c) {
        const std::size_t H = c.hidden_dim;
        phi.resize(c.time_embed_dim);
        cond_pre.resize(H);
        cond_act.resize(H);
        h.assign(c.num_blocks + 1, Vector(H));
        normed.assign(c.num_blocks, Vector(H));
        inv_std.assign(c.num_blocks, 0.0);
        mod.assign(c.num_blocks, Vector(2 * H));
        pre_act.assign(c.num_blocks, Vector(H));
        act.assign(c.num_blocks, Vector(H));
        out.resize(c.activation_dim);
        g_h.resize(H);
        g_u.resize(H);
        g_m.resize(H);
        g_n.resize(H);
        g_mod.resize(2 * H);
        g_s.resize(H);
    }

    Vector phi, cond_pre, cond_act;
    std::vector<Vector> h, normed, mod, pre_act, act;
    std::vector<double> inv_std;
    Vector out;
    // backward scratch
    Vector g_h, g_u, g_m, g_n, g_mod, g_s;
};

void check_inputs(const ModelConfig& c, std::span<const double> a_t, Condition cond, std::uint32_t layer) {
    if (a_t.size() != c.activation_dim) {
        throw Error(ErrorKind::Shape, "activation has dim " + std::to_string(a_t.size()) + ", model expects " +
                                          std::to_string(c.activation_dim));
    }
    if (!cond.is_null() && cond.embedding().size() != c.condition_dim) {
        throw Error(ErrorKind::Shape, "condition embedding has dim " + std::to_string(cond.embedding().size()) +
                                          ", model expects " + std::to_string(c.condition_dim));
    }
    if (layer >= c.max_layers) {
        throw Error(ErrorKind::Argument,
                    "layer " + std::to_string(layer) + " out of range (max_layers " + std::to_string(c.max_layers) + ")");
    }
}

void forward(const ModelParams& p, std::span<const double> a_t, double t, Condition cond, std::uint32_t layer,
             std::uint32_t position, Workspace& ws) {
    const auto& c = p.config();
    const auto& L = p.layout();
    const std::size_t H = c.hidden_dim;

    // Conditioning vector: projected condition + time + layer + position embeddings.
    std::fill(ws.cond_pre.begin(), ws.cond_pre.end(), 0.0);
    if (!cond.is_null()) {
        matvec_acc(p.tensor(L.cond_w), cond.embedding(), ws.cond_pre);
        add_to(p.tensor(L.cond_b), ws.cond_pre);
    } else if (c.learned_null) {
        add_to(p.tensor(L.null_embed), ws.cond_pre);
    }
    ws.phi = time_features(t, c.time_embed_dim);
    matvec_acc(p.tensor(L.time_w), ws.phi, ws.cond_pre);
    add_to(p.tensor(L.time_b), ws.cond_pre);
    add_to(p.tensor(L.layer_embed).subspan(layer * H, H), ws.cond_pre);
    add_to(p.tensor(L.position_embed).subspan(c.position_bucket(position) * H, H), ws.cond_pre);
    for (std::size_t i = 0; i < H; ++i) {
        ws.cond_act[i] = silu(ws.cond_pre[i]);
    }

    // Trunk.
    auto& h0 = ws.h[0];
    std::copy(p.tensor(L.in_b).begin(), p.tensor(L.in_b).end(), h0.begin());
    matvec_acc(p.tensor(L.in_w), a_t, h0);

    for (std::size_t k = 0; k < c.num_blocks; ++k) {
        const auto& blk = L.blocks[k];
        const auto& hk = ws.h[k];
        auto& n = ws.normed[k];

        double mean = 0.0;
        for (double x : hk) {
            mean += x;
        }
        mean /= static_cast<double>(H);
        double var = 0.0;
        for (double x : hk) {
            var += (x - mean) * (x - mean);
        }
        var /= static_cast<double>(H);
        const double inv_std = 1.0 / std::sqrt(var + kNormEps);
        ws.inv_std[k] = inv_std;
        for (std::size_t i = 0; i < H; ++i) {
            n[i] = (hk[i] - mean) * inv_std;
        }

        auto& mod = ws.mod[k];
        std::copy(p.tensor(blk.mod_b).begin(), p.tensor(blk.mod_b).end(), mod.begin());
        matvec_acc(p.tensor(blk.mod_w), ws.cond_act, mod);

        auto& m = ws.pre_act[k];
        auto& u = ws.act[k];
        for (std::size_t i = 0; i < H; ++i) {
            m[i] = n[i] * (1.0 + mod[i]) + mod[H + i];
            u[i] = silu(m[i]);
        }

        auto& next = ws.h[k + 1];
        for (std::size_t i = 0; i < H; ++i) {
            next[i] = hk[i] + p.tensor(blk.block_b)[i];
        }
        matvec_acc(p.tensor(blk.block_w), u, next);
    }

    std::copy(p.tensor(L.out_b).begin(), p.tensor(L.out_b).end(), ws.out.begin());
    matvec_acc(p.tensor(L.out_w), ws.h[c.num_blocks], ws.out);
}

// Accumulates d(loss)/d(params) given d(loss)/d(out) = g_out, using the cache in ws.
void backward(const ModelParams& p, std::span<const double> a_t, Condition cond, std::uint32_t layer,
              std::uint32_t position, std::span<const double> g_out, Workspace& ws, ModelParams& grads) {
    const auto& c = p.config();
    const auto& L = p.layout();
    const std::size_t H = c.hidden_dim;

    outer_acc(g_out, ws.h[c.num_blocks], grads.tensor(L.out_w));
    add_to(g_out, grads.tensor(L.out_b));
    auto& g_h = ws.g_h;
    std::fill(g_h.begin(), g_h.end(), 0.0);
    matvec_t_acc(p.tensor(L.out_w), g_out, g_h);

    auto& g_s = ws.g_s;
    std::fill(g_s.begin(), g_s.end(), 0.0);

    for (std::size_t kk = c.num_blocks; kk-- > 0;) {
        const auto& blk = L.blocks[kk];
        const auto& n = ws.normed[kk];
        const auto& mod = ws.mod[kk];
        const auto& m = ws.pre_act[kk];
        const auto& u = ws.act[kk];

        // h_{k+1} = h_k + W u + b
        outer_acc(g_h, u, grads.tensor(blk.block_w));
        add_to(g_h, grads.tensor(blk.block_b));
        std::fill(ws.g_u.begin(), ws.g_u.end(), 0.0);
        matvec_t_acc(p.tensor(blk.block_w), g_h, ws.g_u);

        for (std::size_t i = 0; i < H; ++i) {
            ws.g_m[i] = ws.g_u[i] * silu_grad(m[i]);
            ws.g_n[i] = ws.g_m[i] * (1.0 + mod[i]);
            ws.g_mod[i] = ws.g_m[i] * n[i];
            ws.g_mod[H + i] = ws.g_m[i];
        }
        outer_acc(ws.g_mod, ws.cond_act, grads.tensor(blk.mod_w));
        add_to(ws.g_mod, grads.tensor(blk.mod_b));
        matvec_t_acc(p.tensor(blk.mod_w), ws.g_mod, g_s);

        // Layer norm without affine parameters.
        double mean_g = 0.0;
        double mean_gn = 0.0;
        for (std::size_t i = 0; i < H; ++i) {
            mean_g += ws.g_n[i];
            mean_gn += ws.g_n[i] * n[i];
        }
        mean_g /= static_cast<double>(H);
        mean_gn /= static_cast<double>(H);
        const double inv_std = ws.inv_std[kk];
        for (std::size_t i = 0; i < H; ++i) {
            g_h[i] += inv_std * (ws.g_n[i] - mean_g - n[i] * mean_gn);
        }
    }

    outer_acc(g_h, a_t, grads.tensor(L.in_w));
    add_to(g_h, grads.tensor(L.in_b));

    auto& g_c = ws.g_u;  // reuse scratch
    for (std::size_t i = 0; i < H; ++i) {
        g_c[i] = g_s[i] * silu_grad(ws.cond_pre[i]);
    }
    if (!cond.is_null()) {
        outer_acc(g_c, cond.embedding(), grads.tensor(L.cond_w));
        add_to(g_c, grads.tensor(L.cond_b));
    } else if (c.learned_null) {
        add_to(g_c, grads.tensor(L.null_embed));
    }
    outer_acc(g_c, ws.phi, grads.tensor(L.time_w));
    add_to(g_c, grads.tensor(L.time_b));
    add_to(g_c, grads.tensor(L.layer_embed).subspan(layer * H, H));
    add_to(g_c, grads.tensor(L.position_embed).subspan(c.position_bucket(position) * H, H));
}

}  // namespace

void ModelConfig::validate() const {
    if (activation_dim == 0 || condition_dim == 0 || hidden_dim == 0 || num_blocks == 0 || max_layers == 0 ||
        max_positions == 0 || position_bucket_width == 0) {
        throw Error(ErrorKind::Config, "model dimensions, block count, layer and position counts must be >= 1");
    }
    if (time_embed_dim == 0 || time_embed_dim % 2 != 0) {
        throw Error(ErrorKind::Config, "time_embed_dim must be a positive even number");
    }
}

std::uint32_t ModelConfig::position_bucket(std::uint32_t position) const noexcept {
    return std::min(position / position_bucket_width, max_positions - 1);
}

ParamLayout::ParamLayout(const ModelConfig& c) {
    const std::size_t H = c.hidden_dim;
    cond_w = add("cond_w", H, c.condition_dim);
    cond_b = add("cond_b", H, 1);
    null_embed = add("null_embed", c.learned_null ? H : 0, 1);
    time_w = add("time_w", H, c.time_embed_dim);
    time_b = add("time_b", H, 1);
    layer_embed = add("layer_embed", c.max_layers, H);
    position_embed = add("position_embed", c.max_positions, H);
    in_w = add("in_w", H, c.activation_dim);
    in_b = add("in_b", H, 1);
    for (std::uint32_t k = 0; k < c.num_blocks; ++k) {
        Block b;
        b.mod_w = add("mod_w", 2 * H, H);
        b.mod_b = add("mod_b", 2 * H, 1);
        b.block_w = add("block_w", H, H);
        b.block_b = add("block_b", H, 1);
        blocks.push_back(b);
    }
    out_w = add("out_w", c.activation_dim, H);
    out_b = add("out_b", c.activation_dim, 1);
}

TensorSlot ParamLayout::add(std::string_view name, std::size_t rows, std::size_t cols) {
    TensorSlot slot{name, m_total, rows, cols};
    m_total += slot.size();
    m_slots.push_back(slot);
    return slot;
}

ModelParams::ModelParams(const ModelConfig& config)
    : m_config((config.validate(), config)), m_layout(config), m_values(m_layout.total(), 0.0) {}

ModelParams init_params(const ModelConfig& config, Rng& rng) {
    ModelParams p(config);
    const auto& L = p.layout();
    auto fill_gaussian = [&](const TensorSlot& slot, double stddev) {
        for (auto& x : p.tensor(slot)) {
            x = stddev * rng.normal();
        }
    };
    const double H = config.hidden_dim;
    fill_gaussian(L.null_embed, 1.0);
    fill_gaussian(L.time_w, 1.0 / std::sqrt(static_cast<double>(config.time_embed_dim)));
    fill_gaussian(L.layer_embed, 0.1);
    fill_gaussian(L.position_embed, 0.1);
    fill_gaussian(L.in_w, 1.0 / std::sqrt(static_cast<double>(config.activation_dim)));
    for (const auto& b : L.blocks) {
        fill_gaussian(b.mod_w, 0.5 / std::sqrt(H));
        fill_gaussian(b.block_w, 1.0 / std::sqrt(H));
    }
    // cond_w, out_w, out_b and all biases stay zero.
    return p;
}

Vector time_features(double t, std::uint32_t dim) {
    const std::uint32_t half = dim / 2;
    Vector phi(dim);
    for (std::uint32_t k = 0; k < half; ++k) {
        const double freq =
            half > 1 ? std::exp(std::log(kMaxTimeFrequency) * static_cast<double>(k) / (half - 1)) : 1.0;
        phi[k] = std::sin(freq * t);
        phi[half + k] = std::cos(freq * t);
    }
    return phi;
}

Vector velocity(const ModelParams& params, std::span<const double> a_t, double t, Condition cond,
                std::uint32_t layer, std::uint32_t position) {
    check_inputs(params.config(), a_t, cond, layer);
    Workspace ws(params.config());
    forward(params, a_t, t, cond, layer, position, ws);
    return ws.out;
}

LossAndGrad loss_and_grad(const ModelParams& params, std::span<const TrainingSample> batch) {
    if (batch.empty()) {
        throw Error(ErrorKind::Argument, "loss_and_grad requires a nonempty batch");
    }
    const auto& c = params.config();
    Workspace ws(c);
    LossAndGrad result{0.0, ModelParams(c)};
    Vector g_out(c.activation_dim);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& s = batch[b];
        check_inputs(c, s.a_t, s.cond, s.layer);
        if (s.target.size() != c.activation_dim) {
            throw Error(ErrorKind::Shape, "target dim mismatch at batch index " + std::to_string(b));
        }
        forward(params, s.a_t, s.t, s.cond, s.layer, s.position, ws);
        double sq = 0.0;
        for (std::size_t i = 0; i < c.activation_dim; ++i) {
            const double r = ws.out[i] - s.target[i];
            sq += r * r;
            g_out[i] = 2.0 * r * inv_n;
        }
        if (!std::isfinite(sq)) {
            throw Error(ErrorKind::Numeric, "non-finite loss at batch index " + std::to_string(b));
        }
        result.loss += sq * inv_n;
        backward(params, s.a_t, s.cond, s.layer, s.position, g_out, ws, result.grads);
    }
    return result;
}

double loss_only(const ModelParams& params, std::span<const TrainingSample> batch) {
    if (batch.empty()) {
        throw Error(ErrorKind::Argument, "loss requires a nonempty batch");
    }
    const auto& c = params.config();
    Workspace ws(c);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& s = batch[b];
        check_inputs(c, s.a_t, s.cond, s.layer);
        forward(params, s.a_t, s.t, s.cond, s.layer, s.position, ws);
        loss += squared_distance(ws.out, s.target);
    }
    return loss / static_cast<double>(batch.size());
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint) {
    const auto& c = checkpoint.params.config();
    io::ByteWriter w;
    w.put_bytes(kCheckpointMagic);
    for (std::uint32_t v : {c.activation_dim, c.condition_dim, c.hidden_dim, c.num_blocks, c.time_embed_dim,
                            c.max_layers, c.max_positions, c.position_bucket_width}) {
        w.put_u32(v);
    }
    w.put_u8(c.learned_null ? 1 : 0);
    w.put_u64(checkpoint.params.size());
    for (double x : checkpoint.params.values()) {
        w.put_f64(x);
    }
    w.put_u32(static_cast<std::uint32_t>(checkpoint.normalization.size()));
    for (const auto& s : checkpoint.normalization) {
        if (s.mean.size() != c.activation_dim || s.stddev.size() != c.activation_dim) {
            throw Error(ErrorKind::Shape, "checkpoint normalization stats have the wrong dimension");
        }
        w.put_u32(s.layer);
        for (double x : s.mean) {
            w.put_f64(x);
        }
        for (double x : s.stddev) {
            w.put_f64(x);
        }
    }
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source) {
    io::ByteReader r(bytes, source);
    r.expect_magic(kCheckpointMagic);
    ModelConfig c;
    c.activation_dim = r.get_u32("activation_dim");
    c.condition_dim = r.get_u32("condition_dim");
    c.hidden_dim = r.get_u32("hidden_dim");
    c.num_blocks = r.get_u32("num_blocks");
    c.time_embed_dim = r.get_u32("time_embed_dim");
    c.max_layers = r.get_u32("max_layers");
    c.max_positions = r.get_u32("max_positions");
    c.position_bucket_width = r.get_u32("position_bucket_width");
    const std::uint8_t null_flag = r.get_u8("learned_null");
    if (null_flag > 1) {
        r.fail("invalid learned_null flag");
    }
    c.learned_null = null_flag == 1;
    try {
        c.validate();
    } catch (const Error& e) {
        r.fail(std::string("invalid model config (") + e.what() + ")");
    }
    // Guard against absurd sizes before allocating.
    const std::uint64_t count = r.get_u64("param_count");
    if (count > r.remaining() / 8) {
        r.fail("truncated parameter block");
    }
    Checkpoint ck{ModelParams(c), {}};
    if (count != ck.params.size()) {
        r.fail("parameter count " + std::to_string(count) + " does not match config (" +
               std::to_string(ck.params.size()) + ")");
    }
    for (auto& x : ck.params.values()) {
        x = r.get_f64("param");
    }
    const std::uint32_t stats_count = r.get_u32("stats_count");
    for (std::uint32_t i = 0; i < stats_count; ++i) {
        LayerStats s;
        s.layer = r.get_u32("stats.layer");
        s.mean.resize(c.activation_dim);
        s.stddev.resize(c.activation_dim);
        for (auto& x : s.mean) {
            x = r.get_f64("stats.mean");
        }
        for (auto& x : s.stddev) {
            x = r.get_f64("stats.std");
        }
        ck.normalization.push_back(std::move(s));
    }
    r.expect_end();
    return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    io::write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return decode_checkpoint(bytes, path.string());
}

}  // namespace actflow
