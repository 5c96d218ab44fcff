// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "actflow/corpus.hpp"
#include "actflow/numerics.hpp"

namespace actflow {

struct ModelConfig {
    std::uint32_t activation_dim = 2;
    std::uint32_t condition_dim = 2;
    std::uint32_t hidden_dim = 64;
    std::uint32_t num_blocks = 2;
    std::uint32_t time_embed_dim = 16;  // even; sin/cos pairs
    std::uint32_t max_layers = 1;
    std::uint32_t max_positions = 1;  // number of position buckets
    std::uint32_t position_bucket_width = 4;
    bool learned_null = true;

    bool operator==(const ModelConfig&) const = default;

    void validate() const;
    /// Positions past the last bucket share it.
    std::uint32_t position_bucket(std::uint32_t position) const noexcept;
};

/// A condition handed to the network: either an encoder embedding or the null condition
/// used for classifier-free guidance. Does not own the embedding.
class Condition {
public:
    Condition() = default;  // null
    static Condition null() noexcept { return Condition(); }
    static Condition of(std::span<const double> embedding) noexcept { return Condition(embedding); }
    static Condition of(const ConditionEntry& entry) noexcept { return Condition(entry.embedding); }

    bool is_null() const noexcept { return m_embedding.empty(); }
    std::span<const double> embedding() const noexcept { return m_embedding; }

private:
    explicit Condition(std::span<const double> e) : m_embedding(e) {}
    std::span<const double> m_embedding;
};

struct TensorSlot {
    std::string_view name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const noexcept { return rows * cols; }
};

/// Offsets of every tensor inside the flat parameter vector. The order of `slots()` is
/// the checkpoint order:
///   cond_w[H,e] cond_b[H] null_embed[H] (only when learned_null) time_w[H,T] time_b[H]
///   layer_embed[L,H] position_embed[P,H] in_w[H,d] in_b[H]
///   per block: mod_w[2H,H] mod_b[2H] block_w[H,H] block_b[H]
///   out_w[d,H] out_b[d]
class ParamLayout {
public:
    explicit ParamLayout(const ModelConfig& config);

    struct Block {
        TensorSlot mod_w, mod_b, block_w, block_b;
    };

    TensorSlot cond_w, cond_b, null_embed, time_w, time_b, layer_embed, position_embed, in_w, in_b, out_w, out_b;
    std::vector<Block> blocks;

    const std::vector<TensorSlot>& slots() const noexcept { return m_slots; }
    std::size_t total() const noexcept { return m_total; }

private:
    TensorSlot add(std::string_view name, std::size_t rows, std::size_t cols);

    std::vector<TensorSlot> m_slots;
    std::size_t m_total = 0;
};

/// All learnable weights of the conditional velocity network in one flat vector.
/// Gradients use the same type.
class ModelParams {
public:
    explicit ModelParams(const ModelConfig& config);

    const ModelConfig& config() const noexcept { return m_config; }
    const ParamLayout& layout() const noexcept { return m_layout; }

    std::span<double> values() noexcept { return m_values; }
    std::span<const double> values() const noexcept { return m_values; }
    std::span<double> tensor(const TensorSlot& slot) noexcept { return values().subspan(slot.offset, slot.size()); }
    std::span<const double> tensor(const TensorSlot& slot) const noexcept {
        return values().subspan(slot.offset, slot.size());
    }
    std::size_t size() const noexcept { return m_values.size(); }

    bool operator==(const ModelParams& other) const {
        return m_config == other.m_config && m_values == other.m_values;
    }

private:
    ModelConfig m_config;
    ParamLayout m_layout;
    std::vector<double> m_values;
};

/// Scaled-Gaussian weights. The output projection starts at zero, so the fresh field is v == 0,
/// and so does the condition projection: every real condition starts out indistinguishable and
/// only separates through gradients from conditioned samples.
ModelParams init_params(const ModelConfig& config, Rng& rng);

/// Sinusoidal time features [sin(w_k t)..., cos(w_k t)...] with geometric w_k in [1, 32].
Vector time_features(double t, std::uint32_t dim);

Vector velocity(const ModelParams& params, std::span<const double> a_t, double t, Condition cond,
                std::uint32_t layer, std::uint32_t position);

struct TrainingSample {
    Vector a_t;
    double t = 0.0;
    Condition cond;
    std::uint32_t layer = 0;
    std::uint32_t position = 0;
    Vector target;
};

struct LossAndGrad {
    double loss = 0.0;
    ModelParams grads;
};

/// Mean over the batch of ||v(a_t, t, cond, layer, position) - target||^2 with its exact gradient.
LossAndGrad loss_and_grad(const ModelParams& params, std::span<const TrainingSample> batch);
/// Same loss without gradients.
double loss_only(const ModelParams& params, std::span<const TrainingSample> batch);

/// Model plus the normalization it was trained under.
struct Checkpoint {
    ModelParams params;
    std::vector<LayerStats> normalization;

    bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::string_view kCheckpointMagic = "UAFM1";

// UAFM1 layout, little-endian:
//   "UAFM1" | u32 activation_dim, condition_dim, hidden_dim, num_blocks, time_embed_dim,
//   max_layers, max_positions, position_bucket_width | u8 learned_null | u64 param_count
//   | f64 params[param_count] in ParamLayout order
//   | u32 stats_count | stats_count x (u32 layer, f64 mean[d], f64 std[d])
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source = "checkpoint");
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace actflow
