// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actflow/corpus.hpp"
#include "actflow/velocity_model.hpp"

namespace actflow {

struct TrainConfig {
    std::uint32_t epochs = 10;
    std::uint32_t batch_size = 64;
    double peak_lr = 4e-5;
    /// Unset: 5% of the total step count.
    std::optional<std::uint64_t> warmup_steps;
    double p_drop = 0.1;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
    std::uint64_t resolved_warmup(std::uint64_t total_steps) const;
};

/// (1 - t) a0 + t a1
Vector interpolate(std::span<const double> a0, std::span<const double> a1, double t);
/// a1 - a0, the constant velocity of the linear path.
Vector target_velocity(std::span<const double> a0, std::span<const double> a1);

/// Linear warmup from 0 to peak_lr over the warmup steps, then cosine decay to 0 at total_steps.
double lr_at(std::uint64_t step, const TrainConfig& config, std::uint64_t total_steps);

struct AdamState {
    Vector m;
    Vector v;
    std::uint64_t step = 0;
};

/// AdamW with bias correction and decoupled weight decay: p <- p - lr * (wd * p + m_hat / (sqrt(v_hat) + eps)).
void adamw_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
                const TrainConfig& config);

struct EpochStats {
    std::uint32_t epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;  // learning rate of the epoch's last step

    bool operator==(const EpochStats&) const = default;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double final_loss = 0.0;
    std::uint64_t steps = 0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    TrainReport report;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Conditional flow-matching training. Each record in a batch gets its own prior sample a0,
/// time t ~ U(0,1), and an independent condition drop with probability p_drop. Fully
/// determined by config.seed. Activations are standardized when the corpus carries stats.
TrainResult train(const Corpus& corpus, const ModelConfig& model_config, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// "epoch,loss,lr" rows; contains no timing so reruns are byte-identical.
std::string loss_csv(const TrainReport& report);

}  // namespace actflow
