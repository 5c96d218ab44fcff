// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "actflow/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "actflow/error.hpp"

namespace actflow {

namespace {

constexpr std::uint64_t kOrderStream = 1;
constexpr std::uint64_t kSampleStreamBase = 0x100000000ULL;

}  // namespace

void TrainConfig::validate() const {
    if (epochs == 0 || batch_size == 0) {
        throw Error(ErrorKind::Config, "epochs and batch_size must be >= 1");
    }
    if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) {
        throw Error(ErrorKind::Config, "peak_lr must be > 0");
    }
    if (!(p_drop >= 0.0 && p_drop <= 1.0)) {
        throw Error(ErrorKind::Config, "p_drop must lie in [0, 1]");
    }
    if (!(weight_decay >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
        !(adam_eps > 0.0)) {
        throw Error(ErrorKind::Config, "invalid AdamW hyperparameters");
    }
}

std::uint64_t TrainConfig::resolved_warmup(std::uint64_t total_steps) const {
    if (warmup_steps) {
        return *warmup_steps;
    }
    return total_steps / 20;
}

Vector interpolate(std::span<const double> a0, std::span<const double> a1, double t) {
    if (a0.size() != a1.size()) {
        throw Error(ErrorKind::Shape, "interpolate: dimension mismatch");
    }
    Vector out(a0.size());
    for (std::size_t i = 0; i < a0.size(); ++i) {
        out[i] = (1.0 - t) * a0[i] + t * a1[i];
    }
    return out;
}

Vector target_velocity(std::span<const double> a0, std::span<const double> a1) {
    if (a0.size() != a1.size()) {
        throw Error(ErrorKind::Shape, "target_velocity: dimension mismatch");
    }
    return subtract(a1, a0);
}

double lr_at(std::uint64_t step, const TrainConfig& config, std::uint64_t total_steps) {
    const std::uint64_t warmup = config.resolved_warmup(total_steps);
    if (total_steps < warmup) {
        throw Error(ErrorKind::Config, "total_steps " + std::to_string(total_steps) + " < warmup_steps " +
                                           std::to_string(warmup));
    }
    if (step > total_steps) {
        throw Error(ErrorKind::Argument, "step beyond total_steps");
    }
    if (step < warmup) {
        return config.peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
    }
    if (total_steps == warmup) {
        return config.peak_lr;
    }
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
    return config.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
                const TrainConfig& config) {
    if (params.size() != grads.size()) {
        throw Error(ErrorKind::Shape, "adamw_step: params and grads differ in size");
    }
    if (!all_finite(grads)) {
        throw Error(ErrorKind::Numeric, "adamw_step: non-finite gradient");
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    ++state.step;
    const double b1 = config.beta1;
    const double b2 = config.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * (config.weight_decay * params[i] + m_hat / (std::sqrt(v_hat) + config.adam_eps));
    }
}

TrainResult train(const Corpus& corpus, const ModelConfig& model_config, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    const auto started = std::chrono::steady_clock::now();
    model_config.validate();
    config.validate();
    corpus.validate();
    if (corpus.records.empty()) {
        throw Error(ErrorKind::Argument, "cannot train on an empty corpus");
    }
    if (corpus.header.activation_dim != model_config.activation_dim ||
        corpus.header.condition_dim != model_config.condition_dim) {
        throw Error(ErrorKind::Shape, "corpus dimensions do not match the model config");
    }

    // Training targets, standardized per layer when the corpus carries statistics.
    std::vector<Vector> data;
    data.reserve(corpus.records.size());
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const auto& rec = corpus.records[i];
        if (rec.layer >= model_config.max_layers) {
            throw Error(ErrorKind::Argument, "record " + std::to_string(i) + " has layer " + std::to_string(rec.layer) +
                                                 " >= max_layers");
        }
        if (corpus.header.normalization.empty()) {
            data.push_back(rec.activation);
        } else {
            const LayerStats* stats = find_layer_stats(corpus.header.normalization, rec.layer);
            if (stats == nullptr) {
                throw Error(ErrorKind::Format, "no normalization stats for layer " + std::to_string(rec.layer));
            }
            data.push_back(standardize(rec.activation, *stats));
        }
    }

    Rng init_rng(config.seed);
    TrainResult result{Checkpoint{init_params(model_config, init_rng), corpus.header.normalization}, {}};
    ModelParams& params = result.checkpoint.params;

    const std::size_t n = data.size();
    const std::size_t batch_size = config.batch_size;
    const std::uint64_t steps_per_epoch = (n + batch_size - 1) / batch_size;
    const std::uint64_t total_steps = steps_per_epoch * config.epochs;
    if (total_steps < config.resolved_warmup(total_steps)) {
        throw Error(ErrorKind::Config, "warmup_steps exceeds the total number of steps");
    }

    Rng order_rng = Rng::substream(config.seed, kOrderStream);
    std::vector<std::size_t> order(n);
    std::vector<TrainingSample> batch;
    batch.reserve(batch_size);
    AdamState adam;
    std::uint64_t step = 0;
    const std::size_t d = model_config.activation_dim;

    for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(order, order_rng);
        double loss_sum = 0.0;
        double lr = 0.0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t stop = std::min(n, start + batch_size);
            batch.clear();
            for (std::size_t slot = start; slot < stop; ++slot) {
                const std::size_t idx = order[slot];
                const auto& rec = corpus.records[idx];
                Rng rng = Rng::substream(config.seed, kSampleStreamBase + step * batch_size + (slot - start));
                const Vector a0 = sample_standard_gaussian(rng, d);
                const double t = rng.uniform();
                const bool drop = rng.uniform() < config.p_drop;
                TrainingSample s;
                s.a_t = interpolate(a0, data[idx], t);
                s.t = t;
                s.cond = drop ? Condition::null() : Condition::of(corpus.conditions[rec.condition_id]);
                s.layer = rec.layer;
                s.position = rec.position;
                s.target = target_velocity(a0, data[idx]);
                batch.push_back(std::move(s));
            }
            double batch_loss = 0.0;
            try {
                const auto lg = loss_and_grad(params, batch);
                lr = lr_at(step + 1, config, total_steps);
                adamw_step(params.values(), lg.grads.values(), adam, lr, config);
                batch_loss = lg.loss;
            } catch (const Error& e) {
                throw Error(e.kind(), "training step " + std::to_string(step) + ": " + e.detail());
            }
            loss_sum += batch_loss * static_cast<double>(stop - start);
            ++step;
        }
        EpochStats stats{epoch, loss_sum / static_cast<double>(n), lr};
        result.report.epochs.push_back(stats);
        if (on_epoch) {
            on_epoch(stats);
        }
    }

    result.report.final_loss = result.report.epochs.back().mean_loss;
    result.report.steps = step;
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

std::string loss_csv(const TrainReport& report) {
    std::string out = "epoch,loss,lr\n";
    char line[96];
    for (const auto& e : report.epochs) {
        std::snprintf(line, sizeof(line), "%u,%.17g,%.17g\n", e.epoch, e.mean_loss, e.lr);
        out += line;
    }
    return out;
}

}  // namespace actflow
