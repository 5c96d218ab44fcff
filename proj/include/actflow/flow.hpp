// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "actflow/velocity_model.hpp"

namespace actflow {

/// Anything that yields da/dt = v(a, t, cond, layer, position).
class VelocityField {
public:
    virtual ~VelocityField() = default;
    virtual Vector operator()(std::span<const double> a, double t, Condition cond, std::uint32_t layer,
                              std::uint32_t position) const = 0;
};

/// The trained network as a field.
class ModelField final : public VelocityField {
public:
    explicit ModelField(const ModelParams& params) : m_params(params) {}
    Vector operator()(std::span<const double> a, double t, Condition cond, std::uint32_t layer,
                      std::uint32_t position) const override {
        return velocity(m_params, a, t, cond, layer, position);
    }

private:
    const ModelParams& m_params;
};

/// Closed-form fields for tests and fixtures.
class FunctionField final : public VelocityField {
public:
    using Fn = std::function<Vector(std::span<const double>, double, Condition)>;
    explicit FunctionField(Fn fn) : m_fn(std::move(fn)) {}
    Vector operator()(std::span<const double> a, double t, Condition cond, std::uint32_t,
                      std::uint32_t) const override {
        return m_fn(a, t, cond);
    }

private:
    Fn m_fn;
};

struct SolveSpec {
    std::uint32_t steps = 30;
    double guidance_scale = 1.0;
    /// Guidance applied on inversion legs (1 = pure conditional).
    double inversion_guidance = 1.0;

    void validate() const;
};

/// Flow-inversion edit parameters.
///   inversion.steps    Euler steps for the backward leg 1 -> tau, guided by inversion.inversion_guidance
///   forward.steps      resolution of a uniform grid over [0, 1]; the regeneration leg tau -> 1 uses
///                      round(forward.steps * strength) of those steps, guided by forward.guidance_scale
/// With forward.steps * strength == inversion.steps both legs share one grid.
struct EditSpec {
    Condition source;
    Condition target;
    double strength = 0.5;  // lambda in [0, 1]
    SolveSpec forward;
    SolveSpec inversion;

    double tau() const noexcept { return 1.0 - strength; }
    void validate() const;
};

/// Number of steps a sub-interval [s, t] receives from a uniform grid of `grid_steps` over [0, 1]; at least 1.
std::uint32_t leg_steps(std::uint32_t grid_steps, double s, double t);

/// v_null + w (v_cond - v_null). w == 1 returns the conditional velocity itself and w == 0 the
/// null velocity, without arithmetic. `cond` must not be null.
Vector guided_velocity(const VelocityField& field, std::span<const double> a, double t, Condition cond,
                       std::uint32_t layer, std::uint32_t position, double w);
Vector guided_velocity(const ModelParams& params, std::span<const double> a, double t, Condition cond,
                       std::uint32_t layer, std::uint32_t position, double w);

/// Explicit Euler on the guided field from time s to time t: grid s + k h, h = (t - s) / steps,
/// each step evaluated at its starting state and time. t < s integrates backward. A null
/// condition integrates the null field.
Vector flow_map(const VelocityField& field, std::span<const double> a_s, double s, double t, Condition cond,
                std::uint32_t layer, std::uint32_t position, std::uint32_t steps, double w);
Vector flow_map(const VelocityField& field, std::span<const double> a_s, double s, double t, Condition cond,
                std::uint32_t layer, std::uint32_t position, const SolveSpec& spec);
Vector flow_map(const ModelParams& params, std::span<const double> a_s, double s, double t, Condition cond,
                std::uint32_t layer, std::uint32_t position, const SolveSpec& spec);

/// flow_map(a, 1 -> tau) under `cond`, spec.steps steps, guidance spec.inversion_guidance.
Vector invert(const VelocityField& field, std::span<const double> a, Condition cond, std::uint32_t layer,
              std::uint32_t position, double tau, const SolveSpec& spec);
Vector invert(const ModelParams& params, std::span<const double> a, Condition cond, std::uint32_t layer,
              std::uint32_t position, double tau, const SolveSpec& spec);

/// Inverts under the source condition to tau = 1 - strength, then regenerates under the target.
/// strength == 0 returns the input untouched.
Vector edit(const VelocityField& field, std::span<const double> a_src, const EditSpec& spec, std::uint32_t layer,
            std::uint32_t position);
Vector edit(const ModelParams& params, std::span<const double> a_src, const EditSpec& spec, std::uint32_t layer,
            std::uint32_t position);

/// Transports a prior sample from t = 0 to t = 1.
Vector generate(const VelocityField& field, Rng& rng, std::size_t dim, Condition cond, std::uint32_t layer,
                std::uint32_t position, const SolveSpec& spec);

/// Solver settings for one task family: total ODE steps, inversion steps, tau, and the CFG sweep grid.
struct Preset {
    std::string_view name;
    std::uint32_t ode_steps;
    std::uint32_t inversion_steps;
    double tau;
    std::vector<double> guidance_grid;
};

const std::vector<Preset>& presets();
/// Accepts "persona", "truthfulqa", "concept" (alias "axbench"), "constraint" (alias "recast").
std::optional<Preset> find_preset(std::string_view name);

/// Inclusive arithmetic grid lo, lo + step, ... <= hi (with a small tolerance for the endpoint).
std::vector<double> arithmetic_grid(double lo, double hi, double step);

}  // namespace actflow
