// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "actflow/flow.hpp"

#include <cmath>
#include <string>

#include "actflow/error.hpp"

namespace actflow {

namespace {

void require_unit_time(double t, const char* what) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw Error(ErrorKind::Argument, std::string(what) + " must lie in [0, 1]");
    }
}

}  // namespace

void SolveSpec::validate() const {
    if (steps == 0) {
        throw Error(ErrorKind::Config, "solver steps must be >= 1");
    }
    if (!std::isfinite(guidance_scale) || !std::isfinite(inversion_guidance)) {
        throw Error(ErrorKind::Config, "guidance scales must be finite");
    }
}

void EditSpec::validate() const {
    if (!(strength >= 0.0 && strength <= 1.0)) {
        throw Error(ErrorKind::Config, "edit strength must lie in [0, 1]");
    }
    if (source.is_null() || target.is_null()) {
        throw Error(ErrorKind::Argument, "edit needs non-null source and target conditions");
    }
    forward.validate();
    inversion.validate();
}

std::uint32_t leg_steps(std::uint32_t grid_steps, double s, double t) {
    const double n = std::round(static_cast<double>(grid_steps) * std::abs(t - s));
    return n < 1.0 ? 1u : static_cast<std::uint32_t>(n);
}

Vector guided_velocity(const VelocityField& field, std::span<const double> a, double t, Condition cond,
                       std::uint32_t layer, std::uint32_t position, double w) {
    if (cond.is_null()) {
        throw Error(ErrorKind::Argument, "guided_velocity needs a non-null condition");
    }
    if (w == 1.0) {
        return field(a, t, cond, layer, position);
    }
    Vector v_null = field(a, t, Condition::null(), layer, position);
    if (w == 0.0) {
        return v_null;
    }
    const Vector v_cond = field(a, t, cond, layer, position);
    for (std::size_t i = 0; i < v_null.size(); ++i) {
        v_null[i] += w * (v_cond[i] - v_null[i]);
    }
    return v_null;
}

Vector guided_velocity(const ModelParams& params, std::span<const double> a, double t, Condition cond,
                       std::uint32_t layer, std::uint32_t position, double w) {
    return guided_velocity(ModelField(params), a, t, cond, layer, position, w);
}

Vector flow_map(const VelocityField& field, std::span<const double> a_s, double s, double t, Condition cond,
                std::uint32_t layer, std::uint32_t position, std::uint32_t steps, double w) {
    require_unit_time(s, "start time");
    require_unit_time(t, "end time");
    if (steps == 0) {
        throw Error(ErrorKind::Config, "flow_map needs steps >= 1");
    }
    Vector x(a_s.begin(), a_s.end());
    if (s == t) {
        return x;
    }
    const double h = (t - s) / static_cast<double>(steps);
    for (std::uint32_t k = 0; k < steps; ++k) {
        const double time = s + static_cast<double>(k) * h;
        const Vector v = cond.is_null() ? field(x, time, cond, layer, position)
                                        : guided_velocity(field, x, time, cond, layer, position, w);
        if (v.size() != x.size()) {
            throw Error(ErrorKind::Shape, "velocity field returned the wrong dimension");
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += h * v[i];
        }
        if (!all_finite(x)) {
            throw Error(ErrorKind::Numeric, "non-finite state at Euler step " + std::to_string(k));
        }
    }
    return x;
}

Vector flow_map(const VelocityField& field, std::span<const double> a_s, double s, double t, Condition cond,
                std::uint32_t layer, std::uint32_t position, const SolveSpec& spec) {
    spec.validate();
    return flow_map(field, a_s, s, t, cond, layer, position, spec.steps, spec.guidance_scale);
}

Vector flow_map(const ModelParams& params, std::span<const double> a_s, double s, double t, Condition cond,
                std::uint32_t layer, std::uint32_t position, const SolveSpec& spec) {
    return flow_map(ModelField(params), a_s, s, t, cond, layer, position, spec);
}

Vector invert(const VelocityField& field, std::span<const double> a, Condition cond, std::uint32_t layer,
              std::uint32_t position, double tau, const SolveSpec& spec) {
    require_unit_time(tau, "tau");
    spec.validate();
    return flow_map(field, a, 1.0, tau, cond, layer, position, spec.steps, spec.inversion_guidance);
}

Vector invert(const ModelParams& params, std::span<const double> a, Condition cond, std::uint32_t layer,
              std::uint32_t position, double tau, const SolveSpec& spec) {
    return invert(ModelField(params), a, cond, layer, position, tau, spec);
}

Vector edit(const VelocityField& field, std::span<const double> a_src, const EditSpec& spec, std::uint32_t layer,
            std::uint32_t position) {
    spec.validate();
    if (spec.strength == 0.0) {
        return Vector(a_src.begin(), a_src.end());
    }
    const double tau = spec.tau();
    const Vector latent = invert(field, a_src, spec.source, layer, position, tau, spec.inversion);
    return flow_map(field, latent, tau, 1.0, spec.target, layer, position, leg_steps(spec.forward.steps, tau, 1.0),
                    spec.forward.guidance_scale);
}

Vector edit(const ModelParams& params, std::span<const double> a_src, const EditSpec& spec, std::uint32_t layer,
            std::uint32_t position) {
    return edit(ModelField(params), a_src, spec, layer, position);
}

Vector generate(const VelocityField& field, Rng& rng, std::size_t dim, Condition cond, std::uint32_t layer,
                std::uint32_t position, const SolveSpec& spec) {
    const Vector prior = sample_standard_gaussian(rng, dim);
    return flow_map(field, prior, 0.0, 1.0, cond, layer, position, spec);
}

std::vector<double> arithmetic_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw Error(ErrorKind::Config, "grid needs lo <= hi and step > 0");
    }
    std::vector<double> grid;
    for (std::size_t k = 0;; ++k) {
        const double v = lo + static_cast<double>(k) * step;
        if (v > hi + 1e-9 * step) {
            break;
        }
        grid.push_back(v);
    }
    return grid;
}

const std::vector<Preset>& presets() {
    static const std::vector<Preset> table = {
        {"persona", 30, 15, 0.5, arithmetic_grid(8, 29, 3)},
        {"truthfulqa", 20, 10, 0.5, arithmetic_grid(5, 25, 5)},
        {"concept", 50, 30, 0.4, arithmetic_grid(50, 70, 5)},
        {"constraint", 10, 1, 0.9, arithmetic_grid(5, 30, 5)},
    };
    return table;
}

std::optional<Preset> find_preset(std::string_view name) {
    if (name == "axbench") {
        name = "concept";
    } else if (name == "recast") {
        name = "constraint";
    }
    for (const auto& p : presets()) {
        if (p.name == name) {
            return p;
        }
    }
    return std::nullopt;
}

}  // namespace actflow
