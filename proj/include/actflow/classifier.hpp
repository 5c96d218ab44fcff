// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "actflow/corpus.hpp"
#include "actflow/flow.hpp"

namespace actflow {

struct CandidateEnergy {
    std::uint32_t condition_id = 0;
    double energy = 0.0;
};

struct EnergyReport {
    /// Sorted by condition id.
    std::vector<CandidateEnergy> energies;
    std::uint32_t predicted = 0;
    /// Second-lowest minus lowest energy; +inf with a single candidate.
    double margin = std::numeric_limits<double>::infinity();

    double energy_of(std::uint32_t condition_id) const;
};

/// ||a - F(tau -> 1)(F(1 -> tau)(a; c); c)||^2. Both legs use
/// leg_steps(spec.steps, tau, 1) Euler steps, so they share one grid; the backward leg is
/// guided by spec.inversion_guidance and the forward leg by spec.guidance_scale.
/// tau must lie in [0, 1); tau == 1 is a degenerate cycle.
double reconstruction_energy(const VelocityField& field, std::span<const double> a, Condition cond,
                             std::uint32_t layer, std::uint32_t position, double tau, const SolveSpec& spec);
double reconstruction_energy(const ModelParams& params, std::span<const double> a, Condition cond,
                             std::uint32_t layer, std::uint32_t position, double tau, const SolveSpec& spec);

/// Lowest-energy candidate; ties go to the lowest condition id.
EnergyReport classify(const VelocityField& field, std::span<const double> a, std::span<const ConditionEntry> candidates,
                      std::uint32_t layer, std::uint32_t position, double tau, const SolveSpec& spec);
EnergyReport classify(const ModelParams& params, std::span<const double> a,
                      std::span<const ConditionEntry> candidates, std::uint32_t layer, std::uint32_t position,
                      double tau, const SolveSpec& spec);

/// E(negative) - E(positive); larger means more positive. The report must hold exactly these two ids.
double binary_score(const EnergyReport& report, std::uint32_t negative_id, std::uint32_t positive_id);

/// Mann-Whitney ROC-AUC with average ranks, so ties count one half.
double auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace actflow
