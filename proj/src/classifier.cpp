// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "actflow/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "actflow/error.hpp"

namespace actflow {

double EnergyReport::energy_of(std::uint32_t condition_id) const {
    for (const auto& e : energies) {
        if (e.condition_id == condition_id) {
            return e.energy;
        }
    }
    throw Error(ErrorKind::Argument, "condition " + std::to_string(condition_id) + " is not a candidate");
}

double reconstruction_energy(const VelocityField& field, std::span<const double> a, Condition cond,
                             std::uint32_t layer, std::uint32_t position, double tau, const SolveSpec& spec) {
    if (!(tau >= 0.0 && tau < 1.0)) {
        throw Error(ErrorKind::Degenerate, "reconstruction cycle needs tau in [0, 1); tau = 1 is the identity");
    }
    spec.validate();
    const std::uint32_t steps = leg_steps(spec.steps, tau, 1.0);
    const Vector latent = flow_map(field, a, 1.0, tau, cond, layer, position, steps, spec.inversion_guidance);
    const Vector rebuilt = flow_map(field, latent, tau, 1.0, cond, layer, position, steps, spec.guidance_scale);
    return squared_distance(a, rebuilt);
}

double reconstruction_energy(const ModelParams& params, std::span<const double> a, Condition cond,
                             std::uint32_t layer, std::uint32_t position, double tau, const SolveSpec& spec) {
    return reconstruction_energy(ModelField(params), a, cond, layer, position, tau, spec);
}

EnergyReport classify(const VelocityField& field, std::span<const double> a, std::span<const ConditionEntry> candidates,
                      std::uint32_t layer, std::uint32_t position, double tau, const SolveSpec& spec) {
    if (candidates.empty()) {
        throw Error(ErrorKind::Argument, "classify needs at least one candidate");
    }
    EnergyReport report;
    for (const auto& c : candidates) {
        const double e = reconstruction_energy(field, a, Condition::of(c), layer, position, tau, spec);
        if (!std::isfinite(e)) {
            throw Error(ErrorKind::Numeric, "non-finite energy for condition " + std::to_string(c.id));
        }
        report.energies.push_back({c.id, e});
    }
    std::stable_sort(report.energies.begin(), report.energies.end(),
                     [](const CandidateEnergy& x, const CandidateEnergy& y) { return x.condition_id < y.condition_id; });

    // Strict comparison over id-sorted entries keeps the lowest id on ties.
    std::size_t best = 0;
    for (std::size_t i = 1; i < report.energies.size(); ++i) {
        if (report.energies[i].energy < report.energies[best].energy) {
            best = i;
        }
    }
    report.predicted = report.energies[best].condition_id;
    double second = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < report.energies.size(); ++i) {
        if (i != best) {
            second = std::min(second, report.energies[i].energy);
        }
    }
    report.margin = second - report.energies[best].energy;
    return report;
}

EnergyReport classify(const ModelParams& params, std::span<const double> a,
                      std::span<const ConditionEntry> candidates, std::uint32_t layer, std::uint32_t position,
                      double tau, const SolveSpec& spec) {
    return classify(ModelField(params), a, candidates, layer, position, tau, spec);
}

double binary_score(const EnergyReport& report, std::uint32_t negative_id, std::uint32_t positive_id) {
    if (report.energies.size() != 2 || negative_id == positive_id) {
        throw Error(ErrorKind::Argument, "binary_score needs exactly two distinct candidates");
    }
    return report.energy_of(negative_id) - report.energy_of(positive_id);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw Error(ErrorKind::Shape, "auc: scores and labels differ in length");
    }
    std::size_t positives = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) {
            throw Error(ErrorKind::Argument, "auc: labels must be 0 or 1");
        }
        positives += static_cast<std::size_t>(l);
    }
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw Error(ErrorKind::Argument, "auc needs both classes present");
    }
    for (double s : scores) {
        if (std::isnan(s)) {
            throw Error(ErrorKind::Numeric, "auc: NaN score");
        }
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] < scores[y]; });

    // Sum of (1-based, tie-averaged) ranks of the positives, kept doubled so it stays integral.
    std::uint64_t doubled_rank_sum = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const std::uint64_t doubled_avg_rank = (i + 1) + (j + 1);
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) {
                doubled_rank_sum += doubled_avg_rank;
            }
        }
        i = j + 1;
    }
    // U = R_pos - n_pos (n_pos + 1) / 2; AUC = U / (n_pos n_neg).
    const std::uint64_t doubled_u = doubled_rank_sum - positives * (positives + 1);
    return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

}  // namespace actflow
