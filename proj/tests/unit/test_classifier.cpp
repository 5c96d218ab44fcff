// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <vector>

#include "actflow/classifier.hpp"
#include "actflow/error.hpp"
#include "doctest.h"

using namespace actflow;

namespace {

// Brute-force pairwise AUC: P(score_pos > score_neg) + 0.5 P(tie).
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[i] == 1 && y[j] == 0) {
                pairs += 1.0;
                wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
        }
    }
    return wins / pairs;
}

std::vector<ConditionEntry> two_candidates() {
    return {{0, "Be calm.", {1.0, 0.0}}, {1, "Be loud.", {0.0, 1.0}}};
}

// Condition-dependent field: pulls toward a per-condition anchor, more strongly later in time.
FunctionField anchored_field() {
    return FunctionField([](std::span<const double> x, double t, Condition c) {
        Vector anchor{0.0, 0.0};
        if (!c.is_null()) {
            anchor = c.embedding()[0] > 0.5 ? Vector{2.0, 2.0} : Vector{-2.0, -2.0};
        }
        Vector v(2);
        for (int i = 0; i < 2; ++i) {
            v[i] = (1.0 + 3.0 * t) * (anchor[i] - x[i]);
        }
        return v;
    });
}

}  // namespace

TEST_CASE("reconstruction energy") {
    const SolveSpec spec{10, 1.0, 1.0};
    SUBCASE("constant field gives zero for every candidate") {
        const FunctionField cst([](std::span<const double>, double, Condition c) {
            return c.is_null() ? Vector{0.0, 0.0} : Vector{0.75, -1.5};
        });
        const Vector a{0.3, 0.9};
        for (const auto& cand : two_candidates()) {
            CHECK(reconstruction_energy(cst, a, Condition::of(cand), 0, 0, 0.5, spec) <= 1e-28);
        }
    }
    SUBCASE("a fixed point of the cycle has zero energy") {
        const FunctionField f([](std::span<const double> x, double, Condition) {
            return Vector{x[0] - 1.0, x[1] + 2.0};
        });
        CHECK(reconstruction_energy(f, Vector{1.0, -2.0}, Condition::of(Vector{1.0, 0.0}), 0, 0, 0.3, spec) == 0.0);
    }
    SUBCASE("tau must lie in [0, 1)") {
        const FunctionField f = anchored_field();
        try {
            reconstruction_energy(f, Vector{0.0, 0.0}, Condition::of(Vector{1.0, 0.0}), 0, 0, 1.0, spec);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Degenerate);
        }
        CHECK_THROWS_AS(
            reconstruction_energy(f, Vector{0.0, 0.0}, Condition::of(Vector{1.0, 0.0}), 0, 0, -0.1, spec), Error);
    }
}

TEST_CASE("classify") {
    const FunctionField f = anchored_field();
    const SolveSpec spec{10, 1.0, 1.0};
    const auto cands = two_candidates();
    SUBCASE("energies are finite, non-negative and the argmin is predicted") {
        Rng rng(3);
        for (int i = 0; i < 50; ++i) {
            const Vector a = sample_standard_gaussian(rng, 2);
            const EnergyReport r = classify(f, a, cands, 0, 0, 0.5, spec);
            REQUIRE(r.energies.size() == 2);
            for (const auto& e : r.energies) {
                CHECK(std::isfinite(e.energy));
                CHECK(e.energy >= 0.0);
            }
            const auto& lo = r.energies[0].energy <= r.energies[1].energy ? r.energies[0] : r.energies[1];
            CHECK(r.predicted == lo.condition_id);
            CHECK(r.margin == doctest::Approx(std::abs(r.energies[0].energy - r.energies[1].energy)));
            // The score is positive exactly when the positive class wins.
            const double score = binary_score(r, 0, 1);
            CHECK((score > 0.0) == (r.predicted == 1 && r.energies[0].energy != r.energies[1].energy));
        }
    }
    SUBCASE("points near an anchor pick its condition") {
        CHECK(classify(f, Vector{1.9, 2.2}, cands, 0, 0, 0.5, spec).predicted == 0);
        CHECK(classify(f, Vector{-2.1, -1.9}, cands, 0, 0, 0.5, spec).predicted == 1);
    }
    SUBCASE("single candidate") {
        const std::vector<ConditionEntry> one{cands[1]};
        const EnergyReport r = classify(f, Vector{0.0, 0.0}, one, 0, 0, 0.5, spec);
        CHECK(r.predicted == 1);
        CHECK(r.margin == std::numeric_limits<double>::infinity());
    }
    SUBCASE("duplicate embeddings tie and the lowest id wins") {
        const std::vector<ConditionEntry> dup{{4, "Be evil.", {1.0, 0.0}}, {2, "Be evil.", {1.0, 0.0}}};
        const EnergyReport r = classify(f, Vector{0.4, -0.2}, dup, 0, 0, 0.5, spec);
        CHECK(r.energies[0].energy == r.energies[1].energy);
        CHECK(r.energies[0].condition_id == 2);
        CHECK(r.predicted == 2);
        CHECK(r.margin == 0.0);
    }
    SUBCASE("no candidates") {
        CHECK_THROWS_AS(classify(f, Vector{0.0, 0.0}, std::span<const ConditionEntry>{}, 0, 0, 0.5, spec), Error);
    }
}

TEST_CASE("binary score") {
    EnergyReport r;
    r.energies = {{0, 2.0}, {1, 0.5}};
    CHECK(binary_score(r, 0, 1) == 1.5);
    r.energies = {{0, 1.25}, {1, 1.25}};
    CHECK(binary_score(r, 0, 1) == 0.0);
    CHECK_THROWS_AS(binary_score(r, 0, 7), Error);
    r.energies = {{0, 1.0}};
    CHECK_THROWS_AS(binary_score(r, 0, 1), Error);
}

TEST_CASE("AUC") {
    CHECK(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
    CHECK(auc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) == 0.5);
    CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), Error);
    CHECK_THROWS_AS(auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), Error);

    SUBCASE("equals brute force exactly, with ties, on lists up to 200") {
        Rng rng(21);
        for (int trial = 0; trial < 60; ++trial) {
            const std::size_t n = 2 + rng.uniform_index(199);
            std::vector<double> s(n);
            std::vector<int> y(n);
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = static_cast<double>(rng.uniform_index(12)) * 0.25;
                y[i] = static_cast<int>(rng.uniform_index(2));
            }
            y[0] = 0;
            y[1] = 1;
            CHECK(auc(s, y) == pairwise_auc(s, y));
            std::vector<double> neg(s);
            for (double& v : neg) {
                v = -v;
            }
            CHECK(auc(neg, y) == doctest::Approx(1.0 - auc(s, y)).epsilon(1e-15));
        }
    }
    SUBCASE("independent labels give about one half") {
        Rng rng(8);
        std::vector<double> s(10000);
        std::vector<int> y(10000);
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = rng.uniform();
            y[i] = static_cast<int>(rng.uniform_index(2));
        }
        CHECK(std::abs(auc(s, y) - 0.5) <= 0.05);
    }
}
