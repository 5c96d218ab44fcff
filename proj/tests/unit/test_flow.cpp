// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "actflow/error.hpp"
#include "actflow/flow.hpp"
#include "doctest.h"

using namespace actflow;

namespace {

ModelConfig fixture_config() {
    ModelConfig c;
    c.activation_dim = 2;
    c.condition_dim = 2;
    c.hidden_dim = 6;
    c.num_blocks = 1;
    c.time_embed_dim = 4;
    return c;
}

// Hand-built network whose output layer is a pure bias, i.e. v == k everywhere.
ModelParams constant_model(const Vector& k) {
    ModelParams p(fixture_config());
    Rng rng(3);
    for (double& x : p.values()) {
        x = rng.normal();
    }
    auto out_w = p.tensor(p.layout().out_w);
    std::fill(out_w.begin(), out_w.end(), 0.0);
    auto out_b = p.tensor(p.layout().out_b);
    std::copy(k.begin(), k.end(), out_b.begin());
    return p;
}

ModelParams random_model(std::uint64_t seed) {
    ModelParams p(fixture_config());
    Rng rng(seed);
    for (double& x : p.values()) {
        x = 0.7 * rng.normal();
    }
    return p;
}

const Vector e0{1.0, 0.0};
const Vector e1{0.0, 1.0};

}  // namespace

TEST_CASE("guided velocity") {
    const ModelParams p = random_model(1);
    const Vector a{0.3, -0.7};
    const Condition c = Condition::of(e0);
    CHECK(guided_velocity(p, a, 0.4, c, 0, 0, 1.0) == velocity(p, a, 0.4, c, 0, 0));
    CHECK(guided_velocity(p, a, 0.4, c, 0, 0, 0.0) == velocity(p, a, 0.4, Condition::null(), 0, 0));
    CHECK_THROWS_AS(guided_velocity(p, a, 0.4, Condition::null(), 0, 0, 2.0), Error);

    const FunctionField fixture([](std::span<const double>, double, Condition cond) {
        return cond.is_null() ? Vector{0.0, 0.0} : Vector{2.0, 0.0};
    });
    CHECK(guided_velocity(fixture, a, 0.5, c, 0, 0, 2.0) == Vector{4.0, 0.0});
}

TEST_CASE("flow_map on fixed fields") {
    const Vector a{0.25, -1.5};
    SUBCASE("s == t returns the input") {
        const ModelParams p = random_model(2);
        CHECK(flow_map(p, a, 0.3, 0.3, Condition::of(e0), 0, 0, SolveSpec{7, 1.0, 1.0}) == a);
    }
    SUBCASE("constant field: a + k for any step count") {
        const Vector k{0.5, -0.25};
        const ModelParams p = constant_model(k);
        for (std::uint32_t steps : {1u, 2u, 4u, 8u, 64u}) {
            CHECK(flow_map(p, a, 0.0, 1.0, Condition::of(e1), 0, 0, SolveSpec{steps, 1.0, 1.0}) ==
                  Vector{0.75, -1.75});
        }
        for (std::uint32_t steps : {3u, 7u, 30u, 97u}) {
            const Vector x = flow_map(p, a, 0.0, 1.0, Condition::of(e1), 0, 0, SolveSpec{steps, 1.0, 1.0});
            CHECK(std::abs(x[0] - 0.75) <= 1e-14);
            CHECK(std::abs(x[1] + 1.75) <= 1e-14);
        }
    }
    SUBCASE("affine field v = -a follows (1 - h)^k at every step") {
        const FunctionField field([](std::span<const double> x, double, Condition) { return scaled(x, -1.0); });
        const std::uint32_t n = 16;
        for (std::uint32_t k = 1; k <= n; ++k) {
            const double t = static_cast<double>(k) / n;
            const Vector x = flow_map(field, a, 0.0, t, Condition::null(), 0, 0, k, 1.0);
            const double factor = std::pow(1.0 - 1.0 / n, static_cast<double>(k));
            CHECK(std::abs(x[0] - a[0] * factor) <= 1e-12);
            CHECK(std::abs(x[1] - a[1] * factor) <= 1e-12);
        }
        const Vector end = flow_map(field, a, 0.0, 1.0, Condition::null(), 0, 0, 30, 1.0);
        CHECK(end[0] == doctest::Approx(a[0] * std::pow(1.0 - 1.0 / 30, 30)).epsilon(1e-13));
    }
    SUBCASE("forward then backward") {
        const ModelParams cst = constant_model({1.25, -0.5});
        const Vector there = flow_map(cst, a, 0.2, 0.9, Condition::of(e0), 0, 0, SolveSpec{14, 1.0, 1.0});
        const Vector back = flow_map(cst, there, 0.9, 0.2, Condition::of(e0), 0, 0, SolveSpec{14, 1.0, 1.0});
        CHECK(std::abs(back[0] - a[0]) <= 1e-14);
        CHECK(std::abs(back[1] - a[1]) <= 1e-14);

        // Explicit Euler is not self-inverse on a state-dependent field; the cycle error is first order.
        const FunctionField lip([](std::span<const double> x, double t, Condition) {
            return Vector{std::sin(x[1]) + t, 0.5 * x[0]};
        });
        const auto cycle = [&](std::uint32_t n) {
            const Vector f = flow_map(lip, a, 0.0, 1.0, Condition::null(), 0, 0, n, 1.0);
            const Vector b = flow_map(lip, f, 1.0, 0.0, Condition::null(), 0, 0, n, 1.0);
            return std::sqrt(squared_distance(a, b));
        };
        const double e100 = cycle(100);
        const double e200 = cycle(200);
        CHECK(e100 < 0.05);
        CHECK(e100 / e200 == doctest::Approx(2.0).epsilon(0.05));
    }
    SUBCASE("input validation and numeric failures") {
        const ModelParams p = random_model(2);
        CHECK_THROWS_AS(flow_map(p, a, -0.1, 0.5, Condition::of(e0), 0, 0, SolveSpec{}), Error);
        CHECK_THROWS_AS(flow_map(p, a, 0.0, 1.5, Condition::of(e0), 0, 0, SolveSpec{}), Error);
        CHECK_THROWS_AS(flow_map(p, a, 0.0, 1.0, Condition::of(e0), 0, 0, SolveSpec{0, 1.0, 1.0}), Error);
        const FunctionField blowup([](std::span<const double> x, double, Condition) {
            return Vector{std::exp(1e3 * x[0]), 0.0};
        });
        try {
            flow_map(blowup, Vector{1.0, 0.0}, 0.0, 1.0, Condition::null(), 0, 0, 4, 1.0);
            FAIL("expected a numeric error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Numeric);
        }
    }
}

TEST_CASE("invert and edit") {
    const Vector a{0.25, -1.5};
    const Vector k{0.5, 2.0};
    const ModelParams cst = constant_model(k);
    SUBCASE("tau = 1 is the identity and tau = 0 subtracts k") {
        CHECK(invert(cst, a, Condition::of(e0), 0, 0, 1.0, SolveSpec{5, 1.0, 1.0}) == a);
        CHECK(invert(cst, a, Condition::of(e0), 0, 0, 0.0, SolveSpec{8, 1.0, 1.0}) == Vector{-0.25, -3.5});
    }
    SUBCASE("strength 0 returns the input bit for bit") {
        const ModelParams p = random_model(6);
        EditSpec spec;
        spec.source = Condition::of(e0);
        spec.target = Condition::of(e1);
        spec.strength = 0.0;
        const Vector odd{0.1 + 0.2, std::nextafter(1.0, 2.0)};
        const Vector out = edit(p, odd, spec, 0, 0);
        CHECK(out == odd);
        CHECK(std::signbit(edit(p, Vector{-0.0, 0.0}, spec, 0, 0)[0]));
    }
    SUBCASE("same condition on a constant field recovers the input") {
        EditSpec spec;
        spec.source = Condition::of(e1);
        spec.target = Condition::of(e1);
        spec.strength = 0.5;
        spec.forward = SolveSpec{30, 1.0, 1.0};
        spec.inversion = SolveSpec{15, 1.0, 1.0};
        const Vector out = edit(cst, a, spec, 0, 0);
        CHECK(std::abs(out[0] - a[0]) <= 1e-14);
        CHECK(std::abs(out[1] - a[1]) <= 1e-14);
    }
    SUBCASE("edit validates strength") {
        EditSpec spec;
        spec.source = Condition::of(e0);
        spec.target = Condition::of(e1);
        spec.strength = 1.5;
        CHECK_THROWS_AS(edit(cst, a, spec, 0, 0), Error);
    }
}

TEST_CASE("generate is reproducible") {
    const ModelParams p = random_model(9);
    Rng r1(5), r2(5);
    const ModelField field(p);
    CHECK(generate(field, r1, 2, Condition::of(e0), 0, 0, SolveSpec{}) ==
          generate(field, r2, 2, Condition::of(e0), 0, 0, SolveSpec{}));
}

TEST_CASE("leg steps, presets and grids") {
    CHECK(leg_steps(30, 0.5, 1.0) == 15);
    CHECK(leg_steps(10, 0.9, 1.0) == 1);
    CHECK(leg_steps(10, 0.99, 1.0) == 1);
    CHECK(leg_steps(50, 0.4, 1.0) == 30);

    const auto persona = find_preset("persona");
    REQUIRE(persona);
    CHECK(persona->ode_steps == 30);
    CHECK(persona->inversion_steps == 15);
    CHECK(persona->tau == 0.5);
    CHECK(find_preset("axbench")->name == "concept");
    CHECK(find_preset("recast")->inversion_steps == 1);
    CHECK(find_preset("recast")->tau == 0.9);
    CHECK(find_preset("concept")->ode_steps == 50);
    CHECK(find_preset("truthfulqa")->ode_steps == 20);
    CHECK_FALSE(find_preset("nope"));

    CHECK(arithmetic_grid(5, 30, 5) == std::vector<double>{5, 10, 15, 20, 25, 30});
    CHECK(arithmetic_grid(1, 1, 1) == std::vector<double>{1});
    CHECK(arithmetic_grid(8, 29, 3).size() == 8);
}
