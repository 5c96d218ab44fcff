// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>
#include <vector>

#include "actflow/error.hpp"
#include "actflow/trainer.hpp"
#include "doctest.h"

using namespace actflow;

TEST_CASE("interpolate and target velocity") {
    const Vector a0{0.0, 0.0};
    const Vector a1{2.0, 4.0};
    CHECK(interpolate(a0, a1, 0.0) == a0);
    CHECK(interpolate(a0, a1, 1.0) == a1);
    CHECK(interpolate(a0, a1, 0.5) == Vector{1.0, 2.0});
    CHECK(target_velocity(a1, a1) == Vector{0.0, 0.0});
    CHECK(target_velocity(Vector{1.0, 1.0}, Vector{4.0, 5.0}) == Vector{3.0, 4.0});
    CHECK(target_velocity(Vector{4.0, 5.0}, Vector{1.0, 1.0}) == Vector{-3.0, -4.0});
}

TEST_CASE("learning-rate schedule") {
    TrainConfig c;
    c.peak_lr = 1e-3;
    c.warmup_steps = 10;
    const std::uint64_t total = 100;
    CHECK(lr_at(0, c, total) == 0.0);
    CHECK(lr_at(5, c, total) == doctest::Approx(5e-4));
    CHECK(lr_at(10, c, total) == 1e-3);
    CHECK(lr_at(55, c, total) == doctest::Approx(5e-4));
    CHECK(std::abs(lr_at(100, c, total)) < 1e-18);
    for (std::uint64_t s = 10; s < 100; ++s) {
        CHECK(lr_at(s + 1, c, total) <= lr_at(s, c, total));
    }
    c.warmup_steps.reset();
    CHECK(c.resolved_warmup(200) == 10);
}

TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.p_drop = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c = TrainConfig{};
    c.peak_lr = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = TrainConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("AdamW") {
    TrainConfig c;
    c.weight_decay = 0.0;
    SUBCASE("zero gradients and no decay leave parameters unchanged") {
        Vector p{1.0, -2.0};
        AdamState s;
        const Vector g{0.0, 0.0};
        adamw_step(p, g, s, 0.1, c);
        CHECK(p == Vector{1.0, -2.0});
    }
    SUBCASE("one step on p^2 from 1 decreases p") {
        Vector p{1.0};
        AdamState s;
        const Vector g{2.0};
        adamw_step(p, g, s, 0.1, c);
        CHECK(p[0] < 1.0);
        CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));
    }
    SUBCASE("decoupled decay shrinks parameters without gradients") {
        TrainConfig d = c;
        d.weight_decay = 0.5;
        Vector p{2.0};
        AdamState s;
        const Vector g{0.0};
        adamw_step(p, g, s, 0.1, d);
        CHECK(p[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
    }
    SUBCASE("converges on a 2-D quadratic in at most 2000 steps") {
        TrainConfig q = c;
        q.peak_lr = 0.1;
        q.warmup_steps = 0;
        Vector p{0.0, 0.0};
        AdamState s;
        const std::uint64_t total = 2000;
        for (std::uint64_t step = 1; step <= total; ++step) {
            const Vector g{2.0 * (p[0] - 1.0), 20.0 * (p[1] + 2.0)};
            adamw_step(p, g, s, lr_at(step, q, total), q);
        }
        CHECK(std::abs(p[0] - 1.0) < 1e-4);
        CHECK(std::abs(p[1] + 2.0) < 1e-4);
    }
    SUBCASE("non-finite gradients are a numeric error") {
        Vector p{1.0};
        AdamState s;
        const Vector g{std::nan("")};
        CHECK_THROWS_AS(adamw_step(p, g, s, 0.1, c), Error);
    }
}

namespace {

Corpus two_condition_corpus(std::uint32_t n, std::uint64_t seed) {
    SynthSpec s;
    s.num_conditions = 2;
    s.activation_dim = 2;
    s.means = {Vector(2, 3.0), Vector(2, -3.0)};
    s.records_per_condition = n;
    s.seed = seed;
    return synth_corpus(s);
}

ModelConfig tiny_model() {
    ModelConfig m;
    m.activation_dim = 2;
    m.condition_dim = 2;
    m.hidden_dim = 16;
    m.num_blocks = 1;
    m.time_embed_dim = 8;
    return m;
}

}  // namespace

TEST_CASE("training is deterministic under a fixed seed") {
    const Corpus corpus = two_condition_corpus(256, 1);
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 32;
    c.peak_lr = 3e-3;
    c.seed = 77;
    const TrainResult a = train(corpus, tiny_model(), c);
    const TrainResult b = train(corpus, tiny_model(), c);
    CHECK(a.report.epochs == b.report.epochs);
    CHECK(a.checkpoint == b.checkpoint);
    CHECK(loss_csv(a.report) == loss_csv(b.report));
    CHECK(a.report.steps == 3 * 16);
    CHECK(loss_csv(a.report).rfind("epoch,loss,lr\n", 0) == 0);
    c.seed = 78;
    CHECK_FALSE(train(corpus, tiny_model(), c).checkpoint == a.checkpoint);
}

TEST_CASE("p_drop = 1 never trains the conditional path") {
    const Corpus corpus = two_condition_corpus(128, 2);
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 32;
    c.peak_lr = 3e-3;
    c.p_drop = 1.0;
    const TrainResult r = train(corpus, tiny_model(), c);
    Rng rng(4);
    for (int i = 0; i < 10; ++i) {
        const Vector x = sample_standard_gaussian(rng, 2);
        const double t = rng.uniform();
        CHECK(velocity(r.checkpoint.params, x, t, Condition::of(corpus.conditions[0]), 0, 0) ==
              velocity(r.checkpoint.params, x, t, Condition::of(corpus.conditions[1]), 0, 0));
    }
}

TEST_CASE("training rejects mismatched corpora and stores normalization") {
    Corpus corpus = two_condition_corpus(64, 3);
    TrainConfig c;
    c.epochs = 1;
    ModelConfig wrong = tiny_model();
    wrong.activation_dim = 3;
    CHECK_THROWS_AS(train(corpus, wrong, c), Error);

    SynthSpec s;
    s.num_conditions = 2;
    s.activation_dim = 2;
    s.means = {Vector(2, 10.0), Vector(2, -10.0)};
    s.records_per_condition = 64;
    s.with_normalization = true;
    const Corpus normed = synth_corpus(s);
    const TrainResult r = train(normed, tiny_model(), c);
    CHECK(r.checkpoint.normalization == normed.header.normalization);
}
