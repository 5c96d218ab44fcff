// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "actflow/error.hpp"
#include "actflow/numerics.hpp"
#include "doctest.h"

using namespace actflow;

TEST_CASE("splitmix64 and xoshiro256** match the published reference streams") {
    std::uint64_t state = 0;
    CHECK(splitmix64(state) == 0xE220A8397B1DCDAFULL);

    Rng zero(0);
    CHECK(zero.next_u64() == 0x99EC5F36CB75F2B4ULL);
    CHECK(zero.next_u64() == 0xBF6E1F784956452AULL);
    CHECK(zero.next_u64() == 0x1A5F849D4933E6E0ULL);

    Rng forty_two(42);
    CHECK(forty_two.next_u64() == 0x15780B2E0C2EC716ULL);
    CHECK(forty_two.next_u64() == 0x6104D9866D113A7EULL);
    CHECK(forty_two.next_u64() == 0xAE17533239E499A1ULL);
}

TEST_CASE("uniform uses the top 53 bits and normal is Box-Muller with a cached pair") {
    Rng u(7);
    CHECK(u.uniform() == 0.7005764821796896);
    CHECK(u.uniform() == 0.2787512294737843);

    Rng n(7);
    CHECK(n.normal() == doctest::Approx(-0.2790239910251981).epsilon(1e-14));
    CHECK(n.normal() == doctest::Approx(1.5277231859624536).epsilon(1e-14));
}

TEST_CASE("uniform_index stays in range and covers it") {
    Rng rng(3);
    std::vector<int> hits(5, 0);
    for (int i = 0; i < 5000; ++i) {
        const auto k = rng.uniform_index(5);
        REQUIRE(k < 5);
        ++hits[k];
    }
    for (int h : hits) {
        CHECK(h > 800);
    }
}

TEST_CASE("substreams are reproducible and distinct") {
    Rng a = Rng::substream(11, 4);
    Rng b = Rng::substream(11, 4);
    Rng c = Rng::substream(11, 5);
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
}

TEST_CASE("sample_standard_gaussian") {
    SUBCASE("same seed twice gives identical vectors") {
        Rng a(7);
        Rng b(7);
        CHECK(sample_standard_gaussian(a, 4) == sample_standard_gaussian(b, 4));
    }
    SUBCASE("dim 0 is an invalid dimension") {
        Rng rng(1);
        CHECK_THROWS_AS(sample_standard_gaussian(rng, 0), Error);
        try {
            sample_standard_gaussian(rng, 0);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InvalidDimension);
        }
    }
    SUBCASE("moments over 1e5 draws") {
        Rng rng(2024);
        const std::size_t dim = 8;
        const int draws = 100000;
        std::vector<double> sum(dim, 0.0), sq(dim, 0.0);
        for (int i = 0; i < draws; ++i) {
            const Vector z = sample_standard_gaussian(rng, dim);
            for (std::size_t k = 0; k < dim; ++k) {
                sum[k] += z[k];
                sq[k] += z[k] * z[k];
            }
        }
        for (std::size_t k = 0; k < dim; ++k) {
            const double mean = sum[k] / draws;
            const double var = sq[k] / draws - mean * mean;
            CHECK(std::abs(mean) <= 0.02);
            CHECK(std::abs(var - 1.0) <= 0.05);
        }
    }
}

TEST_CASE("finite_diff_gradient") {
    SUBCASE("squared norm at (1, 2)") {
        const Vector p{1.0, 2.0};
        const Vector g = finite_diff_gradient([](std::span<const double> x) { return dot(x, x); }, p, 1e-6);
        CHECK(std::abs(g[0] - 2.0) <= 1e-6);
        CHECK(std::abs(g[1] - 4.0) <= 1e-6);
    }
    SUBCASE("constant function") {
        const Vector p{0.3, -1.0, 5.0};
        const Vector g = finite_diff_gradient([](std::span<const double>) { return 4.25; }, p, 1e-4);
        CHECK(g == Vector{0.0, 0.0, 0.0});
    }
    SUBCASE("bilinear p0 * p1 at (3, 5)") {
        const Vector p{3.0, 5.0};
        const Vector g = finite_diff_gradient([](std::span<const double> x) { return x[0] * x[1]; }, p, 1e-5);
        CHECK(g[0] == doctest::Approx(5.0).epsilon(1e-9));
        CHECK(g[1] == doctest::Approx(3.0).epsilon(1e-9));
    }
    SUBCASE("quadratic polynomials are matched to eps^2 scale") {
        Rng rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            const double a = rng.normal(), b = rng.normal(), c = rng.normal(), d = rng.normal();
            const Vector p{rng.normal(), rng.normal()};
            const auto f = [&](std::span<const double> x) {
                return a * x[0] * x[0] + b * x[0] * x[1] + c * x[1] * x[1] + d * x[0];
            };
            const double eps = 1e-3;
            const Vector g = finite_diff_gradient(f, p, eps);
            CHECK(std::abs(g[0] - (2 * a * p[0] + b * p[1] + d)) <= 1e-9);
            CHECK(std::abs(g[1] - (b * p[0] + 2 * c * p[1])) <= 1e-9);
        }
    }
    SUBCASE("non-finite values raise a numeric error naming the coordinate") {
        const Vector p{1.0, 0.0};
        try {
            finite_diff_gradient([](std::span<const double> x) { return std::sqrt(x[1]); }, p, 1e-3);
            FAIL("expected a numeric error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Numeric);
            CHECK(std::string(e.what()).find("1") != std::string::npos);
        }
    }
}

TEST_CASE("dense helpers check shapes") {
    const Vector a{1.0, 2.0};
    const Vector b{3.0, 4.0, 5.0};
    CHECK_THROWS_AS(dot(a, b), Error);
    CHECK(dot(a, a) == 5.0);
    CHECK(norm(Vector{3.0, 4.0}) == 5.0);
    CHECK(squared_distance(a, Vector{4.0, 6.0}) == 25.0);
    CHECK(subtract(Vector{3.0, 4.0}, Vector{1.0, 1.0}) == Vector{2.0, 3.0});
    Vector y{1.0, 1.0};
    axpy(2.0, a, y);
    CHECK(y == Vector{3.0, 5.0});
    CHECK_FALSE(all_finite(Vector{1.0, std::nan("")}));
    CHECK(to_storage_precision(Vector{0.1})[0] == static_cast<double>(0.1f));
}
