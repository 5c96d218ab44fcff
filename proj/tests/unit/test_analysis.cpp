// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "actflow/analysis.hpp"
#include "actflow/error.hpp"
#include "doctest.h"

using namespace actflow;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an actflow::Error");
    return ErrorKind::Argument;
}

std::vector<Vector> cluster(Rng& rng, const Vector& mean, double scale, std::size_t n) {
    std::vector<Vector> out;
    for (std::size_t i = 0; i < n; ++i) {
        Vector z = sample_standard_gaussian(rng, mean.size());
        for (std::size_t k = 0; k < z.size(); ++k) {
            z[k] = mean[k] + scale * z[k];
        }
        out.push_back(z);
    }
    return out;
}

}  // namespace

TEST_CASE("CAA direction") {
    const std::vector<Vector> pos(3, Vector{1.0, 0.0});
    const std::vector<Vector> neg(3, Vector{0.0, 0.0});
    CHECK(caa_direction(pos, neg) == Vector{1.0, 0.0});
    CHECK(kind_of([&] { caa_direction(pos, pos); }) == ErrorKind::Degenerate);

    SUBCASE("matches a naive two-pass mean difference") {
        Rng rng(4);
        const auto p = cluster(rng, {1.0, -2.0, 0.5}, 0.7, 57);
        const auto n = cluster(rng, {-0.5, 0.0, 0.25}, 1.3, 91);
        Vector mp(3, 0.0), mn(3, 0.0);
        for (const auto& v : p) {
            for (int k = 0; k < 3; ++k) {
                mp[k] += v[k] / 57.0;
            }
        }
        for (const auto& v : n) {
            for (int k = 0; k < 3; ++k) {
                mn[k] += v[k] / 91.0;
            }
        }
        Vector diff = subtract(mp, mn);
        diff = scaled(diff, 1.0 / norm(diff));
        const Vector got = caa_direction(p, n);
        for (int k = 0; k < 3; ++k) {
            CHECK(std::abs(got[k] - diff[k]) <= 1e-12);
        }
        CHECK(norm(got) == doctest::Approx(1.0).epsilon(1e-15));
        auto shuffled = p;
        std::reverse(shuffled.begin(), shuffled.end());
        const Vector again = caa_direction(shuffled, n);
        for (int k = 0; k < 3; ++k) {
            CHECK(std::abs(again[k] - got[k]) <= 1e-14);
        }
    }
}

TEST_CASE("RepE direction") {
    SUBCASE("parallel differences give the sign-fixed axis") {
        const std::vector<Vector> neg{{0.0, 0.0}, {1.0, 1.0}, {2.0, -1.0}};
        const std::vector<Vector> pos{{0.0, 0.5}, {1.0, 3.0}, {2.0, -0.5}};
        const Vector d = repe_direction(pos, neg);
        CHECK(std::abs(d[0]) <= 1e-9);
        CHECK(d[1] == doctest::Approx(1.0).epsilon(1e-9));
        const Vector flipped = repe_direction(neg, pos);
        CHECK(flipped[1] == doctest::Approx(-1.0).epsilon(1e-9));
    }
    SUBCASE("picks the axis of larger variance") {
        // Differences along x with spread 3 and along y with spread 1, paired.
        std::vector<Vector> pos, neg;
        for (int i = 0; i < 40; ++i) {
            const double s = (i % 2 == 0) ? 1.0 : -1.0;
            neg.push_back({0.0, 0.0});
            pos.push_back(i < 20 ? Vector{3.0 * s + 0.1, 0.0} : Vector{0.1, 1.0 * s});
        }
        const Vector d = repe_direction(pos, neg);
        CHECK(std::abs(d[0]) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(d[0] > 0.0);
        std::vector<Vector> pr(pos.rbegin(), pos.rend()), nr(neg.rbegin(), neg.rend());
        const Vector e = repe_direction(pr, nr);
        CHECK(std::abs(e[0] - d[0]) <= 1e-7);
        CHECK(std::abs(e[1] - d[1]) <= 1e-7);
    }
    SUBCASE("degenerate inputs") {
        const std::vector<Vector> one{{1.0, 0.0}};
        CHECK_THROWS_AS(repe_direction(one, one), Error);
        const std::vector<Vector> same{{1.0, 0.0}, {2.0, 1.0}};
        CHECK(kind_of([&] { repe_direction(same, same); }) == ErrorKind::Degenerate);
    }
}

TEST_CASE("edit delta and alignment score") {
    CHECK(edit_delta(Vector{3.0, 4.0}, Vector{1.0, 1.0}) == Vector{2.0, 3.0});
    CHECK(edit_delta(Vector{3.0, 4.0}, Vector{3.0, 4.0}) == Vector{0.0, 0.0});
    const Vector dir{0.6, 0.8};
    CHECK(alignment_score(Vector{3.0, 4.0}, dir) == doctest::Approx(1.0));
    CHECK(alignment_score(Vector{-4.0, 3.0}, dir) == doctest::Approx(0.0));
    CHECK(alignment_score(Vector{-3.0, -4.0}, dir) == doctest::Approx(-1.0));
    CHECK(alignment_score(Vector{1.0, 7.0}, scaled(dir, 5.0)) ==
          doctest::Approx(alignment_score(Vector{2.0, 14.0}, dir)));
    CHECK(kind_of([&] { alignment_score(Vector{0.0, 0.0}, dir); }) == ErrorKind::Degenerate);
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        const double c = alignment_score(sample_standard_gaussian(rng, 4), sample_standard_gaussian(rng, 4));
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
    }
}

TEST_CASE("position alignment profile") {
    ModelConfig bucketing;
    bucketing.max_positions = 3;
    bucketing.position_bucket_width = 4;
    const Vector e0{1.0, 0.0};
    const Vector e1{0.0, 1.0};
    EditSpec spec;
    spec.source = Condition::of(e0);
    spec.target = Condition::of(e1);
    spec.strength = 0.5;
    spec.forward = SolveSpec{20, 1.0, 1.0};
    spec.inversion = SolveSpec{10, 1.0, 1.0};

    std::vector<ActivationRecord> records;
    for (std::uint32_t p = 0; p < 12; ++p) {
        records.push_back({0, p, 0, {0.1 * p, -0.2}});
    }
    DirectionSet dirs;
    dirs.directions[0] = {1.0, 0.0};

    SUBCASE("constant field: every delta is equal so the profile is flat") {
        const FunctionField f([](std::span<const double>, double, Condition c) {
            if (c.is_null()) {
                return Vector{0.0, 0.0};
            }
            return c.embedding()[0] > 0.5 ? Vector{1.0, 1.0} : Vector{2.0, 1.0};
        });
        const AlignmentProfile prof = position_alignment_profile(records, f, bucketing, spec, dirs);
        REQUIRE(prof.rows.size() == 3);
        for (const auto& row : prof.rows) {
            CHECK(row.count == 4);
            CHECK(row.mean_cosine == doctest::Approx(prof.rows[0].mean_cosine).epsilon(1e-12));
            CHECK(row.mean_cosine == doctest::Approx(1.0));
        }
        CHECK(prof.skipped == 0);
        CHECK(profile_csv(prof).rfind("bucket,mean_cosine,count\n0,", 0) == 0);
    }
    SUBCASE("strength 0 skips every record") {
        const FunctionField f([](std::span<const double>, double, Condition) { return Vector{1.0, 1.0}; });
        EditSpec zero = spec;
        zero.strength = 0.0;
        const AlignmentProfile prof = position_alignment_profile(records, f, bucketing, zero, dirs);
        CHECK(prof.rows.empty());
        CHECK(prof.skipped == records.size());
    }
    SUBCASE("missing layer direction") {
        const FunctionField f([](std::span<const double>, double, Condition) { return Vector{1.0, 1.0}; });
        DirectionSet other;
        other.directions[5] = {1.0, 0.0};
        CHECK_THROWS_AS(position_alignment_profile(records, f, bucketing, spec, other), Error);
    }
}

TEST_CASE("UADR1 round trip") {
    DirectionSet set;
    set.directions[0] = {0.5f, -0.25f, 1.0f};
    set.directions[7] = {0.0, 1.0, 0.0};
    const auto bytes = encode_directions(set);
    CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "UADR1");
    CHECK(bytes.size() == 5 + 2 * (8 + 12));
    const DirectionSet back = decode_directions(bytes);
    CHECK(back.directions == set.directions);

    const auto path = std::filesystem::temp_directory_path() / "actflow_test_dirs.uadr";
    save_directions(set, path);
    CHECK(load_directions(path).directions == set.directions);
    std::filesystem::remove(path);

    auto cut = bytes;
    cut.pop_back();
    CHECK(kind_of([&] { decode_directions(cut); }) == ErrorKind::Format);
    CHECK(directions_csv(set).rfind("method,label,layer,index,value\ncaa,,0,0,0.5\n", 0) == 0);
}
