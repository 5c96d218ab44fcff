// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace actflow {

using Vector = std::vector<double>;

/// xoshiro256** seeded through splitmix64. The stream depends only on the seed,
/// never on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    /// Independent stream derived from (seed, stream_id); used to give every
    /// training sample its own generator so results do not depend on scheduling.
    static Rng substream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const noexcept { return m_seed; }

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Uniform integer in [0, n); n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) noexcept;
    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal() noexcept;

private:
    std::uint64_t m_seed;
    std::array<std::uint64_t, 4> m_state{};
    std::optional<double> m_cached_normal;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

Vector sample_standard_gaussian(Rng& rng, std::size_t dim);

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
        std::swap(items[i - 1], items[j]);
    }
}

// Dense helpers. All of them check dimensions and throw a shape error on mismatch.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
Vector add(std::span<const double> a, std::span<const double> b);
Vector subtract(std::span<const double> a, std::span<const double> b);
Vector scaled(std::span<const double> a, double factor);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
bool all_finite(std::span<const double> a) noexcept;
Vector mean_of(std::span<const Vector> rows);
/// Rounds every entry through float32, the corpus storage precision.
Vector to_storage_precision(std::span<const double> a);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central-difference gradient of f at p. Throws a numeric error naming the
/// coordinate if f is not finite at a probe point.
Vector finite_diff_gradient(const ScalarFunction& f, std::span<const double> p, double eps);

}  // namespace actflow
