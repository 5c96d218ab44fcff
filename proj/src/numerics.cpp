// Copyright (C) 2026 The actflow authors
// SPDX-License-Identifier: Apache-2.0

#include "actflow/numerics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "actflow/error.hpp"

namespace actflow {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

void require_same_dim(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::Shape, std::string(what) + ": dimension " + std::to_string(a.size()) + " vs " +
                                          std::to_string(b.size()));
    }
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : m_seed(seed) {
    std::uint64_t sm = seed;
    for (auto& word : m_state) {
        word = splitmix64(sm);
    }
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t mix = seed ^ (stream_id * 0xD1B54A32D192ED03ULL);
    return Rng(splitmix64(mix));
}

std::uint64_t Rng::next_u64() noexcept {
    const std::uint64_t result = rotl(m_state[1] * 5, 7) * 9;
    const std::uint64_t t = m_state[1] << 17;
    m_state[2] ^= m_state[0];
    m_state[3] ^= m_state[1];
    m_state[1] ^= m_state[2];
    m_state[0] ^= m_state[3];
    m_state[2] ^= t;
    m_state[3] = rotl(m_state[3], 45);
    return result;
}

double Rng::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_index(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) {
            return r % n;
        }
    }
}

double Rng::normal() noexcept {
    if (m_cached_normal) {
        const double z = *m_cached_normal;
        m_cached_normal.reset();
        return z;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    m_cached_normal = r * std::sin(theta);
    return r * std::cos(theta);
}

Vector sample_standard_gaussian(Rng& rng, std::size_t dim) {
    if (dim == 0) {
        throw Error(ErrorKind::InvalidDimension, "sample_standard_gaussian requires dim >= 1");
    }
    Vector out(dim);
    for (auto& x : out) {
        x = rng.normal();
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "squared_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

Vector add(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "add");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] + b[i];
    }
    return out;
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "subtract");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    return out;
}

Vector scaled(std::span<const double> a, double factor) {
    Vector out(a.begin(), a.end());
    for (auto& x : out) {
        x *= factor;
    }
    return out;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    require_same_dim(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += alpha * x[i];
    }
}

bool all_finite(std::span<const double> a) noexcept {
    for (double x : a) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

Vector mean_of(std::span<const Vector> rows) {
    if (rows.empty()) {
        throw Error(ErrorKind::Argument, "mean of an empty list");
    }
    Vector acc(rows.front().size(), 0.0);
    for (const auto& row : rows) {
        axpy(1.0, row, acc);
    }
    for (auto& x : acc) {
        x /= static_cast<double>(rows.size());
    }
    return acc;
}

Vector to_storage_precision(std::span<const double> a) {
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = static_cast<double>(static_cast<float>(a[i]));
    }
    return out;
}

Vector finite_diff_gradient(const ScalarFunction& f, std::span<const double> p, double eps) {
    if (!(eps > 0.0)) {
        throw Error(ErrorKind::Argument, "finite_diff_gradient requires eps > 0");
    }
    Vector probe(p.begin(), p.end());
    Vector grad(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double original = probe[k];
        probe[k] = original + eps;
        const double plus = f(probe);
        probe[k] = original - eps;
        const double minus = f(probe);
        probe[k] = original;
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
            throw Error(ErrorKind::Numeric, "non-finite function value at coordinate " + std::to_string(k));
        }
        grad[k] = (plus - minus) / (2.0 * eps);
    }
    return grad;
}

}  // namespace actflow
