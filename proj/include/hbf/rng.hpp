#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "hbf/linalg.hpp"

namespace hbf {

/// Deterministic random stream.  Independent streams are derived from a
/// master seed and a counter path (e.g. {axis index, trial index, purpose})
/// by chained splitmix64 mixing, so trials can be evaluated in any order
/// and still reproduce bit-identical draws.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

    static SeededRng derive(std::uint64_t master, std::initializer_list<std::uint64_t> path);

    double uniform(double lo = 0.0, double hi = 1.0)
    {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal() { return normal_(engine_); }

    /// Circularly symmetric CN(0, 1).
    cd complex_normal()
    {
        constexpr double s = 0.70710678118654752440;
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

    CMatrix complex_normal_matrix(Eigen::Index rows, Eigen::Index cols);
    CVector complex_normal_vector(Eigen::Index n);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace hbf
