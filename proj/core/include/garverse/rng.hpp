#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace garverse {

// Deterministic pseudo-random source. All sampling in the toolkit goes
// through this class so that a (seed) pair pins every generated byte,
// independent of the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix(seed + 0x9e3779b97f4a7c15ULL)) {
        // Warm up so that small seeds diverge quickly.
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        // xorshift64* (Marsaglia); period 2^64-1, state never zero after splitmix.
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Modulo bias is < 2^-50 for the corpus sizes used here.
        return next_u64() % n;
    }

    // Standard normal via Box-Muller (no cached spare, to keep call
    // sequences position-independent).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Eigen::Vector3d normal3() {
        const double x = normal();
        const double y = normal();
        const double z = normal();
        return {x, y, z};
    }

    // Uniform in the closed unit ball of R^dim (rejection sampling).
    Eigen::VectorXd unit_ball(int dim) {
        // Rejection is hopeless in 32 dimensions; use the normalized
        // Gaussian direction times a radius with density r^(dim-1).
        Eigen::VectorXd v(dim);
        for (int i = 0; i < dim; ++i) v[i] = normal();
        const double n = v.norm();
        if (n < 1e-300) return Eigen::VectorXd::Zero(dim);
        const double r = std::pow(uniform(), 1.0 / dim);
        return v * (r / n);
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        x = x ^ (x >> 31);
        return x ? x : 0x1234567887654321ULL;
    }

    std::uint64_t state_;
};

} // namespace garverse
