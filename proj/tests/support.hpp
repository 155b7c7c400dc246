#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "qsdlab/grid_measure.hpp"

namespace qsdtest {

inline constexpr double kPi = std::numbers::pi;

// Small deterministic generator for property tests (splitmix64).
class Gen {
public:
    explicit Gen(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

private:
    std::uint64_t state_;
};

// Positive density: a random mixture of up to three bumps over a floor.
inline std::vector<double> random_density(Gen& g, const qsd::Grid1D& grid) {
    const std::size_t bumps = 1 + g.index(3);
    std::vector<double> c(bumps), w(bumps), a(bumps);
    for (std::size_t k = 0; k < bumps; ++k) {
        c[k] = g.uniform(grid.x_min(), grid.x_max());
        w[k] = g.uniform(0.05, 0.5) * (grid.x_max() - grid.x_min());
        a[k] = g.uniform(0.2, 1.0);
    }
    const double floor = g.uniform(1e-3, 0.2);
    std::vector<double> d(grid.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        double v = floor;
        for (std::size_t k = 0; k < bumps; ++k) {
            const double z = (grid.node(i) - c[k]) / w[k];
            v += a[k] * std::exp(-0.5 * z * z);
        }
        d[i] = v;
    }
    return d;
}

inline qsd::GridMeasure random_measure(Gen& g, const qsd::Grid1D& grid) {
    return qsd::GridMeasure::from_density(grid, random_density(g, grid));
}

inline qsd::GridMeasure uniform_measure(const qsd::Grid1D& grid) {
    return qsd::GridMeasure::from_density(grid, std::vector<double>(grid.size(), 1.0));
}

inline qsd::GridMeasure gaussian_measure(const qsd::Grid1D& grid, double mean, double sd) {
    std::vector<double> d(grid.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double z = (grid.node(i) - mean) / sd;
        d[i] = std::exp(-0.5 * z * z);
    }
    return qsd::GridMeasure::from_density(grid, std::move(d));
}

inline double sup_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace qsdtest
